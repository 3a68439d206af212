//! Seeded generators for models, trees and variables, used by the test
//! batteries, the `check` command and the examples.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::extreal::ExtReal;
use crate::localmodel::{LocalModel, LocalVariable};
use crate::tree::{Assignment, ImpreciseTree, Situation};
use crate::variables::FinitaryVariable;

/// Labels `"0"`, `"1"`, ... for `k` states.
pub fn state_labels(k: usize) -> Vec<String> {
    (0..k).map(|i| i.to_string()).collect()
}

/// A random pmf; with probability 1/4 some entries are forced to zero.
pub fn random_pmf<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let sparse = k > 1 && rng.random_bool(0.25);
    let keep = rng.random_range(0..k);
    let mut w: Vec<f64> = (0..k)
        .map(|i| {
            if sparse && i != keep && rng.random_bool(0.5) {
                0.0
            } else {
                -(1.0 - rng.random::<f64>()).ln()
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        w = vec![0.0; k];
        w[keep] = 1.0;
        return w;
    }
    w.iter_mut().for_each(|v| *v /= total);
    w
}

pub fn random_local_model<R: Rng>(rng: &mut R, states: &[String], vertices: usize) -> LocalModel {
    let k = states.len();
    let vs = (0..vertices.max(1)).map(|_| random_pmf(rng, k)).collect();
    LocalModel::new(states.to_vec(), vs).expect("generated pmfs are valid")
}

/// A random local variable; with `extended` some entries are infinite.
pub fn random_local_variable<R: Rng>(rng: &mut R, k: usize, extended: bool) -> LocalVariable {
    LocalVariable::new(
        (0..k)
            .map(|_| {
                if extended && rng.random_bool(0.2) {
                    if rng.random_bool(0.5) {
                        ExtReal::PLUS_INF
                    } else {
                        ExtReal::MINUS_INF
                    }
                } else {
                    ExtReal::from(rng.random_range(-10.0..10.0))
                }
            })
            .collect(),
    )
}

pub fn random_stationary_tree<R: Rng>(rng: &mut R, k: usize, max_vertices: usize) -> ImpreciseTree {
    let states = state_labels(k);
    let model = |rng: &mut R| {
        let v = rng.random_range(1..=max_vertices.max(1));
        random_local_model(rng, &states, v)
    };
    let root = model(rng);
    let by_state = (0..k).map(|_| model(rng)).collect();
    ImpreciseTree::stationary(root, by_state).expect("models share the state list")
}

/// A tree with its own model at every situation shorter than `depth`.
///
/// Vertex counts are drawn from `1..=max_vertices` while their product
/// stays within `selection_cap`; later situations (visited in random
/// order) get a single vertex, so the brute-force oracle stays cheap.
pub fn random_explicit_tree<R: Rng>(
    rng: &mut R,
    k: usize,
    depth: usize,
    max_vertices: usize,
    selection_cap: u128,
) -> ImpreciseTree {
    let states = state_labels(k);
    let mut situations: Vec<Situation> = (0..depth)
        .flat_map(|len| (0..k.pow(len as u32)).map(move |i| Situation::from_level_index(i, len, k)))
        .collect();
    situations.shuffle(rng);
    let mut product: u128 = 1;
    let mut by_situation = HashMap::new();
    for s in situations {
        let want = rng.random_range(1..=max_vertices.max(1));
        let v = if product * want as u128 <= selection_cap { want } else { 1 };
        product *= v as u128;
        by_situation.insert(s, random_local_model(rng, &states, v));
    }
    let default = random_local_model(rng, &states, 1);
    ImpreciseTree::new(states, Assignment::Explicit { by_situation, default }).expect("valid tree")
}

pub fn random_finitary<R: Rng>(rng: &mut R, k: usize, depth: usize, lo: f64, hi: f64) -> FinitaryVariable {
    FinitaryVariable::from_fn(k, depth, u128::MAX, |_| ExtReal::from(rng.random_range(lo..hi)))
        .expect("unbounded budget")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::selection_count;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pmfs_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = random_pmf(&mut rng, 3);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&q| q >= 0.0));
        }
    }

    #[test]
    fn explicit_trees_respect_the_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let t = random_explicit_tree(&mut rng, 3, 4, 3, 20_000);
            assert!(selection_count(&t, &Situation::root(), 4) <= 20_000);
        }
    }

    #[test]
    fn generators_are_reproducible() {
        let a = random_stationary_tree(&mut ChaCha8Rng::seed_from_u64(9), 3, 3);
        let b = random_stationary_tree(&mut ChaCha8Rng::seed_from_u64(9), 3, 3);
        assert_eq!(a.to_json_value(), b.to_json_value());
    }
}
