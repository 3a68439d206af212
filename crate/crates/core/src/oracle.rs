//! Brute-force reference values: enumerate every precise tree obtained by
//! choosing one vertex per situation, and take the extreme expectation.
//! Also draws sample paths from a chosen precise tree.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::tree::{ImpreciseTree, Situation};
use crate::variables::FinitaryVariable;

/// One vertex per situation; situations without an entry use vertex 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PreciseSelection {
    pub choice: HashMap<Situation, usize>,
}

impl PreciseSelection {
    pub fn vertex_at(&self, s: &[usize]) -> usize {
        self.choice.get(&Situation(s.to_vec())).copied().unwrap_or(0)
    }

    pub fn validate(&self, tree: &ImpreciseTree) -> Result<()> {
        for (s, &v) in &self.choice {
            let m = tree.try_resolve(s)?;
            if v >= m.vertices().len() {
                return Err(Error::contract(format!(
                    "vertex {v} chosen at {} but the model has {}",
                    tree.display_situation(s),
                    m.vertices().len()
                )));
            }
        }
        Ok(())
    }
}

/// Situations strictly below depth `depth` that extend `s`, in level order.
fn internal_situations(k: usize, s: &Situation, depth: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for extra in 0..depth.saturating_sub(s.len()) {
        for i in 0..k.pow(extra as u32) {
            let mut v = s.0.clone();
            v.extend(Situation::from_level_index(i, extra, k).0);
            out.push(v);
        }
    }
    out
}

/// Expectation of `f` given `s` in the precise tree whose vertex at the
/// `j`-th internal situation (level order below `s`) is `pmfs[j][digits[j]]`,
/// computed forwards from path probabilities.
fn precise_expectation(k: usize, pmfs: &[&[Vec<f64>]], digits: &[usize], leaf_values: &[f64], extra: usize) -> f64 {
    let mut probs = vec![1.0];
    let mut offset = 0;
    for _ in 0..extra {
        let mut next = vec![0.0; probs.len() * k];
        for (i, &p) in probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let pmf = &pmfs[offset + i][digits[offset + i]];
            for (x, &q) in pmf.iter().enumerate() {
                next[i * k + x] = p * q;
            }
        }
        offset += probs.len();
        probs = next;
    }
    probs.iter().zip(leaf_values).map(|(p, v)| p * v).sum()
}

fn brute_force(
    tree: &ImpreciseTree,
    f: &FinitaryVariable,
    s: &Situation,
    budget: u128,
    pick: fn(f64, f64) -> f64,
) -> Result<ExtReal> {
    if f.num_states() != tree.num_states() {
        return Err(Error::contract("variable and tree have different state spaces"));
    }
    if !f.is_gamble() {
        return Err(Error::contract("the brute-force oracle needs a finite-valued variable"));
    }
    tree.check_situation(s)?;
    if s.len() >= f.depth() {
        return Ok(f.value_unchecked(&s.0));
    }
    let k = tree.num_states();
    let extra = f.depth() - s.len();
    let situations = internal_situations(k, s, f.depth());
    let pmfs: Vec<&[Vec<f64>]> = situations.iter().map(|p| tree.resolve(p).vertices()).collect();
    let radix: Vec<usize> = pmfs.iter().map(|v| v.len()).collect();
    let combos = radix.iter().try_fold(1u128, |acc, &r| acc.checked_mul(r as u128)).unwrap_or(u128::MAX);
    if combos > budget {
        return Err(Error::Budget { what: "vertex selections".into(), needed: combos, budget });
    }
    let leaf_values: Vec<f64> = (0..k.pow(extra as u32))
        .map(|i| {
            let mut p = s.0.clone();
            p.extend(Situation::from_level_index(i, extra, k).0);
            f.value_unchecked(&p).get()
        })
        .collect();
    let mut digits = vec![0usize; situations.len()];
    let mut best: Option<f64> = None;
    loop {
        let v = precise_expectation(k, &pmfs, &digits, &leaf_values, extra);
        best = Some(best.map_or(v, |b| pick(b, v)));
        // Mixed-radix increment.
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok(ExtReal::from(best.expect("at least one selection")));
            }
            digits[i] += 1;
            if digits[i] < radix[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Maximum over all vertex selections of the precise expectation of `f` given `s`.
pub fn brute_force_upper_exp(tree: &ImpreciseTree, f: &FinitaryVariable, s: &Situation, budget: u128) -> Result<ExtReal> {
    brute_force(tree, f, s, budget, f64::max)
}

/// Minimum over all vertex selections.
pub fn brute_force_lower_exp(tree: &ImpreciseTree, f: &FinitaryVariable, s: &Situation, budget: u128) -> Result<ExtReal> {
    brute_force(tree, f, s, budget, f64::min)
}

/// Number of vertex selections the oracle would enumerate.
pub fn selection_count(tree: &ImpreciseTree, s: &Situation, depth: usize) -> u128 {
    internal_situations(tree.num_states(), s, depth)
        .iter()
        .map(|p| tree.resolve(p).vertices().len() as u128)
        .fold(1u128, u128::saturating_mul)
}

/// `count` independent paths of `depth` states from the precise tree
/// picked by `selection`.
pub fn sample_paths(
    selection: &PreciseSelection,
    tree: &ImpreciseTree,
    depth: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    selection.validate(tree)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut path = Vec::with_capacity(depth);
        for _ in 0..depth {
            let pmf = &tree.resolve(&path).vertices()[selection.vertex_at(&path)];
            let dist = WeightedIndex::new(pmf).map_err(|e| Error::contract(e.to_string()))?;
            path.push(dist.sample(&mut rng));
        }
        out.push(path);
    }
    Ok(out)
}
