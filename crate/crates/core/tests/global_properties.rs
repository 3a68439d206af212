use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gtexp::approx::{lower_cut_global_limit, monotone_limit, ApproxOptions, Direction};
use gtexp::extreal::ext_add;
use gtexp::globalexp::{conditional_process, upper_exp_finitary_global};
use gtexp::oracle::{sample_paths, PreciseSelection};
use gtexp::random::{random_finitary, random_local_variable, random_stationary_tree};
use gtexp::tree::{ImpreciseTree, Situation};
use gtexp::variables::{apply_cut, pad_to_n_measurable, CutSide, FinitaryVariable, SequenceSpec};
use gtexp::ExtReal;

const BUDGET: u128 = 1_000_000;

fn setup(seed: u64) -> (ChaCha8Rng, ImpreciseTree, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(2..=3);
    let depth = rng.random_range(1..=3);
    let tree = random_stationary_tree(&mut rng, k, 3);
    (rng, tree, k, depth)
}

fn upper(tree: &ImpreciseTree, f: &FinitaryVariable, s: &Situation) -> ExtReal {
    upper_exp_finitary_global(tree, f, s, BUDGET).unwrap().value
}

fn extended(rng: &mut ChaCha8Rng, k: usize, depth: usize) -> FinitaryVariable {
    FinitaryVariable::from_fn(k, depth, BUDGET, |_| match rng.random_range(0..10) {
        0 => ExtReal::PLUS_INF,
        1 => ExtReal::MINUS_INF,
        _ => ExtReal::from(rng.random_range(-10.0..10.0)),
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn iterated_upper_expectations(seed in any::<u64>()) {
        let (mut rng, tree, k, depth) = setup(seed);
        let f = extended(&mut rng, k, depth);
        let len = rng.random_range(0..depth);
        let s = Situation((0..len).map(|_| rng.random_range(0..k)).collect());
        let children: Vec<ExtReal> = (0..k).map(|x| upper(&tree, &f, &s.child(x))).collect();
        let via_local = tree.resolve(&s.0).upper(&children);
        let direct = upper(&tree, &f, &s);
        prop_assert!(direct.approx_eq(via_local, 1e-9), "{} vs {}", direct, via_local);
    }

    #[test]
    fn compatibility_with_local_models(seed in any::<u64>()) {
        let (mut rng, tree, k, _) = setup(seed);
        let len = rng.random_range(0..3);
        let s = Situation((0..len).map(|_| rng.random_range(0..k)).collect());
        let local = random_local_variable(&mut rng, k, true);
        let f = FinitaryVariable::from_fn(k, len + 1, BUDGET, |p| local.table[p[len]]).unwrap();
        let want = tree.resolve(&s.0).upper(&local.table);
        prop_assert!(upper(&tree, &f, &s).approx_eq(want, 1e-12));
    }

    #[test]
    fn upper_cuts_increase_to_the_direct_value(seed in any::<u64>()) {
        let (mut rng, tree, k, depth) = setup(seed);
        let f = random_finitary(&mut rng, k, depth, -10.0, 10.0)
            .map(|v| if v.get() > 8.0 { ExtReal::PLUS_INF } else { v });
        let terms: Vec<_> = (0..=12).map(|e| apply_cut(&f, 10f64.powi(e), CutSide::Upper)).collect();
        let r = monotone_limit(&tree, &SequenceSpec::UserList(terms), &Situation::root(), Direction::Up, &ApproxOptions::default()).unwrap();
        let direct = upper(&tree, &f, &Situation::root());
        if direct.is_plus_inf() {
            prop_assert!(r.diverging || r.estimate.get() >= 1e6);
        } else {
            prop_assert!(r.estimate.approx_eq(direct, 1e-9), "{} vs {}", r.estimate, direct);
        }
    }

    #[test]
    fn lower_cuts_decrease_to_the_direct_value(seed in any::<u64>()) {
        let (mut rng, tree, k, depth) = setup(seed);
        let f = random_finitary(&mut rng, k, depth, -10.0, 10.0)
            .map(|v| if v.get() < -8.0 { ExtReal::MINUS_INF } else { v });
        let schedule: Vec<f64> = (0..=12).map(|e| -(10f64.powi(e))).collect();
        let r = lower_cut_global_limit(&tree, &f, &Situation::root(), &schedule, &ApproxOptions::default()).unwrap();
        let direct = upper(&tree, &f, &Situation::root());
        prop_assert_eq!(r.estimate, direct);
        prop_assert_eq!(r.diverging, direct.is_minus_inf());
        let last = r.trace.last().unwrap().1;
        if direct.is_finite() {
            prop_assert!(last.approx_eq(direct, 1e-9), "{} vs {}", last, direct);
        }
    }

    #[test]
    fn padding_keeps_monotone_sequences_monotone(seed in any::<u64>()) {
        let (mut rng, tree, k, _) = setup(seed);
        let mut seq = Vec::new();
        let mut base = random_finitary(&mut rng, k, 1, -5.0, 5.0);
        for d in 1..=3 {
            let bump = random_finitary(&mut rng, k, d, 0.0, 1.0);
            base = base.zip_with(&bump, BUDGET, ext_add).unwrap();
            seq.push(base.clone());
        }
        let padded = pad_to_n_measurable(&seq, ExtReal::from(-10.0));
        let values: Vec<ExtReal> = padded.iter().map(|g| upper(&tree, g, &Situation::root())).collect();
        for w in values.windows(2) {
            prop_assert!(w[0].le_tol(w[1], 1e-9));
        }
        let last = upper(&tree, seq.last().unwrap(), &Situation::root());
        prop_assert_eq!(*values.last().unwrap(), last);
    }

    #[test]
    fn sampled_paths_reach_the_variable(seed in any::<u64>()) {
        let (mut rng, tree, k, depth) = setup(seed);
        let f = random_finitary(&mut rng, k, depth, -10.0, 10.0);
        let m = conditional_process(&tree, &f, depth + 2, BUDGET).unwrap();
        for path in sample_paths(&PreciseSelection::default(), &tree, depth + 2, 20, seed).unwrap() {
            let value = f.value(&path).unwrap();
            for n in depth..=depth + 2 {
                prop_assert_eq!(m.value(&path[..n]), value);
            }
        }
    }
}

#[test]
fn imprecise_second_step_indicator() {
    let tree = gtexp::tree::parse_tree(include_str!("../fixtures/imprecise_two_state.json")).unwrap();
    let f = FinitaryVariable::from_fn(2, 2, 100, |p| ExtReal::from(p[1] as f64)).unwrap();
    assert!(upper(&tree, &f, &Situation::root()).approx_eq(ExtReal::from(0.25), 1e-12));
    let lower = gtexp::globalexp::lower_exp_finitary_global(&tree, &f, &Situation::root(), BUDGET).unwrap().value;
    assert!(lower.approx_eq(ExtReal::from(0.05), 1e-12));
}
