//! Acceptance battery: one PASS/FAIL line per criterion, non-zero exit on
//! any failure. All tolerances are pinned below.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gtexp::approx::{
    lower_expected_hitting_time, lower_hitting_probability, monotone_limit, monotone_limit_with,
    upper_expected_hitting_time, upper_hitting_probability, ApproxOptions, Direction, Sense,
};
use gtexp::cli::{detached_sup_batch, left_fixture, oracle_compare_random};
use gtexp::globalexp::{
    conditional_process, lower_exp_finitary_global, lower_exp_finite_memory, upper_exp_finitary_global,
    upper_exp_finite_memory,
};
use gtexp::localmodel::{check_local_axioms, Axiom, AxiomReport, DetachedSup, LocalModel, LocalVariable};
use gtexp::martingale::{
    certify_upper_bound, doob_crossing, normalize_for_crossing, truncate_supermartingale, verify_supermartingale,
};
use gtexp::random::{random_finitary, random_local_model, random_local_variable, random_stationary_tree, state_labels};
use gtexp::tree::{ImpreciseTree, Situation};
use gtexp::variables::{FinitaryVariable, HitKind, HittingTerm, SequenceSpec, Target};
use gtexp::ExtReal;

const ORACLE_TOL: f64 = 1e-9;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(60);
const REGRESSION_TOL: f64 = 1e-12;
const AXIOM_TOL: f64 = 1e-9;
const BOUND_TOL: f64 = 1e-9;
const MONOTONE_TOL: f64 = 1e-9;
/// Float slack for the conjugacy identity; both sides are computed by
/// different sums of the same products.
const CONJUGACY_TOL: f64 = 1e-12;
const CHAIN_TOL: f64 = 1e-6;
const CHAIN_MAX_N: usize = 64;
const GROWTH_TOL: f64 = 1e-9;
const NONNEG_TOL: f64 = 1e-12;
const FATOU_TOL: f64 = 1e-9;
const BUDGET: u128 = 1_000_000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_situation(rng: &mut ChaCha8Rng, k: usize, max_len: usize) -> Situation {
    let len = rng.random_range(0..=max_len);
    Situation((0..len).map(|_| rng.random_range(0..k)).collect())
}

fn random_tree_and_depth(rng: &mut ChaCha8Rng) -> (ImpreciseTree, usize, usize) {
    let k = rng.random_range(2..=3);
    let depth = rng.random_range(1..=if k == 2 { 5 } else { 4 });
    (random_stationary_tree(rng, k, 3), k, depth)
}

/// Values of `f` on every leaf at the depth of `f` below `s`.
fn leaves_below(f: &FinitaryVariable, s: &Situation) -> Vec<ExtReal> {
    let k = f.num_states();
    let extra = f.depth().saturating_sub(s.len());
    (0..k.pow(extra as u32))
        .map(|i| {
            let mut p = s.0.clone();
            p.extend(Situation::from_level_index(i, extra, k).0);
            f.value(&p).expect("full-length prefix")
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let cmp = oracle_compare_random(200, 4, 20_240_601, u128::MAX).map_err(err)?;
    let elapsed = start.elapsed();
    ensure(cmp.instances == 200, || format!("only {} instances ran", cmp.instances))?;
    ensure(cmp.max_upper_diff < ORACLE_TOL, || format!("upper gap {:e}", cmp.max_upper_diff))?;
    ensure(cmp.max_lower_diff < ORACLE_TOL, || format!("lower gap {:e}", cmp.max_lower_diff))?;
    ensure(elapsed < ORACLE_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "200 instances, max gaps {:.1e}/{:.1e}, {:.2}s",
        cmp.max_upper_diff,
        cmp.max_lower_diff,
        elapsed.as_secs_f64()
    ))
}

fn non_decreasing_regression() -> Outcome {
    let tree = left_fixture();
    let term = |n: f64| FinitaryVariable::new(2, 1, vec![ExtReal::ZERO, ExtReal::from(n)]).map_err(err);
    for n in [1.0, 10.0, 1e6] {
        let v = upper_exp_finitary_global(&tree, &term(n)?, &Situation::root(), BUDGET).map_err(err)?.value;
        ensure(v.approx_eq(ExtReal::ZERO, REGRESSION_TOL), || format!("value {v} at n={n}"))?;
    }
    let terms = (1..=16).map(|n| term(n as f64)).collect::<Result<Vec<_>, _>>()?;
    let r = monotone_limit(
        &tree,
        &SequenceSpec::UserList(terms),
        &Situation::root(),
        Direction::Up,
        &ApproxOptions::default(),
    )
    .map_err(err)?;
    ensure(r.converged, || "limit did not converge".into())?;
    ensure(r.estimate.approx_eq(ExtReal::ZERO, REGRESSION_TOL), || format!("limit {}", r.estimate))?;
    Ok(format!("values 0 at n=1,10,1e6; limit 0 converged at n={}", r.converged_at.unwrap_or(0)))
}

fn detached_sup_fixture() -> Outcome {
    let report = check_local_axioms(&DetachedSup { num_states: 2 }, &detached_sup_batch(), 7, AXIOM_TOL).map_err(err)?;
    for ax in [Axiom::E1, Axiom::E2Ext, Axiom::E3Ext, Axiom::E4Ext, Axiom::E5] {
        ensure(report.holds(ax), || format!("{ax} should hold: {:?}", report.get(ax)))?;
    }
    ensure(!report.holds(Axiom::E6) && report.get(Axiom::E6).is_some(), || "E6 should fail".into())?;
    Ok(format!("E1, E2'-E4', E5 hold; fails {:?}", report.failed_axioms()))
}

fn cut_agreement(model: &LocalModel, f: &LocalVariable) -> Result<(), String> {
    let up_schedule: Vec<f64> = (0..=12).map(|e| 10f64.powi(e)).collect();
    let low_schedule: Vec<f64> = up_schedule.iter().map(|c| -c).collect();
    let direct = model.upper(&f.table);
    let shifted = |v: ExtReal| v.as_finite().map_or(0.0, f64::abs).max(1.0) * AXIOM_TOL;

    let lower = model.lower_cut_limit(f, &low_schedule).map_err(err)?;
    if lower.diverging {
        ensure(direct.is_minus_inf(), || format!("lower cut diverges but direct is {direct}"))?;
    } else {
        ensure(lower.value.approx_eq(direct, shifted(direct)), || {
            format!("lower cut limit {} vs direct {direct} on {:?}", lower.value, f.table)
        })?;
    }
    if f.is_bounded_below() {
        let upper = model.upper_cut_limit(f, &up_schedule).map_err(err)?;
        if upper.diverging {
            ensure(direct.is_plus_inf(), || format!("upper cut diverges but direct is {direct}"))?;
        } else {
            ensure(upper.value.approx_eq(direct, shifted(direct)), || {
                format!("upper cut limit {} vs direct {direct} on {:?}", upper.value, f.table)
            })?;
        }
    }
    Ok(())
}

fn axiom_batteries() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut total = AxiomReport::default();
    for _ in 0..50 {
        let k = rng.random_range(2..=3);
        let vertices = rng.random_range(1..=3);
        let model = random_local_model(&mut rng, &state_labels(k), vertices);
        for _ in 0..100 {
            let batch: Vec<LocalVariable> = (0..4)
                .map(|_| {
                    let extended = rng.random_bool(0.5);
                    random_local_variable(&mut rng, k, extended)
                })
                .collect();
            let seed = rng.random();
            let report = check_local_axioms(&model, &batch, seed, AXIOM_TOL).map_err(err)?;
            ensure(report.all_hold(), || {
                let bad: Vec<_> = report.checks.iter().filter(|c| !c.holds()).collect();
                format!("failures: {bad:?}")
            })?;
            total.merge(&report);
            for f in &batch {
                cut_agreement(&model, f)?;
            }
        }
    }
    use Axiom::*;
    let required = [E1, E2, E3, E4, E6, E7, E8, E9, E10, E11, E12, E13, E14, C1, C2, C3, C4, C5, C6, C7];
    for ax in required {
        ensure(total.holds(ax), || format!("{ax} was not exercised"))?;
    }
    let instances: usize = total.checks.iter().map(|c| c.passed).sum();
    Ok(format!("5000 batches, {instances} axiom instances, cut limits agree"))
}

fn coherence_and_certificates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..100 {
        let (tree, k, depth) = random_tree_and_depth(&mut rng);
        let s = random_situation(&mut rng, k, depth - 1);
        let up = |f: &FinitaryVariable| upper_exp_finitary_global(&tree, f, &s, BUDGET).map(|r| r.value).map_err(err);
        let lo = |f: &FinitaryVariable| lower_exp_finitary_global(&tree, f, &s, BUDGET).map(|r| r.value).map_err(err);
        let tol = |v: ExtReal| v.as_finite().map_or(0.0, f64::abs).max(1.0) * BOUND_TOL;

        // Gamble: canonical supermartingale and certificate.
        let f = random_finitary(&mut rng, k, depth, -10.0, 10.0);
        let m = conditional_process(&tree, &f, depth, BUDGET).map_err(err)?;
        let report = verify_supermartingale(&tree, &m, depth).map_err(err)?;
        ensure(report.is_bounded_below_supermartingale(), || format!("case {case}: canonical process violates"))?;
        let cert = certify_upper_bound(&tree, &m, &f, &s, depth, 0).map_err(err)?;
        let ef = up(&f)?;
        ensure(cert.leaf_floor_ok, || format!("case {case}: leaf floor {:?}", cert.first_gap))?;
        ensure(cert.bound.approx_eq(ef, BOUND_TOL), || format!("case {case}: bound {} vs {ef}", cert.bound))?;

        // V1-V6 on extended variables.
        let ext = |rng: &mut ChaCha8Rng| {
            let inf = rng.random_bool(0.3);
            FinitaryVariable::from_fn(k, depth, BUDGET, |_| {
                if inf && rng.random_bool(0.15) {
                    if rng.random_bool(0.5) {
                        ExtReal::PLUS_INF
                    } else {
                        ExtReal::MINUS_INF
                    }
                } else {
                    ExtReal::from(rng.random_range(-10.0..10.0))
                }
            })
            .map_err(err)
        };
        let f = ext(&mut rng)?;
        let g = ext(&mut rng)?;
        let (ef, eg, lf) = (up(&f)?, up(&g)?, lo(&f)?);
        let leaves = leaves_below(&f, &s);
        let (inf, sup) = (*leaves.iter().min().unwrap(), *leaves.iter().max().unwrap());
        ensure(ef.le_tol(sup, tol(sup)), || format!("case {case}: V1 {ef} > {sup}"))?;
        let sum = f.zip_with(&g, BUDGET, gtexp::extreal::ext_add).map_err(err)?;
        let rhs = gtexp::extreal::ext_add(ef, eg);
        ensure(up(&sum)?.le_tol(rhs, tol(rhs)), || format!("case {case}: V2"))?;
        for lambda in [0.0, rng.random_range(0.0..5.0)] {
            let scaled = f.map(|v| gtexp::extreal::ext_mul(ExtReal::from(lambda), v));
            let want = gtexp::extreal::ext_mul(ExtReal::from(lambda), ef);
            ensure(up(&scaled)?.approx_eq(want, tol(want)), || format!("case {case}: V3 at lambda={lambda}"))?;
        }
        let bump = ext(&mut rng)?.map(|v| if v.is_finite() { ExtReal::from(v.get().abs()) } else { ExtReal::PLUS_INF });
        let bigger = f.zip_with(&bump, BUDGET, gtexp::extreal::ext_add).map_err(err)?;
        ensure(ef.le_tol(up(&bigger)?, tol(ef)), || format!("case {case}: V4"))?;
        ensure(inf.le_tol(lf, tol(inf)) && lf.le_tol(ef, tol(ef)), || {
            format!("case {case}: V5 {inf} <= {lf} <= {ef}")
        })?;
        let mu = rng.random_range(-5.0..5.0);
        let shifted = f.map(|v| v + ExtReal::from(mu));
        let want = ef + ExtReal::from(mu);
        ensure(up(&shifted)?.approx_eq(want, tol(want)), || format!("case {case}: V6"))?;
    }
    Ok("100 instances: canonical processes verify, certificates match, V1-V6 hold".into())
}

fn hitting_brackets() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = ApproxOptions { max_n: 24, ..ApproxOptions::default() };
    let mut levels = 0usize;
    for case in 0..50 {
        let k = rng.random_range(2..=3);
        let tree = random_stationary_tree(&mut rng, k, 3);
        let members: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.5)).collect();
        let members = if members.is_empty() { vec![rng.random_range(0..k)] } else { members };
        let target = Target::new(k, &members).map_err(err)?;
        let s = random_situation(&mut rng, k, 2);

        for (kind, dir) in [(HitKind::Hit, Direction::Up), (HitKind::Miss, Direction::Down), (HitKind::TruncatedTime, Direction::Up)] {
            let spec = SequenceSpec::Hitting { kind, target: target.clone() };
            for sense in [Sense::Upper, Sense::Lower] {
                let r = monotone_limit_with(&tree, &spec, &s, dir, sense, &opts)
                    .map_err(|e| format!("case {case}: {kind:?} {sense:?}: {e}"))?;
                for w in r.trace.windows(2) {
                    let (a, b) = (w[0].1, w[1].1);
                    let slack = MONOTONE_TOL * a.as_finite().map_or(0.0, f64::abs).max(1.0);
                    let ok = match dir {
                        Direction::Up => a.le_tol(b, slack),
                        Direction::Down => b.le_tol(a, slack),
                    };
                    ensure(ok, || format!("case {case}: {kind:?} {sense:?} trace {a} -> {b}"))?;
                }
            }
        }

        let lower = lower_hitting_probability(&tree, &target, &s, &opts).map_err(err)?;
        for &(n, v) in &lower.trace {
            let term = |kind| HittingTerm { kind, target: target.clone(), horizon: n, offset: s.len() };
            let hit = lower_exp_finite_memory(&tree, &term(HitKind::Hit), &s).map_err(err)?.value;
            let miss = upper_exp_finite_memory(&tree, &term(HitKind::Miss), &s).map_err(err)?.value;
            let conj = ExtReal::ONE - miss;
            ensure(hit.approx_eq(conj, CONJUGACY_TOL), || format!("case {case}, n={n}: {hit} vs 1-{miss}"))?;
            ensure(v.approx_eq(hit, CONJUGACY_TOL), || format!("case {case}, n={n}: reported {v} vs {hit}"))?;
            levels += 1;
        }
    }
    Ok(format!("50 trees, monotone traces, conjugacy at {levels} truncation levels"))
}

fn fair_coin_chain() -> Outcome {
    let tree = ImpreciseTree::iid(LocalModel::precise(state_labels(2), vec![0.5, 0.5]).map_err(err)?);
    let target = Target::new(2, &[1]).map_err(err)?;
    let s = Situation(vec![0]);
    let opts = ApproxOptions { max_n: CHAIN_MAX_N, ..ApproxOptions::default() };
    let check = |name: &str, r: gtexp::approx::ApproxResult, want: f64| -> Result<String, String> {
        ensure(r.converged && r.converged_at.is_some_and(|n| n <= CHAIN_MAX_N), || format!("{name} did not converge"))?;
        ensure(r.estimate.approx_eq(ExtReal::from(want), CHAIN_TOL), || format!("{name} = {}", r.estimate))?;
        Ok(format!("{name}={} (n={})", r.estimate, r.converged_at.unwrap()))
    };
    let a = check("upper time", upper_expected_hitting_time(&tree, &target, &s, &opts).map_err(err)?, 2.0)?;
    let b = check("lower time", lower_expected_hitting_time(&tree, &target, &s, &opts).map_err(err)?, 2.0)?;
    let c = check("upper hit", upper_hitting_probability(&tree, &target, &s, &opts).map_err(err)?, 1.0)?;
    Ok(format!("{a}, {b}, {c}"))
}

fn doob_crossings() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut total = 0usize;
    for case in 0..100 {
        let (tree, k, depth) = random_tree_and_depth(&mut rng);
        let f = random_finitary(&mut rng, k, depth, -10.0, 10.0);
        let m = conditional_process(&tree, &f, depth, BUDGET).map_err(err)?;
        let t = random_situation(&mut rng, k, depth - 1);
        let m = normalize_for_crossing(&m, &t).map_err(err)?;
        let a = rng.random_range(0.5..0.95);
        let b = a + rng.random_range(0.05..0.6);
        let dc = doob_crossing(&m, a, b, &t).map_err(err)?;
        let report = verify_supermartingale(&tree, &dc.process, depth).map_err(err)?;
        ensure(report.is_supermartingale(), || format!("case {case}: {} violations", report.violations.len()))?;
        let low = dc.process.min_value();
        ensure(low.get() >= -NONNEG_TOL, || format!("case {case}: minimum {low}"))?;
        let base = dc.process.at(&t).get();
        for (leaf, up) in &dc.upcrossings {
            let gain = dc.process.at(leaf).get() - base;
            let floor = (*up as f64 - 1.0) * (b - a) - a;
            ensure(gain >= floor - GROWTH_TOL, || format!("case {case}: leaf {leaf:?} gain {gain} < {floor}"))?;
            total += up;
        }
    }
    Ok(format!("100 processes, {total} completed upcrossings, growth bound holds"))
}

fn truncation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut dominating = 0usize;
    for case in 0..100 {
        let (tree, k, depth) = random_tree_and_depth(&mut rng);
        let f = random_finitary(&mut rng, k, depth, -10.0, 10.0);
        let root = Situation::root();
        let m = conditional_process(&tree, &f, depth, BUDGET).map_err(err)?;
        let b = m.at(&root).get();
        let mb = truncate_supermartingale(&m, b);
        let report = verify_supermartingale(&tree, &mb, depth).map_err(err)?;
        ensure(report.is_bounded_below_supermartingale(), || format!("case {case}: truncation violates"))?;
        ensure(mb.max_value().get() <= b, || format!("case {case}: not bounded by {b}"))?;
        ensure(mb.at(&root).approx_eq(m.at(&root), BOUND_TOL), || format!("case {case}: root moved"))?;
        if certify_upper_bound(&tree, &mb, &f, &root, depth, 0).map_err(err)?.leaf_floor_ok {
            dominating += 1;
        }
        // Any level at or above sup f keeps dominance and the root value.
        let cap = b.max(f.max_value().get());
        let mc = truncate_supermartingale(&m, cap);
        let cert = certify_upper_bound(&tree, &mc, &f, &root, depth, 0).map_err(err)?;
        ensure(cert.leaf_floor_ok, || format!("case {case}: bounded certificate fails {:?}", cert.first_gap))?;
        ensure(mc.max_value().get() <= cap, || format!("case {case}: not bounded"))?;
        ensure(cert.bound.approx_eq(m.at(&root), BOUND_TOL), || format!("case {case}: bound {}", cert.bound))?;
    }
    Ok(format!(
        "100 gambles: truncation at the root value verifies and keeps the root; \
         bounded certificates match ({dominating} also dominate at the root-value cap)"
    ))
}

fn fatou() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..50 {
        let (tree, k, depth) = random_tree_and_depth(&mut rng);
        let s = random_situation(&mut rng, k, depth - 1);
        let f = random_finitary(&mut rng, k, depth, -10.0, 10.0);
        let g_depth = rng.random_range(1..=depth);
        let g = random_finitary(&mut rng, k, g_depth, -10.0, 10.0);
        let low = f.zip_with(&g, BUDGET, ExtReal::min).map_err(err)?;
        let up = |h: &FinitaryVariable| upper_exp_finitary_global(&tree, h, &s, BUDGET).map(|r| r.value).map_err(err);
        let (ef, eg, el) = (up(&f)?, up(&g)?, up(&low)?);
        ensure(el.le_tol(ef.min(eg), FATOU_TOL), || format!("case {case}: {el} > min({ef}, {eg})"))?;
    }
    Ok("50 cyclic pairs: upper expectation of the pointwise minimum stays below both".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("non-decreasing sequence regression", non_decreasing_regression),
        ("detached sup fixture", detached_sup_fixture),
        ("local axiom batteries", axiom_batteries),
        ("global coherence and certificates", coherence_and_certificates),
        ("hitting brackets and conjugacy", hitting_brackets),
        ("fair coin chain", fair_coin_chain),
        ("doob crossing", doob_crossings),
        ("truncated supermartingales", truncation),
        ("fatou", fatou),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
