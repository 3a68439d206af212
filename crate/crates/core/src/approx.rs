//! Limits of global upper expectations along monotone sequences of
//! finitary variables: hitting probabilities, expected hitting times and
//! lower-cut limits.
//!
//! Every trace value is a one-sided bound on the limit, so an unconverged
//! run still reports a valid bracket.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::globalexp::{
    lower_exp_finitary_global, lower_exp_finite_memory, upper_exp_finitary_global, upper_exp_finite_memory,
};
use crate::tree::{ImpreciseTree, Situation};
use crate::variables::{apply_cut, generate_term_at, CutSide, FinitaryVariable, HitKind, HittingTerm, SequenceSpec, Target};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ApproxOptions {
    /// Convergence and monotonicity tolerance.
    pub tol: f64,
    /// Number of consecutive small increments required for convergence.
    pub k_stable: usize,
    pub max_n: usize,
    /// Estimates beyond this magnitude are flagged as possibly infinite.
    pub ceiling: f64,
    /// Increments at least this large keep a run under suspicion of diverging.
    pub min_increment: f64,
    /// Cap on situations per dense evaluation.
    pub budget: u128,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions { tol: 1e-9, k_stable: 3, max_n: 64, ceiling: 1e6, min_increment: 1e-6, budget: 1_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    fn flip(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

/// Whether terms are evaluated with the upper or the lower expectation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Upper,
    Lower,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxResult {
    pub estimate: ExtReal,
    pub trace: Vec<(usize, ExtReal)>,
    pub direction: Direction,
    pub converged: bool,
    /// First index at which the stopping rule fired.
    pub converged_at: Option<usize>,
    /// The last value and the side of the limit it bounds: for `Up` the
    /// limit is at least the value, for `Down` at most.
    pub bracket: Option<(ExtReal, Direction)>,
    pub diverging: bool,
}

impl ApproxResult {
    pub fn values(&self) -> Vec<ExtReal> {
        self.trace.iter().map(|(_, v)| *v).collect()
    }

    /// `n,value` rows with a header.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("n,value\n");
        for (n, v) in &self.trace {
            writeln!(out, "{n},{v}").expect("writing to a string");
        }
        out
    }
}

fn magnitude(v: ExtReal) -> f64 {
    v.as_finite().map_or(0.0, f64::abs).max(1.0)
}

/// Limit of `E(f_n|s)` for `n = 1, 2, ...` where `E` is the upper global
/// expectation and the terms come from `spec`.
pub fn monotone_limit(
    tree: &ImpreciseTree,
    spec: &SequenceSpec,
    s: &Situation,
    direction: Direction,
    opts: &ApproxOptions,
) -> Result<ApproxResult> {
    monotone_limit_with(tree, spec, s, direction, Sense::Upper, opts)
}

/// [`monotone_limit`] with a choice of upper or lower expectation.
pub fn monotone_limit_with(
    tree: &ImpreciseTree,
    spec: &SequenceSpec,
    s: &Situation,
    direction: Direction,
    sense: Sense,
    opts: &ApproxOptions,
) -> Result<ApproxResult> {
    if opts.max_n == 0 || opts.k_stable == 0 || opts.tol.is_nan() || opts.tol < 0.0 {
        return Err(Error::contract("max_n and k_stable must be positive and tol non-negative"));
    }
    tree.check_situation(s)?;
    let last_n = spec.len().map_or(opts.max_n, |l| l.min(opts.max_n));
    if last_n == 0 {
        return Err(Error::contract("the sequence has no terms"));
    }
    let saturation = structural_saturation(spec);

    let mut trace: Vec<(usize, ExtReal)> = Vec::new();
    let mut converged_at = None;
    let mut diverging = false;
    for n in 1..=last_n {
        let value = evaluate_term(tree, spec, s, n, sense, opts)?;
        if let Some(&(_, prev)) = trace.last() {
            let slack = opts.tol * magnitude(prev);
            let ok = match direction {
                Direction::Up => prev.le_tol(value, slack),
                Direction::Down => value.le_tol(prev, slack),
            };
            if !ok {
                return Err(Error::NonMonotone { n, previous: prev.to_string(), current: value.to_string() });
            }
        }
        trace.push((n, value));

        if saturation.is_some_and(|from| n >= from) || stable(&trace, opts) {
            converged_at = Some(n);
            break;
        }
        let beyond = match direction {
            Direction::Up => value.get() > opts.ceiling,
            Direction::Down => value.get() < -opts.ceiling,
        };
        if beyond {
            diverging = true;
            break;
        }
    }
    if converged_at.is_none() && !diverging {
        diverging = projected_beyond_ceiling(&trace, direction, opts);
    }
    let estimate = trace.last().expect("at least one term").1;
    Ok(ApproxResult {
        estimate,
        converged: converged_at.is_some(),
        converged_at,
        bracket: Some((estimate, direction)),
        diverging,
        trace,
        direction,
    })
}

fn evaluate_term(
    tree: &ImpreciseTree,
    spec: &SequenceSpec,
    s: &Situation,
    n: usize,
    sense: Sense,
    opts: &ApproxOptions,
) -> Result<ExtReal> {
    match spec {
        SequenceSpec::Hitting { kind, target } => {
            let term = HittingTerm { kind: *kind, target: target.clone(), horizon: n, offset: s.len() };
            let r = match sense {
                Sense::Upper => upper_exp_finite_memory(tree, &term, s)?,
                Sense::Lower => lower_exp_finite_memory(tree, &term, s)?,
            };
            Ok(r.value)
        }
        _ => {
            let f = generate_term_at(spec, n, s.len(), opts.budget)?;
            let r = match sense {
                Sense::Upper => upper_exp_finitary_global(tree, &f, s, opts.budget)?,
                Sense::Lower => lower_exp_finitary_global(tree, &f, s, opts.budget)?,
            };
            Ok(r.value)
        }
    }
}

/// Index from which the terms themselves stop changing, when that is
/// known without evaluation.
fn structural_saturation(spec: &SequenceSpec) -> Option<usize> {
    match spec {
        SequenceSpec::Hitting { target, .. } if target.is_everything() => Some(1),
        SequenceSpec::Hitting { .. } => None,
        SequenceSpec::UserList(list) => {
            // Smallest i (1-based) with terms i..=len pointwise equal.
            let last = list.last()?;
            let mut from = list.len();
            while from > 1 && same_variable(&list[from - 2], last) {
                from -= 1;
            }
            // Convergence is declared one step after the tail starts.
            (from < list.len()).then_some(from + 1)
        }
        SequenceSpec::LowerCutFamily { .. } => None,
    }
}

fn same_variable(a: &FinitaryVariable, b: &FinitaryVariable) -> bool {
    let depth = a.depth().max(b.depth());
    match (a.lifted(depth, u128::MAX), b.lifted(depth, u128::MAX)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn stable(trace: &[(usize, ExtReal)], opts: &ApproxOptions) -> bool {
    if trace.len() <= opts.k_stable {
        return false;
    }
    trace[trace.len() - opts.k_stable - 1..].windows(2).all(|w| {
        let (a, b) = (w[0].1, w[1].1);
        a == b || (a.is_finite() && b.is_finite() && (b.get() - a.get()).abs() < opts.tol)
    })
}

/// Flags a run whose last `k_stable` increments are all sizeable and whose
/// geometric tail projection passes the ceiling.
fn projected_beyond_ceiling(trace: &[(usize, ExtReal)], direction: Direction, opts: &ApproxOptions) -> bool {
    if trace.len() <= opts.k_stable {
        return false;
    }
    let signed: Vec<f64> = trace.iter().map(|(_, v)| v.get()).collect();
    if signed.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let sign = if direction == Direction::Up { 1.0 } else { -1.0 };
    let deltas: Vec<f64> = signed.windows(2).map(|w| sign * (w[1] - w[0])).collect();
    let recent = &deltas[deltas.len() - opts.k_stable..];
    if recent.iter().any(|&d| d < opts.min_increment) {
        return false;
    }
    let ratio = recent.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    if ratio >= 1.0 {
        return true;
    }
    let last = sign * signed[signed.len() - 1];
    let tail = recent[recent.len() - 1] * ratio / (1.0 - ratio);
    last + tail > opts.ceiling
}

/// Upper probability of entering `target` at some time after `s`.
pub fn upper_hitting_probability(
    tree: &ImpreciseTree,
    target: &Target,
    s: &Situation,
    opts: &ApproxOptions,
) -> Result<ApproxResult> {
    let spec = SequenceSpec::Hitting { kind: HitKind::Hit, target: target.clone() };
    monotone_limit(tree, &spec, s, Direction::Up, opts)
}

/// Lower probability of entering `target` after `s`, as one minus the
/// upper probability of having avoided it for `n` steps.
pub fn lower_hitting_probability(
    tree: &ImpreciseTree,
    target: &Target,
    s: &Situation,
    opts: &ApproxOptions,
) -> Result<ApproxResult> {
    let spec = SequenceSpec::Hitting { kind: HitKind::Miss, target: target.clone() };
    let miss = monotone_limit(tree, &spec, s, Direction::Down, opts)?;
    Ok(conjugate(miss))
}

fn conjugate(r: ApproxResult) -> ApproxResult {
    let flip = |v: ExtReal| ExtReal::ONE - v;
    ApproxResult {
        estimate: flip(r.estimate),
        trace: r.trace.into_iter().map(|(n, v)| (n, flip(v))).collect(),
        direction: r.direction.flip(),
        converged: r.converged,
        converged_at: r.converged_at,
        bracket: r.bracket.map(|(v, d)| (flip(v), d.flip())),
        diverging: r.diverging,
    }
}

/// Upper expected time until `target` is entered after `s`.
pub fn upper_expected_hitting_time(
    tree: &ImpreciseTree,
    target: &Target,
    s: &Situation,
    opts: &ApproxOptions,
) -> Result<ApproxResult> {
    let spec = SequenceSpec::Hitting { kind: HitKind::TruncatedTime, target: target.clone() };
    monotone_limit(tree, &spec, s, Direction::Up, opts)
}

/// Lower expected time until `target` is entered after `s`.
pub fn lower_expected_hitting_time(
    tree: &ImpreciseTree,
    target: &Target,
    s: &Situation,
    opts: &ApproxOptions,
) -> Result<ApproxResult> {
    let spec = SequenceSpec::Hitting { kind: HitKind::TruncatedTime, target: target.clone() };
    monotone_limit_with(tree, &spec, s, Direction::Up, Sense::Lower, opts)
}

/// Evaluates `Ē_V(f^∨α|s)` along a strictly decreasing `schedule` and
/// compares the trace with the direct value `Ē_V(f|s)`, which is reported
/// as the estimate.
pub fn lower_cut_global_limit(
    tree: &ImpreciseTree,
    f: &FinitaryVariable,
    s: &Situation,
    schedule: &[f64],
    opts: &ApproxOptions,
) -> Result<ApproxResult> {
    if schedule.is_empty() || schedule.iter().any(|c| !c.is_finite()) {
        return Err(Error::contract("cut schedule must be non-empty and finite"));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::contract("cut schedule must be strictly decreasing"));
    }
    let direct = upper_exp_finitary_global(tree, f, s, opts.budget)?.value;
    let mut trace = Vec::with_capacity(schedule.len());
    for (i, &c) in schedule.iter().enumerate() {
        let v = upper_exp_finitary_global(tree, &apply_cut(f, c, CutSide::Lower), s, opts.budget)?.value;
        if let Some(&(_, prev)) = trace.last() {
            if !v.le_tol(prev, opts.tol * magnitude(prev)) {
                return Err(Error::NonMonotone { n: i + 1, previous: ExtReal::to_string(&prev), current: v.to_string() });
            }
        }
        if !direct.le_tol(v, opts.tol * magnitude(v)) {
            return Err(Error::Consistency(format!(
                "cut at {c} gives {v}, below the direct value {direct}"
            )));
        }
        trace.push((i + 1, v));
    }
    let last = trace.last().expect("non-empty schedule").1;
    let converged = last.approx_eq(direct, opts.tol * magnitude(direct));
    Ok(ApproxResult {
        estimate: direct,
        converged,
        converged_at: trace.iter().position(|(_, v)| v.approx_eq(direct, opts.tol * magnitude(direct))).map(|i| i + 1),
        bracket: Some((last, Direction::Down)),
        diverging: direct.is_minus_inf(),
        trace,
        direction: Direction::Down,
    })
}
