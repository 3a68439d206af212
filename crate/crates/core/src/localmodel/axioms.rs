//! Axiom batteries for abstract local upper expectations.
//!
//! [`check_local_axioms`] runs every property of an upper expectation on a
//! finite space against a batch of local variables and records, per axiom,
//! how many instances held and which did not. Limits (cut continuity,
//! monotone sequences) are evaluated along fixed geometric schedules and
//! read off with [`estimate_limit`].

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::LocalVariable;
use crate::error::{Error, Result};
use crate::extreal::{ext_add, ext_mul, ExtReal};

/// An extended-real functional on local variables over `num_states` states.
pub trait UpperFunctional {
    fn num_states(&self) -> usize;

    fn upper(&self, f: &[ExtReal]) -> ExtReal;

    fn lower(&self, f: &[ExtReal]) -> ExtReal {
        let neg: Vec<ExtReal> = f.iter().map(|&v| -v).collect();
        -self.upper(&neg)
    }
}

/// `f ↦ sup f`, the vacuous upper expectation.
#[derive(Clone, Copy, Debug)]
pub struct SupFunctional {
    pub num_states: usize,
}

impl UpperFunctional for SupFunctional {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn upper(&self, f: &[ExtReal]) -> ExtReal {
        f.iter().copied().max().unwrap_or(ExtReal::MINUS_INF)
    }
}

/// The supremum, except that variables below `+∞` everywhere with some
/// `-∞` entry are sent to `-∞`.
///
/// Satisfies every upper-expectation axiom on bounded-below variables and
/// the extended versions of sub-additivity, homogeneity and monotonicity,
/// but is not continuous with respect to lower cuts: `-∞·1_y` maps to
/// `-∞` while all of its lower cuts map to `0`.
#[derive(Clone, Copy, Debug)]
pub struct DetachedSup {
    pub num_states: usize,
}

impl UpperFunctional for DetachedSup {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn upper(&self, f: &[ExtReal]) -> ExtReal {
        let below_plus_inf = f.iter().all(|v| !v.is_plus_inf());
        if below_plus_inf && f.iter().any(|v| v.is_minus_inf()) {
            ExtReal::MINUS_INF
        } else {
            SupFunctional { num_states: f.len() }.upper(f)
        }
    }
}

/// Properties checked by [`check_local_axioms`].
///
/// `E2Ext`..`E4Ext` are the versions of E2–E4 quantified over all
/// extended real variables rather than bounded-below ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Axiom {
    /// Constants are preserved.
    E1,
    /// Sub-additivity on bounded-below variables.
    E2,
    /// Positive homogeneity on bounded-below variables.
    E3,
    /// Monotonicity on bounded-below variables.
    E4,
    /// Upward continuity for non-negative variables, checked through its
    /// finite-space equivalent E13.
    E5,
    /// Continuity with respect to lower cuts.
    E6,
    /// `inf f <= E(f) <= sup f` for bounded-below `f`.
    E7,
    /// Constant additivity, including `μ = +∞`.
    E8,
    /// Homogeneity for `λ = 0`.
    E9,
    /// `lower(f+g) <= E(f) + lower(g) <= E(f+g)` on gambles.
    E10,
    /// Continuity under uniform convergence.
    E11,
    /// Continuity along non-decreasing bounded-below sequences.
    E12,
    /// `E((+∞)f) = (+∞)E(f)` for non-negative `f`.
    E13,
    /// Continuity with respect to upper cuts.
    E14,
    E2Ext,
    E3Ext,
    E4Ext,
    /// Finite truncations of countable sub-additivity on non-negative families.
    CountableSubadditivity,
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axiom::E2Ext => "E2'".to_string(),
            Axiom::E3Ext => "E3'".to_string(),
            Axiom::E4Ext => "E4'".to_string(),
            Axiom::CountableSubadditivity => "countable-subadditivity".to_string(),
            other => format!("{other:?}"),
        };
        f.write_str(&s)
    }
}

/// Outcome of all instances of one axiom.
#[derive(Clone, Debug, Serialize)]
pub struct AxiomCheck {
    pub axiom: Axiom,
    pub passed: usize,
    pub failed: usize,
    /// Offending inputs, capped at a few per axiom.
    pub failures: Vec<String>,
}

impl AxiomCheck {
    pub fn holds(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
}

const MAX_RECORDED_FAILURES: usize = 5;

impl AxiomReport {
    fn record(&mut self, axiom: Axiom, ok: bool, detail: impl FnOnce() -> String) {
        let idx = match self.checks.iter().position(|c| c.axiom == axiom) {
            Some(i) => i,
            None => {
                self.checks.push(AxiomCheck {
                    axiom,
                    passed: 0,
                    failed: 0,
                    failures: Vec::new(),
                });
                self.checks.len() - 1
            }
        };
        let check = &mut self.checks[idx];
        if ok {
            check.passed += 1;
        } else {
            check.failed += 1;
            if check.failures.len() < MAX_RECORDED_FAILURES {
                check.failures.push(detail());
            }
        }
    }

    pub fn get(&self, axiom: Axiom) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.axiom == axiom)
    }

    /// True when the axiom was exercised at least once and never failed.
    pub fn holds(&self, axiom: Axiom) -> bool {
        self.get(axiom).is_some_and(|c| c.holds() && c.passed > 0)
    }

    pub fn failed_axioms(&self) -> Vec<Axiom> {
        self.checks.iter().filter(|c| !c.holds()).map(|c| c.axiom).collect()
    }

    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(AxiomCheck::holds)
    }

    pub fn merge(&mut self, other: &AxiomReport) {
        for c in &other.checks {
            match self.checks.iter_mut().find(|d| d.axiom == c.axiom) {
                Some(d) => {
                    d.passed += c.passed;
                    d.failed += c.failed;
                    for f in &c.failures {
                        if d.failures.len() < MAX_RECORDED_FAILURES {
                            d.failures.push(f.clone());
                        }
                    }
                }
                None => self.checks.push(c.clone()),
            }
        }
        self.checks.sort_by_key(|c| c.axiom);
    }
}

/// Reads the limit of a monotone trace: the last value if the trace has
/// settled, an infinity if it has run past `±1e6` and is still moving.
pub fn estimate_limit(trace: &[ExtReal], tol: f64) -> ExtReal {
    match trace {
        [] => ExtReal::ZERO,
        [only] => *only,
        [.., prev, last] => {
            if last.approx_eq(*prev, tol * (1.0 + magnitude(*last))) {
                *last
            } else if last.get() > 1e6 && last > prev {
                ExtReal::PLUS_INF
            } else if last.get() < -1e6 && last < prev {
                ExtReal::MINUS_INF
            } else {
                *last
            }
        }
    }
}

fn magnitude(v: ExtReal) -> f64 {
    v.as_finite().map_or(0.0, f64::abs)
}

fn close(a: ExtReal, b: ExtReal, tol: f64) -> bool {
    a.approx_eq(b, tol * (1.0 + magnitude(a).max(magnitude(b))))
}

fn le(a: ExtReal, b: ExtReal, tol: f64) -> bool {
    a.le_tol(b, tol * (1.0 + magnitude(a).max(magnitude(b))))
}

fn show(f: &[ExtReal]) -> String {
    let parts: Vec<String> = f.iter().map(ExtReal::to_string).collect();
    format!("({})", parts.join(", "))
}

fn is_bounded_below(f: &[ExtReal]) -> bool {
    f.iter().all(|v| !v.is_minus_inf())
}

fn is_gamble(f: &[ExtReal]) -> bool {
    f.iter().all(|v| v.is_finite())
}

fn inf(f: &[ExtReal]) -> ExtReal {
    f.iter().copied().min().expect("non-empty")
}

fn sup(f: &[ExtReal]) -> ExtReal {
    f.iter().copied().max().expect("non-empty")
}

fn add(f: &[ExtReal], g: &[ExtReal]) -> Vec<ExtReal> {
    f.iter().zip(g).map(|(&a, &b)| ext_add(a, b)).collect()
}

fn scale(lambda: ExtReal, f: &[ExtReal]) -> Vec<ExtReal> {
    f.iter().map(|&v| ext_mul(lambda, v)).collect()
}

fn shift(f: &[ExtReal], mu: ExtReal) -> Vec<ExtReal> {
    f.iter().map(|&v| ext_add(v, mu)).collect()
}

fn pointwise(f: &[ExtReal], g: &[ExtReal], op: fn(ExtReal, ExtReal) -> ExtReal) -> Vec<ExtReal> {
    f.iter().zip(g).map(|(&a, &b)| op(a, b)).collect()
}

fn lower_cut(f: &[ExtReal], c: f64) -> Vec<ExtReal> {
    f.iter().map(|&v| v.max(ExtReal::from(c))).collect()
}

fn upper_cut(f: &[ExtReal], c: f64) -> Vec<ExtReal> {
    f.iter().map(|&v| v.min(ExtReal::from(c))).collect()
}

/// Cut levels `1, 10, ..., 1e12`.
fn cut_levels() -> impl Iterator<Item = f64> {
    (0..=12).map(|k| 10f64.powi(k))
}

/// Runs every axiom against `functional` on the variables in `batch`.
///
/// Pairs, scalars and perturbations are drawn from a generator seeded with
/// `seed`, so the report is reproducible.
pub fn check_local_axioms(
    functional: &dyn UpperFunctional,
    batch: &[LocalVariable],
    seed: u64,
    tol: f64,
) -> Result<AxiomReport> {
    if batch.is_empty() {
        return Err(Error::contract("axiom batch is empty"));
    }
    let n = functional.num_states();
    if let Some(bad) = batch.iter().find(|f| f.table.len() != n) {
        return Err(Error::contract(format!(
            "batch variable {} has {} entries, functional has {n} states",
            show(&bad.table),
            bad.table.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AxiomReport::default();
    let up = |f: &[ExtReal]| functional.upper(f);
    let lo = |f: &[ExtReal]| functional.lower(f);

    for c in [-3.5, 0.0, 1.0, 7.25, rng.random_range(-100.0..100.0)] {
        let v = up(&vec![ExtReal::from(c); n]);
        report.record(Axiom::E1, v == ExtReal::from(c), || format!("E({c}) = {v}"));
    }

    for var in batch {
        let f = &var.table[..];
        let ef = up(f);
        let bb = is_bounded_below(f);
        let gamble = is_gamble(f);

        // Homogeneity.
        let lambda = ExtReal::from(rng.random_range(0.1..10.0));
        let lhs = up(&scale(lambda, f));
        let rhs = ext_mul(lambda, ef);
        let ok = close(lhs, rhs, tol);
        let detail = || format!("f={}, λ={lambda}: E(λf)={lhs}, λE(f)={rhs}", show(f));
        if bb {
            report.record(Axiom::E3, ok, detail);
        }
        report.record(Axiom::E3Ext, ok, detail);
        if gamble {
            report.record(Axiom::C3, ok, detail);
        }

        // Lower-cut continuity.
        let trace: Vec<ExtReal> = cut_levels().map(|c| up(&lower_cut(f, -c))).collect();
        let lim = estimate_limit(&trace, tol);
        report.record(Axiom::E6, close(ef, lim, tol), || {
            format!("f={}: E(f)={ef}, lim E(f∨c)={lim}", show(f))
        });

        if bb {
            report.record(Axiom::E7, le(inf(f), ef, tol) && le(ef, sup(f), tol), || {
                format!("f={}: E(f)={ef}", show(f))
            });

            for mu in [ExtReal::from(rng.random_range(-20.0..20.0)), ExtReal::PLUS_INF] {
                let lhs = up(&shift(f, mu));
                let rhs = ext_add(ef, mu);
                report.record(Axiom::E8, close(lhs, rhs, tol), || {
                    format!("f={}, μ={mu}: E(f+μ)={lhs}, E(f)+μ={rhs}", show(f))
                });
            }

            let zero = up(&scale(ExtReal::ZERO, f));
            report.record(Axiom::E9, zero == ext_mul(ExtReal::ZERO, ef), || {
                format!("f={}: E(0f)={zero}", show(f))
            });

            // Non-negative translate for the +∞-homogeneity check.
            let low = inf(f);
            let nonneg: Vec<ExtReal> = if low.is_finite() {
                shift(f, -low)
            } else {
                vec![ExtReal::ZERO; n]
            };
            let lhs = up(&scale(ExtReal::PLUS_INF, &nonneg));
            let rhs = ext_mul(ExtReal::PLUS_INF, up(&nonneg));
            let ok = lhs == rhs;
            let detail = || format!("f={}: E((+∞)f)={lhs}, (+∞)E(f)={rhs}", show(&nonneg));
            report.record(Axiom::E13, ok, detail);
            report.record(Axiom::E5, ok, detail);

            // Upper-cut continuity.
            let trace: Vec<ExtReal> = cut_levels().map(|c| up(&upper_cut(f, c))).collect();
            let lim = estimate_limit(&trace, tol);
            report.record(Axiom::E14, close(ef, lim, tol), || {
                format!("f={}: E(f)={ef}, lim E(f∧c)={lim}", show(f))
            });

            // A non-decreasing sequence (f ∧ 10^k) - 2^-k converging to f.
            let seq: Vec<ExtReal> = cut_levels()
                .enumerate()
                .map(|(k, c)| up(&shift(&upper_cut(f, c), ExtReal::from(-(0.5f64).powi(k as i32 + 40)))))
                .collect();
            let monotone = seq.windows(2).all(|w| le(w[0], w[1], tol));
            let lim = estimate_limit(&seq, tol);
            report.record(Axiom::E12, monotone && close(ef, lim, tol), || {
                format!("f={}: E(f)={ef}, limit along sequence={lim}", show(f))
            });
        }

        if gamble {
            let (fi, fs) = (inf(f), sup(f));
            report.record(Axiom::C1, le(ef, fs, tol), || format!("f={}: E(f)={ef}", show(f)));
            let lf = lo(f);
            report.record(
                Axiom::C5,
                le(fi, lf, tol) && le(lf, ef, tol) && le(ef, fs, tol),
                || format!("f={}: lower={lf}, upper={ef}", show(f)),
            );
            let mu = ExtReal::from(rng.random_range(-20.0..20.0));
            let lhs = up(&shift(f, mu));
            report.record(Axiom::C6, close(lhs, ext_add(ef, mu), tol), || {
                format!("f={}, μ={mu}: E(f+μ)={lhs}", show(f))
            });

            // Uniform perturbations of size 2^-k.
            let h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut ok = true;
            let mut last_gap = f64::INFINITY;
            for k in 0..40 {
                let eps = (0.5f64).powi(k);
                let fk: Vec<ExtReal> = f
                    .iter()
                    .zip(&h)
                    .map(|(&v, &hv)| ext_add(v, ExtReal::from(eps * hv)))
                    .collect();
                let sup_gap = h.iter().map(|hv| (eps * hv).abs()).fold(0.0, f64::max);
                let gap = (up(&fk).get() - ef.get()).abs();
                ok &= gap <= sup_gap + tol * (1.0 + ef.get().abs());
                last_gap = gap;
            }
            ok &= last_gap <= tol * (1.0 + ef.get().abs());
            let detail = || format!("f={}: |E(f_k)-E(f)| not controlled by sup|f_k-f|", show(f));
            report.record(Axiom::E11, ok, detail);
            report.record(Axiom::C7, ok, detail);
        }
    }

    // Pairs.
    let pair_count = batch.len().max(2) * 2;
    for _ in 0..pair_count {
        let f = &batch[rng.random_range(0..batch.len())].table[..];
        let g = &batch[rng.random_range(0..batch.len())].table[..];
        let (ef, eg) = (up(f), up(g));
        let both_bb = is_bounded_below(f) && is_bounded_below(g);
        let both_gambles = is_gamble(f) && is_gamble(g);

        let efg = up(&add(f, g));
        let ok = le(efg, ext_add(ef, eg), tol);
        let detail = || format!("f={}, g={}: E(f+g)={efg}, E(f)+E(g)={}", show(f), show(g), ext_add(ef, eg));
        report.record(Axiom::E2Ext, ok, detail);
        if both_bb {
            report.record(Axiom::E2, ok, detail);
        }
        if both_gambles {
            report.record(Axiom::C2, ok, detail);
        }

        // f∧g <= f <= f∨g.
        let join = pointwise(f, g, ExtReal::max);
        let meet = pointwise(f, g, ExtReal::min);
        let (ej, em) = (up(&join), up(&meet));
        let ok = le(ef, ej, tol) && le(em, ef, tol);
        let detail = || format!("f={}, g={}: E(f∧g)={em}, E(f)={ef}, E(f∨g)={ej}", show(f), show(g));
        report.record(Axiom::E4Ext, ok, detail);
        if both_bb {
            report.record(Axiom::E4, ok, detail);
        }
        if both_gambles {
            report.record(Axiom::C4, ok, detail);
            let sum = add(f, g);
            let (l_sum, l_g, u_sum) = (lo(&sum), lo(g), up(&sum));
            let mid = ext_add(ef, l_g);
            report.record(Axiom::E10, le(l_sum, mid, tol) && le(mid, u_sum, tol), || {
                format!("f={}, g={}: {l_sum} <= {mid} <= {u_sum} fails", show(f), show(g))
            });
        }
    }

    // Finite families of non-negative variables.
    for _ in 0..batch.len().max(1) {
        let k = rng.random_range(2..=5);
        let family: Vec<Vec<ExtReal>> = (0..k)
            .map(|_| {
                let f = &batch[rng.random_range(0..batch.len())].table;
                if is_bounded_below(f) {
                    let low = inf(f);
                    if low.is_finite() {
                        return shift(f, -low);
                    }
                }
                f.iter().map(|&v| v.max(ExtReal::ZERO)).collect()
            })
            .collect();
        let total = family.iter().fold(vec![ExtReal::ZERO; n], |acc, f| add(&acc, f));
        let lhs = up(&total);
        let rhs: ExtReal = family.iter().map(|f| up(f)).sum();
        report.record(Axiom::CountableSubadditivity, le(lhs, rhs, tol), || {
            format!("family of {k}: E(Σf)={lhs}, ΣE(f)={rhs}")
        });
    }

    report.checks.sort_by_key(|c| c.axiom);
    Ok(report)
}
