//! Local upper expectations on a finite state space.
//!
//! A [`LocalModel`] is a finitely generated credal set: a non-empty list of
//! probability mass functions (its vertices). Its upper expectation of a
//! local variable is the largest vertex expectation, computed with the
//! extended-real conventions of [`crate::extreal`] so that `0 · ∞ = 0` and
//! `+∞` absorbs `-∞` inside each sum. That single formula is already
//! continuous with respect to both upper and lower cuts, so it is the
//! extension used everywhere for unbounded variables.

mod axioms;

pub use axioms::{
    check_local_axioms, Axiom, AxiomCheck, AxiomReport, DetachedSup, SupFunctional, UpperFunctional,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::extreal::{ext_add, ext_mul, ExtReal};

/// Tolerance on the total mass of each vertex.
pub const PMF_TOL: f64 = 1e-9;

/// A finitely generated credal set over an ordered list of state labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalModel {
    states: Vec<String>,
    vertices: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default)]
    states: Option<Vec<String>>,
    vertices: Vec<Vec<f64>>,
}

impl LocalModel {
    /// Builds a model, checking that every vertex is a pmf over `states`.
    /// Duplicate vertices (equal after rounding to 12 decimals) are dropped.
    pub fn new(states: Vec<String>, vertices: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(states, vertices, "$")
    }

    fn build(states: Vec<String>, vertices: Vec<Vec<f64>>, path: &str) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::parse(format!("{path}.states"), "state space is empty"));
        }
        if vertices.is_empty() {
            return Err(Error::parse(format!("{path}.vertices"), "vertex list is empty"));
        }
        for (i, v) in vertices.iter().enumerate() {
            let vpath = format!("{path}.vertices[{i}]");
            if v.len() != states.len() {
                return Err(Error::parse(
                    vpath,
                    format!("pmf has {} entries but there are {} states", v.len(), states.len()),
                ));
            }
            if let Some(p) = v.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(Error::parse(vpath, format!("pmf has invalid entry {p}")));
            }
            let total: f64 = v.iter().sum();
            if (total - 1.0).abs() > PMF_TOL {
                return Err(Error::parse(vpath, format!("pmf sums to {}", crate::extreal::round_significant(total, 12))));
            }
        }
        let mut unique: Vec<Vec<f64>> = Vec::with_capacity(vertices.len());
        let mut seen: Vec<Vec<i64>> = Vec::with_capacity(vertices.len());
        for v in vertices {
            let key: Vec<i64> = v.iter().map(|p| (p * 1e12).round() as i64).collect();
            if !seen.contains(&key) {
                seen.push(key);
                unique.push(v);
            }
        }
        Ok(LocalModel {
            states,
            vertices: unique,
        })
    }

    /// The vacuous model: every degenerate pmf is a vertex, so the upper
    /// expectation is the maximum.
    pub fn vacuous(states: Vec<String>) -> Self {
        let n = states.len();
        let vertices = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        LocalModel { states, vertices }
    }

    /// A model with a single vertex.
    pub fn precise(states: Vec<String>, pmf: Vec<f64>) -> Result<Self> {
        Self::new(states, vec![pmf])
    }

    /// Parses `{"states":[...],"vertices":[[...],...]}`. When `expected` is
    /// given the `states` key may be omitted, and must match if present.
    pub fn from_json_value(value: &Value, path: &str, expected: Option<&[String]>) -> Result<Self> {
        let raw: RawModel =
            serde_json::from_value(value.clone()).map_err(|e| Error::parse(path, e.to_string()))?;
        let states = match (raw.states, expected) {
            (Some(s), Some(e)) if s != e => {
                return Err(Error::parse(
                    format!("{path}.states"),
                    format!("states {s:?} differ from the enclosing state list {e:?}"),
                ))
            }
            (Some(s), _) => s,
            (None, Some(e)) => e.to_vec(),
            (None, None) => return Err(Error::parse(path, "missing field `states`")),
        };
        Self::build(states, raw.vertices, path)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::parse("$", e.to_string()))?;
        Self::from_json_value(&value, "$", None)
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::json!({ "states": self.states, "vertices": self.vertices })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn is_precise(&self) -> bool {
        self.vertices.len() == 1
    }

    /// A copy of this model with one more vertex.
    pub fn with_vertex(&self, pmf: Vec<f64>) -> Result<Self> {
        let mut vertices = self.vertices.clone();
        vertices.push(pmf);
        Self::new(self.states.clone(), vertices)
    }

    /// Expectation of `f` under vertex `i`, accumulated left to right.
    pub fn vertex_expectation(&self, i: usize, f: &[ExtReal]) -> ExtReal {
        let pmf = &self.vertices[i];
        // Constant on the support: return the value itself, free of rounding.
        let mut support = pmf.iter().zip(f).filter(|(&p, _)| p > 0.0).map(|(_, &v)| v);
        if let Some(first) = support.next() {
            if support.all(|v| v == first) {
                return first;
            }
        }
        pmf.iter()
            .zip(f)
            .fold(ExtReal::ZERO, |acc, (&p, &v)| ext_add(acc, ext_mul(ExtReal::from(p), v)))
    }

    /// Upper expectation of a table with one entry per state.
    ///
    /// Panics if `f` has the wrong length; [`LocalModel::upper_exp`] is the
    /// checked entry point.
    pub fn upper(&self, f: &[ExtReal]) -> ExtReal {
        assert_eq!(f.len(), self.states.len(), "local variable length mismatch");
        (0..self.vertices.len())
            .map(|i| self.vertex_expectation(i, f))
            .max()
            .expect("vertex list is non-empty")
    }

    /// Lower expectation, `-upper(-f)`.
    pub fn lower(&self, f: &[ExtReal]) -> ExtReal {
        let neg: Vec<ExtReal> = f.iter().map(|&v| -v).collect();
        -self.upper(&neg)
    }

    pub fn upper_exp(&self, f: &LocalVariable) -> Result<ExtReal> {
        self.check_len(f)?;
        Ok(self.upper(&f.table))
    }

    pub fn lower_exp(&self, f: &LocalVariable) -> Result<ExtReal> {
        self.check_len(f)?;
        Ok(self.lower(&f.table))
    }

    /// Indices of the vertices attaining the upper expectation within `tol`.
    pub fn maximizing_vertices(&self, f: &[ExtReal], tol: f64) -> Vec<usize> {
        let best = self.upper(f);
        (0..self.vertices.len())
            .filter(|&i| self.vertex_expectation(i, f).approx_eq(best, tol))
            .collect()
    }

    fn check_len(&self, f: &LocalVariable) -> Result<()> {
        if f.table.len() != self.states.len() {
            return Err(Error::contract(format!(
                "local variable has {} entries but the model has {} states",
                f.table.len(),
                self.states.len()
            )));
        }
        Ok(())
    }

    /// Evaluates `upper(f ∧ c)` along an increasing schedule of cut levels.
    ///
    /// `f` must be bounded below. The trace is non-decreasing; `diverging`
    /// is set when some vertex puts positive mass on a `+∞` entry, in which
    /// case the values grow without bound.
    pub fn upper_cut_limit(&self, f: &LocalVariable, schedule: &[f64]) -> Result<CutTrace> {
        self.check_len(f)?;
        check_schedule(schedule, true)?;
        if f.table.iter().any(|v| v.is_minus_inf()) {
            return Err(Error::contract("upper cuts need a variable that is bounded below"));
        }
        let trace: Vec<(f64, ExtReal)> = schedule
            .iter()
            .map(|&c| {
                let cut: Vec<ExtReal> = f.table.iter().map(|&v| v.min(ExtReal::from(c))).collect();
                (c, self.upper(&cut))
            })
            .collect();
        let diverging = self
            .vertices
            .iter()
            .any(|p| p.iter().zip(&f.table).any(|(&m, v)| m > 0.0 && v.is_plus_inf()));
        Ok(CutTrace::from_trace(trace, diverging))
    }

    /// Evaluates `upper(f ∨ c)` along a decreasing schedule of cut levels.
    ///
    /// The trace is non-increasing; `diverging` is set when every vertex
    /// puts positive mass on a `-∞` entry and none on a `+∞` entry, so the
    /// values fall without bound.
    pub fn lower_cut_limit(&self, f: &LocalVariable, schedule: &[f64]) -> Result<CutTrace> {
        self.check_len(f)?;
        check_schedule(schedule, false)?;
        let trace: Vec<(f64, ExtReal)> = schedule
            .iter()
            .map(|&c| {
                let cut: Vec<ExtReal> = f.table.iter().map(|&v| v.max(ExtReal::from(c))).collect();
                (c, self.upper(&cut))
            })
            .collect();
        let diverging = self.vertices.iter().all(|p| {
            let hits = |pred: fn(ExtReal) -> bool| p.iter().zip(&f.table).any(|(&m, &v)| m > 0.0 && pred(v));
            hits(ExtReal::is_minus_inf) && !hits(ExtReal::is_plus_inf)
        });
        Ok(CutTrace::from_trace(trace, diverging))
    }
}

impl UpperFunctional for LocalModel {
    fn num_states(&self) -> usize {
        self.states.len()
    }

    fn upper(&self, f: &[ExtReal]) -> ExtReal {
        LocalModel::upper(self, f)
    }
}

fn check_schedule(schedule: &[f64], increasing: bool) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::contract("cut schedule is empty"));
    }
    if schedule.iter().any(|c| !c.is_finite()) {
        return Err(Error::contract("cut levels must be finite"));
    }
    let ok = schedule
        .windows(2)
        .all(|w| if increasing { w[0] < w[1] } else { w[0] > w[1] });
    if !ok {
        let dir = if increasing { "increasing" } else { "decreasing" };
        return Err(Error::contract(format!("cut schedule must be strictly {dir}")));
    }
    Ok(())
}

/// Values of a cut sequence, one per cut level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutTrace {
    /// Value at the last cut level.
    pub value: ExtReal,
    pub trace: Vec<(f64, ExtReal)>,
    /// The limit is infinite; `value` is only the last finite approximation.
    pub diverging: bool,
}

impl CutTrace {
    fn from_trace(trace: Vec<(f64, ExtReal)>, diverging: bool) -> Self {
        let value = trace.last().expect("schedule is non-empty").1;
        CutTrace {
            value,
            trace,
            diverging,
        }
    }

    pub fn values(&self) -> Vec<ExtReal> {
        self.trace.iter().map(|&(_, v)| v).collect()
    }
}

/// A local variable: one extended real per state.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalVariable {
    pub table: Vec<ExtReal>,
}

impl LocalVariable {
    pub fn new(table: Vec<ExtReal>) -> Self {
        LocalVariable { table }
    }

    pub fn from_f64(values: &[f64]) -> Self {
        LocalVariable {
            table: values.iter().map(|&v| ExtReal::from(v)).collect(),
        }
    }

    pub fn constant(value: ExtReal, num_states: usize) -> Self {
        LocalVariable {
            table: vec![value; num_states],
        }
    }

    /// Parses `{"table":{"label":value,...}}` against a state list.
    pub fn from_json_value(value: &Value, states: &[String]) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            table: BTreeMap<String, ExtReal>,
        }
        let raw: Raw = serde_json::from_value(value.clone()).map_err(|e| Error::parse("$", e.to_string()))?;
        if let Some(unknown) = raw.table.keys().find(|k| !states.contains(k)) {
            return Err(Error::parse(format!("$.table.{unknown}"), "unknown state label"));
        }
        let table = states
            .iter()
            .map(|s| {
                raw.table
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::parse(format!("$.table.{s}"), "missing entry"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LocalVariable { table })
    }

    pub fn is_bounded_below(&self) -> bool {
        !self.table.iter().any(|v| v.is_minus_inf())
    }

    pub fn negated(&self) -> Self {
        LocalVariable {
            table: self.table.iter().map(|&v| -v).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: ExtReal = ExtReal::PLUS_INF;
    const NINF: ExtReal = ExtReal::MINUS_INF;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn two_vertex() -> LocalModel {
        LocalModel::new(labels(&["0", "1"]), vec![vec![0.5, 0.5], vec![0.8, 0.2]]).unwrap()
    }

    fn left_only() -> LocalModel {
        LocalModel::precise(labels(&["0", "1"]), vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn left_only_model_ignores_state_one() {
        let m = left_only();
        for n in [0.0, 1.0, 10.0, 1e6] {
            let f = LocalVariable::from_f64(&[0.0, n]);
            assert_eq!(m.upper_exp(&f).unwrap(), ExtReal::ZERO);
        }
        assert_eq!(m.upper(&[ExtReal::ZERO, INF]), ExtReal::ZERO);
    }

    #[test]
    fn vacuous_is_max_and_min() {
        let m = LocalModel::vacuous(labels(&["a", "b", "c"]));
        let f = LocalVariable::from_f64(&[1.0, 4.0, 2.0]);
        assert_eq!(m.upper_exp(&f).unwrap(), ExtReal::from(4.0));
        assert_eq!(m.lower_exp(&f).unwrap(), ExtReal::from(1.0));
    }

    #[test]
    fn two_vertex_envelope() {
        // Vertex expectations of (0, 10) are 5 and 2.
        let m = two_vertex();
        let f = LocalVariable::from_f64(&[0.0, 10.0]);
        assert_eq!(m.upper_exp(&f).unwrap(), ExtReal::from(5.0));
        assert_eq!(m.lower_exp(&f).unwrap(), ExtReal::from(2.0));
    }

    #[test]
    fn constants_are_preserved() {
        for m in [two_vertex(), left_only(), LocalModel::vacuous(labels(&["0", "1"]))] {
            for c in [-3.0, 0.0, 7.5] {
                let f = LocalVariable::constant(ExtReal::from(c), 2);
                assert_eq!(m.lower_exp(&f).unwrap(), ExtReal::from(c));
                assert_eq!(m.upper_exp(&f).unwrap(), ExtReal::from(c));
            }
        }
    }

    #[test]
    fn length_mismatch_is_a_contract_error() {
        let err = two_vertex().upper_exp(&LocalVariable::from_f64(&[1.0])).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn upper_cuts_reach_the_direct_value() {
        let m = two_vertex();
        let f = LocalVariable::from_f64(&[3.0, -1.0]);
        let t = m.upper_cut_limit(&f, &[0.0, 1.0, 3.0, 10.0]).unwrap();
        assert_eq!(t.trace[2].1, m.upper_exp(&f).unwrap());
        assert_eq!(t.trace[3].1, m.upper_exp(&f).unwrap());
        assert!(!t.diverging);
    }

    #[test]
    fn upper_cuts_with_zero_mass_infinity() {
        let t = left_only()
            .upper_cut_limit(&LocalVariable::new(vec![ExtReal::ZERO, INF]), &[1.0, 10.0, 100.0])
            .unwrap();
        assert_eq!(t.values(), vec![ExtReal::ZERO; 3]);
        assert_eq!(t.value, ExtReal::ZERO);
        assert!(!t.diverging);
    }

    #[test]
    fn upper_cuts_diverge_with_positive_mass_infinity() {
        let m = LocalModel::precise(labels(&["0", "1"]), vec![0.5, 0.5]).unwrap();
        let t = m
            .upper_cut_limit(&LocalVariable::new(vec![ExtReal::ZERO, INF]), &[1.0, 10.0, 100.0])
            .unwrap();
        assert_eq!(t.values(), vec![ExtReal::from(0.5), ExtReal::from(5.0), ExtReal::from(50.0)]);
        assert!(t.diverging);
    }

    #[test]
    fn upper_cuts_reject_minus_infinity() {
        let err = two_vertex()
            .upper_cut_limit(&LocalVariable::new(vec![NINF, ExtReal::ZERO]), &[1.0])
            .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn lower_cuts() {
        let m = LocalModel::precise(labels(&["0", "1"]), vec![0.5, 0.5]).unwrap();
        let t = m
            .lower_cut_limit(&LocalVariable::new(vec![ExtReal::ZERO, NINF]), &[-1.0, -10.0, -100.0])
            .unwrap();
        assert_eq!(t.values(), vec![ExtReal::from(-0.5), ExtReal::from(-5.0), ExtReal::from(-50.0)]);
        assert!(t.diverging);

        let f = LocalVariable::from_f64(&[2.0, 5.0]);
        let t = two_vertex().lower_cut_limit(&f, &[3.0, 1.0, -4.0]).unwrap();
        let direct = two_vertex().upper_exp(&f).unwrap();
        assert_eq!(&t.values()[1..], &[direct, direct]);
        assert!(!t.diverging);
    }

    #[test]
    fn schedules_must_be_strict() {
        let m = two_vertex();
        let f = LocalVariable::from_f64(&[0.0, 1.0]);
        assert!(m.upper_cut_limit(&f, &[]).is_err());
        assert!(m.upper_cut_limit(&f, &[1.0, 1.0]).is_err());
        assert!(m.lower_cut_limit(&f, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn parse_and_dedup() {
        let m = LocalModel::from_json_str(r#"{"states":["0","1"],"vertices":[[1.0,0.0],[0.5,0.5],[1.0,0.0]]}"#)
            .unwrap();
        assert_eq!(m.vertices().len(), 2);
        let err = LocalModel::from_json_str(r#"{"states":["0","1"],"vertices":[[0.6,0.39]]}"#).unwrap_err();
        assert_eq!(err.to_string(), "parse error at $.vertices[0]: pmf sums to 0.99");
        assert!(LocalModel::from_json_str(r#"{"states":["0","1"],"vertices":[]}"#).is_err());
        assert!(LocalModel::from_json_str(r#"{"states":["0","1"],"vertices":[[1.5,-0.5]]}"#).is_err());
    }

    #[test]
    fn local_variable_json() {
        let states = labels(&["0", "1"]);
        let v: Value = serde_json::from_str(r#"{"table":{"0":0,"1":"inf"}}"#).unwrap();
        let f = LocalVariable::from_json_value(&v, &states).unwrap();
        assert_eq!(f.table, vec![ExtReal::ZERO, INF]);
        let v: Value = serde_json::from_str(r#"{"table":{"0":0}}"#).unwrap();
        assert!(LocalVariable::from_json_value(&v, &states).is_err());
    }

    #[test]
    fn summation_order_does_not_matter() {
        // Permuting states (and vertices alongside) leaves values unchanged,
        // including for tables mixing both infinities.
        let m = LocalModel::new(
            labels(&["a", "b", "c"]),
            vec![vec![0.2, 0.3, 0.5], vec![0.0, 0.6, 0.4]],
        )
        .unwrap();
        let tables = [
            vec![ExtReal::from(1.0), INF, NINF],
            vec![NINF, ExtReal::from(2.0), ExtReal::from(-1.0)],
            vec![INF, NINF, ExtReal::ZERO],
        ];
        let perms = [[0, 1, 2], [2, 1, 0], [1, 2, 0], [1, 0, 2]];
        for f in &tables {
            let base = m.upper(f);
            for perm in &perms {
                let pm = LocalModel::new(
                    perm.iter().map(|&i| m.states()[i].clone()).collect(),
                    m.vertices().iter().map(|v| perm.iter().map(|&i| v[i]).collect()).collect(),
                )
                .unwrap();
                let pf: Vec<ExtReal> = perm.iter().map(|&i| f[i]).collect();
                assert_eq!(pm.upper(&pf), base);
            }
        }
    }

    #[test]
    fn argmax_is_scale_invariant() {
        let m = LocalModel::new(
            labels(&["a", "b", "c"]),
            vec![vec![0.2, 0.3, 0.5], vec![0.0, 0.6, 0.4], vec![0.5, 0.5, 0.0]],
        )
        .unwrap();
        let f: Vec<ExtReal> = [1.0, -2.0, 3.0].iter().map(|&v| ExtReal::from(v)).collect();
        let base = m.maximizing_vertices(&f, 1e-12);
        for lambda in [0.5, 2.0, 17.0] {
            let scaled: Vec<ExtReal> = f.iter().map(|&v| ext_mul(ExtReal::from(lambda), v)).collect();
            assert_eq!(m.maximizing_vertices(&scaled, 1e-12), base);
        }
    }
}
