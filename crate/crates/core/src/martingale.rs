//! Processes on the situation tree: supermartingale checks, upper-bound
//! certificates, combination and truncation, and the upcrossing
//! construction that turns oscillation into unbounded capital.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::extreal::{ext_add, ext_mul, ExtReal};
use crate::tree::{count_situations, ImpreciseTree, Situation};
use crate::variables::FinitaryVariable;

/// A process given on every situation of length at most `depth` and
/// constant along each branch below that depth.
#[derive(Clone, Debug, PartialEq)]
pub struct Process {
    num_states: usize,
    depth: usize,
    /// `levels[l][i]` is the value at the `i`-th situation of length `l`.
    levels: Vec<Vec<ExtReal>>,
}

impl Process {
    pub fn from_fn(
        num_states: usize,
        depth: usize,
        budget: u128,
        mut f: impl FnMut(&Situation) -> ExtReal,
    ) -> Result<Self> {
        check_budget(num_states, depth, budget)?;
        let levels = (0..=depth)
            .map(|l| {
                (0..num_states.pow(l as u32))
                    .map(|i| f(&Situation::from_level_index(i, l, num_states)))
                    .collect()
            })
            .collect();
        Ok(Process { num_states, depth, levels })
    }

    pub fn from_levels(num_states: usize, levels: Vec<Vec<ExtReal>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::contract("a process needs at least the root level"));
        }
        for (l, level) in levels.iter().enumerate() {
            if level.len() != num_states.pow(l as u32) {
                return Err(Error::contract(format!(
                    "level {l} has {} values, expected {}",
                    level.len(),
                    num_states.pow(l as u32)
                )));
            }
        }
        Ok(Process { num_states, depth: levels.len() - 1, levels })
    }

    pub fn constant(value: ExtReal, num_states: usize, depth: usize) -> Self {
        Process {
            num_states,
            depth,
            levels: (0..=depth).map(|l| vec![value; num_states.pow(l as u32)]).collect(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn levels(&self) -> &[Vec<ExtReal>] {
        &self.levels
    }

    /// The value at `s`, reading the depth-`depth` ancestor for longer situations.
    pub fn value(&self, s: &[usize]) -> ExtReal {
        let len = s.len().min(self.depth);
        let idx = s[..len].iter().fold(0, |acc, &x| acc * self.num_states + x);
        self.levels[len][idx]
    }

    pub fn at(&self, s: &Situation) -> ExtReal {
        self.value(&s.0)
    }

    pub fn map(&self, f: impl Fn(ExtReal) -> ExtReal) -> Self {
        Process {
            num_states: self.num_states,
            depth: self.depth,
            levels: self.levels.iter().map(|l| l.iter().map(|&v| f(v)).collect()).collect(),
        }
    }

    pub fn min_value(&self) -> ExtReal {
        self.levels.iter().flatten().copied().min().expect("non-empty")
    }

    pub fn max_value(&self) -> ExtReal {
        self.levels.iter().flatten().copied().max().expect("non-empty")
    }

    pub fn is_bounded_below(&self) -> bool {
        !self.min_value().is_minus_inf()
    }

    /// Parses `{"depth":D,"values":{"":1.0,"a":0.9,...}}`; every situation of
    /// length at most `D` needs a value.
    pub fn from_json_value(value: &Value, states: &[String]) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| Error::parse("$", "expected an object"))?;
        let depth = obj
            .get("depth")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::parse("$.depth", "expected a non-negative integer"))? as usize;
        let values = obj
            .get("values")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::parse("$.values", "expected an object"))?;
        let k = states.len();
        check_budget(k, depth, crate::tree::DEFAULT_SITUATION_BUDGET)
            .map_err(|e| Error::parse("$.depth", e.to_string()))?;
        let mut levels: Vec<Vec<Option<ExtReal>>> = (0..=depth).map(|l| vec![None; k.pow(l as u32)]).collect();
        for (key, v) in values {
            let path = format!("$.values.{key}");
            let labels: Vec<&str> = if key.is_empty() { Vec::new() } else { key.split(',').collect() };
            if labels.len() > depth {
                return Err(Error::parse(path, format!("situation is deeper than the declared depth {depth}")));
            }
            let mut idx = 0;
            for l in &labels {
                let x = states
                    .iter()
                    .position(|s| s == l)
                    .ok_or_else(|| Error::parse(&path, format!("unknown state label {l:?}")))?;
                idx = idx * k + x;
            }
            let v: ExtReal = serde_json::from_value(v.clone()).map_err(|e| Error::parse(&path, e.to_string()))?;
            levels[labels.len()][idx] = Some(v);
        }
        let mut out = Vec::with_capacity(depth + 1);
        for (l, level) in levels.into_iter().enumerate() {
            let level = level
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    v.ok_or_else(|| {
                        let s = Situation::from_level_index(i, l, k);
                        let key: Vec<&str> = s.0.iter().map(|&x| states[x].as_str()).collect();
                        Error::parse(format!("$.values.{}", key.join(",")), "missing value")
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(level);
        }
        Process::from_levels(k, out)
    }

    pub fn to_json_value(&self, states: &[String]) -> Value {
        let mut values = Map::new();
        for (l, level) in self.levels.iter().enumerate() {
            for (i, v) in level.iter().enumerate() {
                let s = Situation::from_level_index(i, l, self.num_states);
                let key: Vec<&str> = s.0.iter().map(|&x| states[x].as_str()).collect();
                values.insert(key.join(","), serde_json::to_value(v).expect("serializable"));
            }
        }
        serde_json::json!({ "depth": self.depth, "values": values })
    }
}

fn check_budget(k: usize, depth: usize, budget: u128) -> Result<()> {
    let needed = count_situations(k, depth);
    if needed > budget {
        return Err(Error::Budget { what: format!("a process of depth {depth}"), needed, budget });
    }
    Ok(())
}

/// One situation where the local upper expectation of the next value
/// exceeds the current value.
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub situation: Situation,
    pub value: ExtReal,
    pub local_upper: ExtReal,
}

#[derive(Clone, Debug, Serialize)]
pub struct SupermartingaleReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
    pub bounded_below: bool,
}

impl SupermartingaleReport {
    pub fn is_supermartingale(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn is_bounded_below_supermartingale(&self) -> bool {
        self.violations.is_empty() && self.bounded_below
    }
}

/// Absolute slack for supermartingale and floor comparisons, scaled by
/// the magnitude of the compared value when that exceeds one.
pub const SUPERMARTINGALE_TOL: f64 = 1e-9;

fn slack(v: ExtReal, tol: f64) -> f64 {
    tol * v.as_finite().map_or(1.0, |x| x.abs().max(1.0))
}

/// Checks `Q_s(m(s·)) <= m(s)` at every situation shorter than `depth`.
pub fn verify_supermartingale(tree: &ImpreciseTree, m: &Process, depth: usize) -> Result<SupermartingaleReport> {
    let k = tree.num_states();
    if m.num_states() != k {
        return Err(Error::contract("process and tree have different state spaces"));
    }
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut buf = Vec::with_capacity(depth + 1);
    let mut next = vec![ExtReal::ZERO; k];
    for len in 0..depth {
        for i in 0..k.pow(len as u32) {
            let s = Situation::from_level_index(i, len, k);
            buf.clear();
            buf.extend_from_slice(&s.0);
            let here = m.value(&buf);
            for (x, slot) in next.iter_mut().enumerate() {
                buf.push(x);
                *slot = m.value(&buf);
                buf.pop();
            }
            let local = tree.resolve(&s.0).upper(&next);
            checked += 1;
            if !local.le_tol(here, slack(here, SUPERMARTINGALE_TOL)) {
                violations.push(Violation { situation: s, value: here, local_upper: local });
            }
        }
    }
    Ok(SupermartingaleReport { checked, violations, bounded_below: m.is_bounded_below() })
}

/// A supermartingale together with a finite-depth check that it dominates
/// a finitary variable from a situation on.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCertificate {
    pub situation: Situation,
    pub bound: ExtReal,
    pub check_depth: usize,
    pub window: usize,
    pub leaf_floor_ok: bool,
    /// First leaf whose floor falls below the variable, if any.
    pub first_gap: Option<(Situation, ExtReal, ExtReal)>,
}

/// Certifies `m(s)` as an upper bound on the global upper expectation of
/// `f` given `s`: `m` must be a supermartingale to `depth`, and on every
/// leaf below `s` the minimum of `m` over the last `window + 1` levels
/// must dominate `f`.
pub fn certify_upper_bound(
    tree: &ImpreciseTree,
    m: &Process,
    f: &FinitaryVariable,
    s: &Situation,
    depth: usize,
    window: usize,
) -> Result<BoundCertificate> {
    if depth < f.depth() {
        return Err(Error::contract(format!(
            "check depth {depth} is below the variable depth {}",
            f.depth()
        )));
    }
    if s.len() > depth {
        return Err(Error::contract("situation is deeper than the check depth"));
    }
    tree.check_situation(s)?;
    let report = verify_supermartingale(tree, m, depth)?;
    if let Some(first) = report.violations.first() {
        return Err(Error::NotSupermartingale {
            violations: report.violations.len(),
            first: tree.display_situation(&first.situation),
        });
    }
    let k = tree.num_states();
    let extra = depth - s.len();
    let from = s.len().max(depth.saturating_sub(window));
    let mut first_gap = None;
    let mut path = s.0.clone();
    for i in 0..k.pow(extra as u32) {
        path.truncate(s.len());
        path.extend(Situation::from_level_index(i, extra, k).0);
        let floor = (from..=depth).map(|l| m.value(&path[..l])).min().expect("non-empty window");
        let target = f.value_unchecked(&path);
        if !target.le_tol(floor, slack(target, SUPERMARTINGALE_TOL)) {
            first_gap = Some((Situation(path.clone()), floor, target));
            break;
        }
    }
    Ok(BoundCertificate {
        situation: s.clone(),
        bound: m.at(s),
        check_depth: depth,
        window,
        leaf_floor_ok: first_gap.is_none(),
        first_gap,
    })
}

/// The weighted sum `Σ w_i m_i` of processes sharing a depth and a finite
/// lower bound.
pub fn combine_supermartingales(processes: &[Process], weights: &[f64]) -> Result<Process> {
    let first = processes.first().ok_or_else(|| Error::contract("no processes to combine"))?;
    if processes.len() != weights.len() {
        return Err(Error::contract("one weight per process is required"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::contract("weights must be finite and non-negative"));
    }
    for p in processes {
        if p.num_states != first.num_states || p.depth != first.depth {
            return Err(Error::contract("processes must share state space and depth"));
        }
        if !p.is_bounded_below() {
            return Err(Error::contract("processes must have a common finite lower bound"));
        }
    }
    let levels = (0..=first.depth)
        .map(|l| {
            (0..first.levels[l].len())
                .map(|i| {
                    processes
                        .iter()
                        .zip(weights)
                        .fold(ExtReal::ZERO, |acc, (p, &w)| ext_add(acc, ext_mul(ExtReal::from(w), p.levels[l][i])))
                })
                .collect()
        })
        .collect();
    Ok(Process { num_states: first.num_states, depth: first.depth, levels })
}

/// `min(m, bound)` pointwise.
pub fn truncate_supermartingale(m: &Process, bound: f64) -> Process {
    let b = ExtReal::from(bound);
    m.map(|v| v.min(b))
}

/// Rescales a real bounded-below process to a positive one with value 1 at `t`:
/// `(m - L + 1) / (m(t) - L + 1)` where `L` is the minimum of `m`.
pub fn normalize_for_crossing(m: &Process, t: &Situation) -> Result<Process> {
    let low = m.min_value();
    let high = m.max_value();
    let (Some(low), true) = (low.as_finite(), high.is_finite()) else {
        return Err(Error::contract("normalization needs a real-valued process"));
    };
    let scale = m.at(t).get() - low + 1.0;
    Ok(m.map(|v| ExtReal::from((v.get() - low + 1.0) / scale)))
}

#[derive(Clone, Debug)]
pub struct DoobCrossing {
    pub process: Process,
    /// Completed upcrossings along each leaf at the process depth below `t`.
    pub upcrossings: Vec<(Situation, usize)>,
}

/// Builds the process that copies the increments of `m` while `m` travels
/// from below `a` to above `b`, and stands still otherwise.
///
/// Along each path below `t`, a segment opens at the first situation
/// (possibly `t` itself) where `m < a` and closes at the next situation
/// where `m > b`; each closed segment is one upcrossing. The result equals
/// `m(t)` outside the subtree at `t`.
pub fn doob_crossing(m: &Process, a: f64, b: f64, t: &Situation) -> Result<DoobCrossing> {
    if !(a > 0.0 && a < b) {
        return Err(Error::contract(format!("need 0 < a < b, got a={a}, b={b}")));
    }
    if t.len() > m.depth() {
        return Err(Error::contract("reference situation is deeper than the process"));
    }
    let mt = m.at(t);
    if !mt.approx_eq(ExtReal::ONE, 1e-12) {
        return Err(Error::contract(format!("process must equal 1 at the reference situation, got {mt}")));
    }
    if m.min_value() < ExtReal::ZERO || !m.max_value().is_finite() {
        return Err(Error::contract("process must be real-valued and non-negative"));
    }
    let k = m.num_states();
    let depth = m.depth();
    let (a, b) = (ExtReal::from(a), ExtReal::from(b));

    #[derive(Clone, Copy)]
    struct Node {
        value: ExtReal,
        in_segment: bool,
        crossings: usize,
    }
    let step = |value: ExtReal, here: ExtReal, was_in: bool, crossings: usize| -> Node {
        if was_in && here > b {
            Node { value, in_segment: false, crossings: crossings + 1 }
        } else if !was_in && here < a {
            Node { value, in_segment: true, crossings }
        } else {
            Node { value, in_segment: was_in, crossings }
        }
    };

    let mut levels: Vec<Vec<ExtReal>> = (0..=depth).map(|l| vec![mt; k.pow(l as u32)]).collect();
    let root = step(mt, mt, false, 0);
    let mut frontier = vec![(t.0.clone(), root)];
    let mut upcrossings = Vec::new();
    for len in t.len()..depth {
        let mut next = Vec::with_capacity(frontier.len() * k);
        for (s, node) in &frontier {
            let ms = m.value(s);
            for x in 0..k {
                let mut child = s.clone();
                child.push(x);
                let mc = m.value(&child);
                let value = if node.in_segment { node.value + (mc - ms) } else { node.value };
                let c = step(value, mc, node.in_segment, node.crossings);
                levels[len + 1][Situation(child.clone()).level_index(k)] = value;
                next.push((child, c));
            }
        }
        frontier = next;
    }
    for (s, node) in frontier {
        upcrossings.push((Situation(s), node.crossings));
    }
    // Below t the subtree values were written above; everything else stays m(t).
    Ok(DoobCrossing { process: Process { num_states: k, depth, levels }, upcrossings })
}
