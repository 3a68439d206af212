//! Finitary global variables, hitting-event generators, cuts and padding.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::tree::ImpreciseTree;

/// Default cap on the number of table entries a variable may hold.
pub const DEFAULT_TABLE_BUDGET: u128 = 1_000_000;

/// A variable that depends on the first `depth` states only.
///
/// `table` lists the values on `X^depth` in lexicographic order of the
/// label indices, so entry `i` belongs to the base-`|X|` expansion of `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FinitaryVariable {
    num_states: usize,
    depth: usize,
    table: Vec<ExtReal>,
}

fn table_len(k: usize, depth: usize, budget: u128) -> Result<usize> {
    let needed = (k as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::Budget {
            what: format!("a depth-{depth} table over {k} states"),
            needed,
            budget,
        });
    }
    Ok(needed as usize)
}

impl FinitaryVariable {
    pub fn new(num_states: usize, depth: usize, table: Vec<ExtReal>) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::contract("state space is empty"));
        }
        let len = table_len(num_states, depth, u128::MAX)?;
        if table.len() != len {
            return Err(Error::contract(format!(
                "depth-{depth} table over {num_states} states needs {len} entries, got {}",
                table.len()
            )));
        }
        Ok(FinitaryVariable { num_states, depth, table })
    }

    pub fn constant(value: ExtReal, num_states: usize) -> Self {
        FinitaryVariable { num_states, depth: 0, table: vec![value] }
    }

    /// Tabulates `f` on every sequence of length `depth`.
    pub fn from_fn(
        num_states: usize,
        depth: usize,
        budget: u128,
        mut f: impl FnMut(&[usize]) -> ExtReal,
    ) -> Result<Self> {
        let len = table_len(num_states, depth, budget)?;
        let mut labels = vec![0usize; depth];
        let mut table = Vec::with_capacity(len);
        for _ in 0..len {
            table.push(f(&labels));
            // Advance the base-k counter, last digit fastest.
            for slot in labels.iter_mut().rev() {
                *slot += 1;
                if *slot < num_states {
                    break;
                }
                *slot = 0;
            }
        }
        Ok(FinitaryVariable { num_states, depth, table })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn table(&self) -> &[ExtReal] {
        &self.table
    }

    /// The value on the cylinder of `prefix`; only the first `depth` labels matter.
    pub fn value(&self, prefix: &[usize]) -> Result<ExtReal> {
        if prefix.len() < self.depth {
            return Err(Error::contract(format!(
                "a depth-{} variable is not constant on a situation of length {}",
                self.depth,
                prefix.len()
            )));
        }
        if let Some(x) = prefix.iter().find(|&&x| x >= self.num_states) {
            return Err(Error::contract(format!("state index {x} outside the state space")));
        }
        Ok(self.value_unchecked(prefix))
    }

    pub(crate) fn value_unchecked(&self, prefix: &[usize]) -> ExtReal {
        let idx = prefix[..self.depth].iter().fold(0, |acc, &x| acc * self.num_states + x);
        self.table[idx]
    }

    pub fn is_bounded_below(&self) -> bool {
        self.table.iter().all(|v| !v.is_minus_inf())
    }

    pub fn is_bounded_above(&self) -> bool {
        self.table.iter().all(|v| !v.is_plus_inf())
    }

    pub fn is_gamble(&self) -> bool {
        self.table.iter().all(|v| v.is_finite())
    }

    pub fn min_value(&self) -> ExtReal {
        self.table.iter().copied().min().expect("tables are non-empty")
    }

    pub fn max_value(&self) -> ExtReal {
        self.table.iter().copied().max().expect("tables are non-empty")
    }

    pub fn map(&self, f: impl Fn(ExtReal) -> ExtReal) -> Self {
        FinitaryVariable {
            num_states: self.num_states,
            depth: self.depth,
            table: self.table.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn negated(&self) -> Self {
        self.map(|v| -v)
    }

    /// The same variable written as a table of depth `depth >= self.depth()`.
    pub fn lifted(&self, depth: usize, budget: u128) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::contract("cannot lift a variable to a smaller depth"));
        }
        let repeat = table_len(self.num_states, depth - self.depth, budget)?;
        table_len(self.num_states, depth, budget)?;
        let table = self
            .table
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, repeat))
            .collect();
        Ok(FinitaryVariable { num_states: self.num_states, depth, table })
    }

    /// Pointwise combination at the larger of the two depths.
    pub fn zip_with(
        &self,
        other: &FinitaryVariable,
        budget: u128,
        op: impl Fn(ExtReal, ExtReal) -> ExtReal,
    ) -> Result<Self> {
        if self.num_states != other.num_states {
            return Err(Error::contract("variables live on different state spaces"));
        }
        let depth = self.depth.max(other.depth);
        let (a, b) = (self.lifted(depth, budget)?, other.lifted(depth, budget)?);
        let table = a.table.iter().zip(&b.table).map(|(&x, &y)| op(x, y)).collect();
        Ok(FinitaryVariable { num_states: self.num_states, depth, table })
    }

    /// Parses `{"kind":"finitary","depth":D,"table":{"a,b":1.5,...}}`; the
    /// `kind` key is optional here. Every sequence of length `D` needs an entry.
    pub fn from_json_value(value: &Value, states: &[String]) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| Error::parse("$", "expected an object"))?;
        if let Some(extra) = obj.keys().find(|k| !["kind", "depth", "table"].contains(&k.as_str())) {
            return Err(Error::parse(format!("$.{extra}"), "unexpected field"));
        }
        let depth = obj
            .get("depth")
            .ok_or_else(|| Error::parse("$", "missing field `depth`"))?
            .as_u64()
            .ok_or_else(|| Error::parse("$.depth", "expected a non-negative integer"))?
            as usize;
        let raw: BTreeMap<String, ExtReal> = serde_json::from_value(
            obj.get("table").ok_or_else(|| Error::parse("$", "missing field `table`"))?.clone(),
        )
        .map_err(|e| Error::parse("$.table", e.to_string()))?;
        let k = states.len();
        let len = table_len(k, depth, DEFAULT_TABLE_BUDGET)
            .map_err(|e| Error::parse("$.depth", e.to_string()))?;
        let mut table = vec![None; len];
        for (key, v) in &raw {
            let path = format!("$.table.{key}");
            let labels: Vec<&str> = if key.is_empty() { Vec::new() } else { key.split(',').collect() };
            if labels.len() != depth {
                return Err(Error::parse(path, format!("key has {} labels, depth is {depth}", labels.len())));
            }
            let mut idx = 0;
            for l in labels {
                let x = states
                    .iter()
                    .position(|s| s == l)
                    .ok_or_else(|| Error::parse(&path, format!("unknown state label {l:?}")))?;
                idx = idx * k + x;
            }
            table[idx] = Some(*v);
        }
        let table = table
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    let s = crate::tree::Situation::from_level_index(i, depth, k);
                    let key: Vec<&str> = s.0.iter().map(|&x| states[x].as_str()).collect();
                    Error::parse(format!("$.table.{}", key.join(",")), "missing entry")
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FinitaryVariable { num_states: k, depth, table })
    }

    pub fn to_json_value(&self, states: &[String]) -> Value {
        let mut table = Map::new();
        for (i, v) in self.table.iter().enumerate() {
            let s = crate::tree::Situation::from_level_index(i, self.depth, self.num_states);
            let key: Vec<&str> = s.0.iter().map(|&x| states[x].as_str()).collect();
            table.insert(key.join(","), serde_json::to_value(v).expect("serializable"));
        }
        serde_json::json!({ "kind": "finitary", "depth": self.depth, "table": table })
    }
}

/// A non-empty set of states, stored as a membership mask.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Target(Vec<bool>);

impl Target {
    pub fn new(num_states: usize, members: &[usize]) -> Result<Self> {
        let mut mask = vec![false; num_states];
        for &x in members {
            *mask
                .get_mut(x)
                .ok_or_else(|| Error::contract(format!("target state {x} outside the state space")))? = true;
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::contract("target set is empty"));
        }
        Ok(Target(mask))
    }

    pub fn from_labels(labels: &[String], states: &[String]) -> Result<Self> {
        let idx = labels
            .iter()
            .map(|l| {
                states
                    .iter()
                    .position(|s| s == l)
                    .ok_or_else(|| Error::parse("$.target", format!("unknown state label {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Target::new(states.len(), &idx).map_err(|e| match e {
            Error::Contract(m) => Error::parse("$.target", m),
            other => other,
        })
    }

    pub fn contains(&self, x: usize) -> bool {
        self.0[x]
    }

    pub fn is_everything(&self) -> bool {
        self.0.iter().all(|&b| b)
    }

    pub fn num_states(&self) -> usize {
        self.0.len()
    }

    pub fn members(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&x| self.0[x]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HitKind {
    /// 1 if the target was entered within the horizon.
    Hit,
    /// 1 if it was not.
    Miss,
    /// The entry time, or `horizon + 1` if the target was not entered.
    TruncatedTime,
}

/// A sequence of finitary variables indexed by `n = 1, 2, ...`.
#[derive(Clone, Debug)]
pub enum SequenceSpec {
    /// Term `n` is element `n - 1` of the list.
    UserList(Vec<FinitaryVariable>),
    Hitting { kind: HitKind, target: Target },
    /// Term `n` is the lower cut of `f` at `schedule[n - 1]`.
    LowerCutFamily { f: FinitaryVariable, schedule: Vec<f64> },
}

#[allow(clippy::len_without_is_empty)]
impl SequenceSpec {
    pub fn len(&self) -> Option<usize> {
        match self {
            SequenceSpec::UserList(v) => Some(v.len()),
            SequenceSpec::LowerCutFamily { schedule, .. } => Some(schedule.len()),
            SequenceSpec::Hitting { .. } => None,
        }
    }
}

/// Hitting variable `n` for evaluation at a situation of length `offset`:
/// only the `n` states after position `offset` are inspected.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HittingTerm {
    pub kind: HitKind,
    pub target: Target,
    pub horizon: usize,
    pub offset: usize,
}

/// A variable computed by a finite automaton reading the states after a
/// situation, used for compressed evaluation on Markov trees.
pub trait FiniteMemory {
    type Memory: Copy + Eq + std::hash::Hash + Ord;

    /// Number of states read.
    fn horizon(&self) -> usize;
    fn initial(&self) -> Self::Memory;
    /// Update after reading state `x` as the `step`-th state (1-based).
    fn step(&self, memory: Self::Memory, step: usize, x: usize) -> Self::Memory;
    fn terminal(&self, memory: Self::Memory) -> ExtReal;
    /// True if the final value no longer depends on future states.
    fn is_settled(&self, _memory: Self::Memory) -> bool {
        false
    }
}

impl FiniteMemory for HittingTerm {
    /// First entry time into the target, 0 while not yet entered.
    type Memory = u32;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn initial(&self) -> u32 {
        0
    }

    fn step(&self, memory: u32, step: usize, x: usize) -> u32 {
        if memory == 0 && self.target.contains(x) {
            step as u32
        } else {
            memory
        }
    }

    fn terminal(&self, memory: u32) -> ExtReal {
        let hit = memory > 0;
        match self.kind {
            HitKind::Hit => ExtReal::from(if hit { 1.0 } else { 0.0 }),
            HitKind::Miss => ExtReal::from(if hit { 0.0 } else { 1.0 }),
            HitKind::TruncatedTime => {
                ExtReal::from(if hit { memory as f64 } else { self.horizon as f64 + 1.0 })
            }
        }
    }

    fn is_settled(&self, memory: u32) -> bool {
        memory > 0
    }
}

impl HittingTerm {
    /// Value on a path prefix of length at least `offset + horizon`.
    pub fn evaluate(&self, prefix: &[usize]) -> ExtReal {
        let mut m = self.initial();
        for (i, &x) in prefix[self.offset..self.offset + self.horizon].iter().enumerate() {
            m = self.step(m, i + 1, x);
        }
        self.terminal(m)
    }

    /// The dense table of depth `offset + horizon`.
    pub fn to_finitary(&self, budget: u128) -> Result<FinitaryVariable> {
        FinitaryVariable::from_fn(
            self.target.num_states(),
            self.offset + self.horizon,
            budget,
            |labels| self.evaluate(labels),
        )
    }
}

/// Term `n` of `spec`, for unconditional evaluation.
pub fn generate_term(spec: &SequenceSpec, n: usize) -> Result<FinitaryVariable> {
    generate_term_at(spec, n, 0, DEFAULT_TABLE_BUDGET)
}

/// Term `n` of `spec` for evaluation at a situation of length `offset`.
pub fn generate_term_at(spec: &SequenceSpec, n: usize, offset: usize, budget: u128) -> Result<FinitaryVariable> {
    if n == 0 {
        return Err(Error::contract("sequence terms are indexed from 1"));
    }
    match spec {
        SequenceSpec::UserList(list) => list
            .get(n - 1)
            .cloned()
            .ok_or_else(|| Error::contract(format!("user list has {} terms, asked for term {n}", list.len()))),
        SequenceSpec::Hitting { kind, target } => HittingTerm {
            kind: *kind,
            target: target.clone(),
            horizon: n,
            offset,
        }
        .to_finitary(budget),
        SequenceSpec::LowerCutFamily { f, schedule } => {
            let c = schedule
                .get(n - 1)
                .ok_or_else(|| Error::contract(format!("cut schedule has {} levels, asked for {n}", schedule.len())))?;
            Ok(apply_cut(f, *c, CutSide::Lower))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutSide {
    /// `max(f, c)`.
    Lower,
    /// `min(f, c)`.
    Upper,
}

pub fn apply_cut(f: &FinitaryVariable, c: f64, side: CutSide) -> FinitaryVariable {
    let c = ExtReal::from(c);
    match side {
        CutSide::Lower => f.map(|v| v.max(c)),
        CutSide::Upper => f.map(|v| v.min(c)),
    }
}

/// Turns a sequence of finitary variables into one whose term `k` has
/// depth at most `k`, by holding back each input until it becomes
/// measurable and repeating the previous output meanwhile. Term 0 is `c`.
///
/// The output runs until the last input has been emitted.
pub fn pad_to_n_measurable(seq: &[FinitaryVariable], c: ExtReal) -> Vec<FinitaryVariable> {
    let k = seq.first().map_or(1, FinitaryVariable::num_states);
    let mut out = vec![FinitaryVariable::constant(c, k)];
    let mut next = 0;
    let mut n = 1;
    while next < seq.len() {
        if seq[next].depth() <= n {
            out.push(seq[next].clone());
            next += 1;
        } else {
            out.push(out[n - 1].clone());
        }
        n += 1;
    }
    out
}

/// A global variable as named in a document.
#[derive(Clone, Debug)]
pub enum VariableSpec {
    Finitary(FinitaryVariable),
    Hitting { kind: HitKind, target: Target },
}

/// Parses `{"kind":"finitary",...}` or `{"kind":"hit"|"miss"|"hitting_time","target":[...]}`.
pub fn parse_variable_spec(text: &str, tree: &ImpreciseTree) -> Result<VariableSpec> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::parse("$", e.to_string()))?;
    parse_variable_value(&value, tree.states())
}

pub fn parse_variable_value(value: &Value, states: &[String]) -> Result<VariableSpec> {
    let obj = value.as_object().ok_or_else(|| Error::parse("$", "expected an object"))?;
    let kind = obj
        .get("kind")
        .ok_or_else(|| Error::parse("$", "missing field `kind`"))?
        .as_str()
        .ok_or_else(|| Error::parse("$.kind", "expected a string"))?;
    let hit = |kind: HitKind| -> Result<VariableSpec> {
        if let Some(extra) = obj.keys().find(|k| !["kind", "target"].contains(&k.as_str())) {
            return Err(Error::parse(format!("$.{extra}"), "unexpected field"));
        }
        let labels: Vec<String> = serde_json::from_value(
            obj.get("target").ok_or_else(|| Error::parse("$", "missing field `target`"))?.clone(),
        )
        .map_err(|e| Error::parse("$.target", e.to_string()))?;
        Ok(VariableSpec::Hitting { kind, target: Target::from_labels(&labels, states)? })
    };
    match kind {
        "finitary" => Ok(VariableSpec::Finitary(FinitaryVariable::from_json_value(value, states)?)),
        "hit" => hit(HitKind::Hit),
        "miss" => hit(HitKind::Miss),
        "hitting_time" => hit(HitKind::TruncatedTime),
        other => Err(Error::parse(
            "$.kind",
            format!("unknown kind {other:?}, expected finitary, hit, miss or hitting_time"),
        )),
    }
}
