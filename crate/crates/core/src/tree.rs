//! Situations and imprecise probability trees.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::localmodel::LocalModel;

/// Default cap on the number of situations produced by one enumeration.
pub const DEFAULT_SITUATION_BUDGET: u128 = 1_000_000;

/// A finite sequence of state indices. The empty sequence is the initial
/// situation □.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Situation(pub Vec<usize>);

#[allow(clippy::len_without_is_empty)]
impl Situation {
    pub fn root() -> Self {
        Situation(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn child(&self, x: usize) -> Situation {
        let mut v = self.0.clone();
        v.push(x);
        Situation(v)
    }

    /// `self ⊑ other`.
    pub fn precedes(&self, other: &Situation) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Index of this situation among all situations of the same length,
    /// reading labels as base-`k` digits.
    pub fn level_index(&self, k: usize) -> usize {
        self.0.iter().fold(0, |acc, &x| acc * k + x)
    }

    pub fn from_level_index(mut index: usize, len: usize, k: usize) -> Situation {
        let mut v = vec![0; len];
        for slot in v.iter_mut().rev() {
            *slot = index % k;
            index /= k;
        }
        Situation(v)
    }
}

#[derive(Clone, Debug)]
pub enum Assignment {
    /// The model depends on the last state only; `root` is used at □.
    Stationary { root: LocalModel, by_state: Vec<LocalModel> },
    /// Per-situation models with a fallback.
    Explicit { by_situation: HashMap<Situation, LocalModel>, default: LocalModel },
    /// One model everywhere.
    Iid(LocalModel),
}

/// Assigns a local model to every situation over a finite state list.
#[derive(Clone, Debug)]
pub struct ImpreciseTree {
    states: Vec<String>,
    assignment: Assignment,
}

impl ImpreciseTree {
    pub fn new(states: Vec<String>, assignment: Assignment) -> Result<Self> {
        validate_labels(&states, "$.states")?;
        let check = |m: &LocalModel, what: &str| {
            if m.states() != states.as_slice() {
                Err(Error::contract(format!("{what} is over {:?}, tree is over {states:?}", m.states())))
            } else {
                Ok(())
            }
        };
        match &assignment {
            Assignment::Stationary { root, by_state } => {
                check(root, "root model")?;
                if by_state.len() != states.len() {
                    return Err(Error::contract("stationary assignment needs one model per state"));
                }
                for m in by_state {
                    check(m, "state model")?;
                }
            }
            Assignment::Explicit { by_situation, default } => {
                check(default, "default model")?;
                for (s, m) in by_situation {
                    if s.0.iter().any(|&x| x >= states.len()) {
                        return Err(Error::contract("situation label outside the state space"));
                    }
                    check(m, "situation model")?;
                }
            }
            Assignment::Iid(m) => check(m, "model")?,
        }
        Ok(ImpreciseTree { states, assignment })
    }

    pub fn iid(model: LocalModel) -> Self {
        let states = model.states().to_vec();
        ImpreciseTree { states, assignment: Assignment::Iid(model) }
    }

    pub fn stationary(root: LocalModel, by_state: Vec<LocalModel>) -> Result<Self> {
        ImpreciseTree::new(root.states().to_vec(), Assignment::Stationary { root, by_state })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    /// The local model attached to `s`.
    ///
    /// Panics if `s` mentions a state index outside the tree; use
    /// [`ImpreciseTree::try_resolve`] for unchecked input.
    pub fn resolve(&self, s: &[usize]) -> &LocalModel {
        match &self.assignment {
            Assignment::Stationary { root, by_state } => match s.last() {
                None => root,
                Some(&x) => &by_state[x],
            },
            Assignment::Explicit { by_situation, default } => {
                by_situation.get(&Situation(s.to_vec())).unwrap_or(default)
            }
            Assignment::Iid(m) => m,
        }
    }

    pub fn try_resolve(&self, s: &Situation) -> Result<&LocalModel> {
        self.check_situation(s)?;
        Ok(self.resolve(&s.0))
    }

    pub fn check_situation(&self, s: &Situation) -> Result<()> {
        match s.0.iter().find(|&&x| x >= self.states.len()) {
            Some(x) => Err(Error::contract(format!("state index {x} outside the state space"))),
            None => Ok(()),
        }
    }

    /// The models at □ and after each state, when the model at every
    /// other situation depends on its last state only.
    pub fn markov_models(&self) -> Option<(&LocalModel, Vec<&LocalModel>)> {
        match &self.assignment {
            Assignment::Stationary { root, by_state } => Some((root, by_state.iter().collect())),
            Assignment::Iid(m) => Some((m, vec![m; self.states.len()])),
            Assignment::Explicit { by_situation, default } if by_situation.is_empty() => {
                Some((default, vec![default; self.states.len()]))
            }
            Assignment::Explicit { .. } => None,
        }
    }

    pub fn max_vertices(&self) -> usize {
        match &self.assignment {
            Assignment::Stationary { root, by_state } => by_state
                .iter()
                .chain(std::iter::once(root))
                .map(|m| m.vertices().len())
                .max()
                .unwrap_or(1),
            Assignment::Explicit { by_situation, default } => by_situation
                .values()
                .chain(std::iter::once(default))
                .map(|m| m.vertices().len())
                .max()
                .unwrap_or(1),
            Assignment::Iid(m) => m.vertices().len(),
        }
    }

    /// All situations of length at most `depth`, level by level and
    /// lexicographically within a level.
    pub fn enumerate_situations(&self, depth: usize, budget: u128) -> Result<Vec<Situation>> {
        let k = self.states.len();
        let total = count_situations(k, depth);
        if total > budget {
            return Err(Error::Budget {
                what: format!("enumerating situations up to depth {depth}"),
                needed: total,
                budget,
            });
        }
        let mut out = Vec::with_capacity(total as usize);
        for len in 0..=depth {
            for i in 0..k.pow(len as u32) {
                out.push(Situation::from_level_index(i, len, k));
            }
        }
        Ok(out)
    }

    pub fn parse_situation(&self, text: &str) -> Result<Situation> {
        if text.is_empty() {
            return Ok(Situation::root());
        }
        text.split(',')
            .map(|label| {
                self.state_index(label.trim())
                    .ok_or_else(|| Error::parse("situation", format!("unknown state label {label:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Situation)
    }

    pub fn format_situation(&self, s: &Situation) -> String {
        s.0.iter().map(|&x| self.states[x].as_str()).collect::<Vec<_>>().join(",")
    }

    /// Renders a situation for messages: `□` for the root.
    pub fn display_situation(&self, s: &Situation) -> String {
        if s.is_root() {
            "□".to_string()
        } else {
            format!("({})", self.format_situation(s))
        }
    }

    pub fn to_json_value(&self) -> Value {
        let strip = |m: &LocalModel| serde_json::json!({ "vertices": m.vertices() });
        let assignment = match &self.assignment {
            Assignment::Stationary { root, by_state } => {
                let map: Map<String, Value> =
                    self.states.iter().cloned().zip(by_state.iter().map(strip)).collect();
                serde_json::json!({ "kind": "stationary", "root": strip(root), "by_state": map })
            }
            Assignment::Explicit { by_situation, default } => {
                let map: BTreeMap<String, Value> = by_situation
                    .iter()
                    .map(|(s, m)| (self.format_situation(s), strip(m)))
                    .collect();
                serde_json::json!({ "kind": "explicit", "by_situation": map, "default": strip(default) })
            }
            Assignment::Iid(m) => serde_json::json!({ "kind": "iid", "model": strip(m) }),
        };
        serde_json::json!({ "states": self.states, "assignment": assignment })
    }
}

impl fmt::Display for ImpreciseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.assignment {
            Assignment::Stationary { .. } => "stationary",
            Assignment::Explicit { .. } => "explicit",
            Assignment::Iid(_) => "iid",
        };
        write!(f, "{kind} tree over {{{}}}", self.states.join(", "))
    }
}

/// `1 + k + ... + k^depth`, saturating.
pub fn count_situations(k: usize, depth: usize) -> u128 {
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..=depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(k as u128);
    }
    total
}

fn validate_labels(states: &[String], path: &str) -> Result<()> {
    if states.is_empty() {
        return Err(Error::parse(path, "state list is empty"));
    }
    for (i, s) in states.iter().enumerate() {
        if s.is_empty() || s.contains(',') {
            return Err(Error::parse(format!("{path}[{i}]"), "labels must be non-empty and free of commas"));
        }
        if states[..i].contains(s) {
            return Err(Error::parse(format!("{path}[{i}]"), format!("duplicate state label {s:?}")));
        }
    }
    Ok(())
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::parse(path, format!("missing field `{key}`")))
}

/// Parses a tree document:
/// `{"states":[...],"assignment":{"kind":"stationary"|"explicit"|"iid",...}}`.
pub fn parse_tree(text: &str) -> Result<ImpreciseTree> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::parse("$", e.to_string()))?;
    parse_tree_value(&doc)
}

pub fn parse_tree_value(doc: &Value) -> Result<ImpreciseTree> {
    let obj = doc.as_object().ok_or_else(|| Error::parse("$", "expected an object"))?;
    let states: Vec<String> = serde_json::from_value(field(obj, "states", "$")?.clone())
        .map_err(|e| Error::parse("$.states", e.to_string()))?;
    validate_labels(&states, "$.states")?;
    let a = field(obj, "assignment", "$")?
        .as_object()
        .ok_or_else(|| Error::parse("$.assignment", "expected an object"))?;
    let kind = field(a, "kind", "$.assignment")?
        .as_str()
        .ok_or_else(|| Error::parse("$.assignment.kind", "expected a string"))?;
    let model = |key: &str| -> Result<LocalModel> {
        let path = format!("$.assignment.{key}");
        LocalModel::from_json_value(field(a, key, "$.assignment")?, &path, Some(&states))
    };
    let allowed: &[&str] = match kind {
        "stationary" => &["kind", "root", "by_state"],
        "explicit" => &["kind", "by_situation", "default"],
        "iid" => &["kind", "model"],
        other => {
            return Err(Error::parse(
                "$.assignment.kind",
                format!("unknown kind {other:?}, expected stationary, explicit or iid"),
            ))
        }
    };
    if let Some(extra) = a.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::parse(format!("$.assignment.{extra}"), format!("unexpected field for kind {kind:?}")));
    }
    let assignment = match kind {
        "stationary" => {
            let root = model("root")?;
            let map = field(a, "by_state", "$.assignment")?
                .as_object()
                .ok_or_else(|| Error::parse("$.assignment.by_state", "expected an object"))?;
            if let Some(unknown) = map.keys().find(|k| !states.contains(k)) {
                return Err(Error::parse(format!("$.assignment.by_state.{unknown}"), "unknown state label"));
            }
            let by_state = states
                .iter()
                .map(|s| {
                    let path = format!("$.assignment.by_state.{s}");
                    let v = map.get(s).ok_or_else(|| Error::parse(&path, "missing model for state"))?;
                    LocalModel::from_json_value(v, &path, Some(&states))
                })
                .collect::<Result<Vec<_>>>()?;
            Assignment::Stationary { root, by_state }
        }
        "explicit" => {
            let default = model("default")?;
            let mut by_situation = HashMap::new();
            if let Some(v) = a.get("by_situation") {
                let map = v
                    .as_object()
                    .ok_or_else(|| Error::parse("$.assignment.by_situation", "expected an object"))?;
                for (key, v) in map {
                    let path = format!("$.assignment.by_situation.{key}");
                    let s = parse_labels(key, &states).map_err(|m| Error::parse(&path, m))?;
                    let m = LocalModel::from_json_value(v, &path, Some(&states))?;
                    if by_situation.insert(s, m).is_some() {
                        return Err(Error::parse(path, "duplicate situation"));
                    }
                }
            }
            Assignment::Explicit { by_situation, default }
        }
        _ => Assignment::Iid(model("model")?),
    };
    Ok(ImpreciseTree { states, assignment })
}

fn parse_labels(text: &str, states: &[String]) -> std::result::Result<Situation, String> {
    if text.is_empty() {
        return Ok(Situation::root());
    }
    text.split(',')
        .map(|l| states.iter().position(|s| s == l).ok_or_else(|| format!("unknown state label {l:?}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Situation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    const STATIONARY: &str = r#"{
        "states": ["a", "b"],
        "assignment": {
            "kind": "stationary",
            "root": {"vertices": [[0.5, 0.5]]},
            "by_state": {
                "a": {"vertices": [[0.9, 0.1]]},
                "b": {"vertices": [[0.2, 0.8], [0.4, 0.6]]}
            }
        }
    }"#;

    #[test]
    fn stationary_resolution_uses_last_label() {
        let tree = parse_tree(STATIONARY).unwrap();
        assert_eq!(tree.resolve(&[]).vertices(), &[vec![0.5, 0.5]]);
        assert_eq!(tree.resolve(&[0, 1]).vertices().len(), 2);
        assert_eq!(tree.resolve(&[1, 0]).vertices(), &[vec![0.9, 0.1]]);
        assert!(tree.markov_models().is_some());
    }

    #[test]
    fn explicit_falls_back_to_default() {
        let doc = r#"{"states":["a","b"],"assignment":{"kind":"explicit",
            "by_situation":{"a":{"vertices":[[1,0]]}},"default":{"vertices":[[0,1]]}}}"#;
        let tree = parse_tree(doc).unwrap();
        assert_eq!(tree.resolve(&[0]).vertices(), &[vec![1.0, 0.0]]);
        assert_eq!(tree.resolve(&[0, 0]).vertices(), &[vec![0.0, 1.0]]);
        assert_eq!(tree.resolve(&[]).vertices(), &[vec![0.0, 1.0]]);
        assert!(tree.markov_models().is_none());
    }

    #[test]
    fn explicit_requires_default() {
        let doc = r#"{"states":["a","b"],"assignment":{"kind":"explicit","by_situation":{}}}"#;
        let err = parse_tree(doc).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("default"));
    }

    #[test]
    fn parse_errors_carry_paths() {
        let doc = r#"{"states":["a","b"],"assignment":{"kind":"iid","model":{"vertices":[[0.6,0.39]]}}}"#;
        assert_eq!(
            parse_tree(doc).unwrap_err().to_string(),
            "parse error at $.assignment.model.vertices[0]: pmf sums to 0.99"
        );
        let doc = r#"{"states":["a","b"],"assignment":{"kind":"explicit",
            "by_situation":{"a,c":{"vertices":[[1,0]]}},"default":{"vertices":[[0,1]]}}}"#;
        assert!(parse_tree(doc).unwrap_err().to_string().contains("$.assignment.by_situation.a,c"));
        let doc = r#"{"states":["a,b"],"assignment":{"kind":"iid","model":{"vertices":[[1]]}}}"#;
        assert!(parse_tree(doc).is_err());
        let doc = r#"{"states":["a","b"],"assignment":{"kind":"markov"}}"#;
        assert!(parse_tree(doc).is_err());
    }

    #[test]
    fn enumeration_counts_and_order() {
        let m = LocalModel::vacuous(labels(&["0", "1"]));
        let tree = ImpreciseTree::iid(m);
        let one = tree.enumerate_situations(1, DEFAULT_SITUATION_BUDGET).unwrap();
        assert_eq!(one, vec![Situation(vec![]), Situation(vec![0]), Situation(vec![1])]);
        assert_eq!(tree.enumerate_situations(2, DEFAULT_SITUATION_BUDGET).unwrap().len(), 7);
        let err = tree.enumerate_situations(25, DEFAULT_SITUATION_BUDGET).unwrap_err();
        assert!(matches!(err, Error::Budget { budget: 1_000_000, .. }));

        let three = ImpreciseTree::iid(LocalModel::vacuous(labels(&["a", "b", "c"])));
        assert_eq!(three.enumerate_situations(0, 10).unwrap(), vec![Situation::root()]);
    }

    #[test]
    fn situation_text_round_trip() {
        let tree = parse_tree(STATIONARY).unwrap();
        let s = tree.parse_situation("a,b,b").unwrap();
        assert_eq!(s, Situation(vec![0, 1, 1]));
        assert_eq!(tree.format_situation(&s), "a,b,b");
        assert_eq!(tree.parse_situation("").unwrap(), Situation::root());
        assert!(tree.parse_situation("a,z").is_err());
        assert!(tree.try_resolve(&Situation(vec![5])).is_err());
    }

    #[test]
    fn level_index_is_lexicographic() {
        for i in 0..27 {
            let s = Situation::from_level_index(i, 3, 3);
            assert_eq!(s.level_index(3), i);
        }
        assert_eq!(Situation(vec![1, 0]).level_index(2), 2);
    }

    #[test]
    fn json_round_trip_preserves_resolution() {
        let tree = parse_tree(STATIONARY).unwrap();
        let again = parse_tree_value(&tree.to_json_value()).unwrap();
        for s in tree.enumerate_situations(3, 100).unwrap() {
            assert_eq!(tree.resolve(&s.0), again.resolve(&s.0));
        }
    }
}
