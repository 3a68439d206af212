//! Global upper expectations of finitary variables by backward recursion.
//!
//! For a variable of depth `n`, the value at a situation `t` with
//! `|t| < n` is the local upper expectation at `t` of the values at its
//! children; at depth `n` it is the variable itself. The recursion runs
//! level by level from the leaves.
//!
//! Variables produced by a finite automaton (the hitting specs) are also
//! evaluated in compressed form: situations that share a local model and an
//! automaton state are merged, which keeps long horizons tractable.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::localmodel::LocalModel;
use crate::martingale::Process;
use crate::tree::{count_situations, Assignment, ImpreciseTree, Situation};
use crate::variables::{FiniteMemory, FinitaryVariable};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalResult {
    pub value: ExtReal,
    /// Number of (possibly merged) situations evaluated.
    pub visited: u128,
    /// Number of levels between the situation and the leaves.
    pub memo_depth: usize,
}

/// `Ē_V(f|s)` for finitary `f`.
pub fn upper_exp_finitary_global(
    tree: &ImpreciseTree,
    f: &FinitaryVariable,
    s: &Situation,
    budget: u128,
) -> Result<EvalResult> {
    check_inputs(tree, f, s)?;
    if s.len() >= f.depth() {
        return Ok(EvalResult { value: f.value_unchecked(&s.0), visited: 1, memo_depth: 0 });
    }
    let k = tree.num_states();
    let m = f.depth() - s.len();
    let visited = count_situations(k, m);
    if visited > budget {
        return Err(Error::Budget { what: format!("evaluating {m} levels below the situation"), needed: visited, budget });
    }
    let width = k.pow(m as u32);
    let start = s.level_index(k) * width;
    let mut values = f.table()[start..start + width].to_vec();
    let mut path = s.0.clone();
    for level in (0..m).rev() {
        values = (0..k.pow(level as u32))
            .map(|j| {
                path.truncate(s.len());
                path.extend(Situation::from_level_index(j, level, k).0);
                tree.resolve(&path).upper(&values[j * k..(j + 1) * k])
            })
            .collect();
    }
    Ok(EvalResult { value: values[0], visited, memo_depth: m })
}

/// `-Ē_V(-f|s)`.
pub fn lower_exp_finitary_global(
    tree: &ImpreciseTree,
    f: &FinitaryVariable,
    s: &Situation,
    budget: u128,
) -> Result<EvalResult> {
    let r = upper_exp_finitary_global(tree, &f.negated(), s, budget)?;
    Ok(EvalResult { value: -r.value, ..r })
}

fn check_inputs(tree: &ImpreciseTree, f: &FinitaryVariable, s: &Situation) -> Result<()> {
    if f.num_states() != tree.num_states() {
        return Err(Error::contract(format!(
            "variable is over {} states, tree over {}",
            f.num_states(),
            tree.num_states()
        )));
    }
    tree.check_situation(s)
}

/// The process `s ↦ Ē_V(f|s)` on all situations up to `max_depth`.
/// Below the depth of `f` it is constant along each branch.
pub fn conditional_process(
    tree: &ImpreciseTree,
    f: &FinitaryVariable,
    max_depth: usize,
    budget: u128,
) -> Result<Process> {
    check_inputs(tree, f, &Situation::root())?;
    let k = tree.num_states();
    let full = f.depth().max(max_depth);
    let needed = count_situations(k, full);
    if needed > budget {
        return Err(Error::Budget { what: format!("a conditional process of depth {full}"), needed, budget });
    }
    let mut levels: Vec<Vec<ExtReal>> = vec![Vec::new(); full + 1];
    levels[f.depth()] = f.table().to_vec();
    for level in (0..f.depth()).rev() {
        let below = &levels[level + 1];
        let here: Vec<ExtReal> = (0..k.pow(level as u32))
            .map(|j| {
                let s = Situation::from_level_index(j, level, k);
                tree.resolve(&s.0).upper(&below[j * k..(j + 1) * k])
            })
            .collect();
        levels[level] = here;
    }
    for level in f.depth() + 1..=full {
        levels[level] = levels[level - 1].iter().flat_map(|&v| std::iter::repeat_n(v, k)).collect();
    }
    levels.truncate(max_depth + 1);
    Process::from_levels(k, levels)
}

/// Which local model applies after a merged history.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Context {
    /// The full situation, kept while per-situation models may still apply.
    Full(Vec<usize>),
    /// Only the last state matters.
    Last(usize),
    /// The variable's value is already determined.
    Settled,
}

/// Length of the longest situation with its own model; beyond it the
/// model depends on the last state only.
fn irregular_depth(tree: &ImpreciseTree) -> usize {
    match tree.assignment() {
        Assignment::Explicit { by_situation, .. } => by_situation.keys().map(Situation::len).max().unwrap_or(0),
        _ => 0,
    }
}

fn model_for<'t>(tree: &'t ImpreciseTree, ctx: &Context) -> &'t LocalModel {
    match ctx {
        Context::Full(s) => tree.resolve(s),
        Context::Last(x) => match tree.assignment() {
            Assignment::Stationary { by_state, .. } => &by_state[*x],
            Assignment::Explicit { default, .. } => default,
            Assignment::Iid(m) => m,
        },
        Context::Settled => unreachable!("settled histories are not expanded"),
    }
}

/// Upper expectation at `s` of a finite-memory variable that reads the
/// `horizon()` states after `s`.
///
/// Histories are merged when they agree on the automaton state and on the
/// information the tree uses to pick the next local model, so the work is
/// polynomial in the horizon for stationary and iid trees.
pub fn upper_exp_finite_memory<V: FiniteMemory>(tree: &ImpreciseTree, var: &V, s: &Situation) -> Result<EvalResult> {
    tree.check_situation(s)?;
    let k = tree.num_states();
    let horizon = var.horizon();
    let irregular = irregular_depth(tree);
    let context = |hist: &[usize]| -> Context {
        if hist.len() <= irregular {
            Context::Full(hist.to_vec())
        } else {
            Context::Last(*hist.last().expect("non-empty beyond the irregular depth"))
        }
    };

    type Key<M> = (Context, M);
    // Forward pass: distinct merged histories per level with child links.
    let mut keys: Vec<Vec<Key<V::Memory>>> = vec![vec![(context(&s.0), var.initial())]];
    let mut children: Vec<Vec<usize>> = Vec::with_capacity(horizon);
    for step in 1..=horizon {
        let mut index: HashMap<Key<V::Memory>, usize> = HashMap::new();
        let mut next: Vec<Key<V::Memory>> = Vec::new();
        let mut links = Vec::with_capacity(keys[step - 1].len() * k);
        for (ctx, mem) in &keys[step - 1] {
            if *ctx == Context::Settled {
                continue;
            }
            for x in 0..k {
                let mem2 = var.step(*mem, step, x);
                let ctx2 = if var.is_settled(mem2) {
                    Context::Settled
                } else {
                    match ctx {
                        Context::Full(h) => {
                            let mut h = h.clone();
                            h.push(x);
                            context(&h)
                        }
                        _ => Context::Last(x),
                    }
                };
                let key = (ctx2, mem2);
                let id = *index.entry(key.clone()).or_insert_with(|| {
                    next.push(key);
                    next.len() - 1
                });
                links.push(id);
            }
        }
        keys.push(next);
        children.push(links);
    }

    // Backward pass.
    let mut values: Vec<ExtReal> = keys[horizon].iter().map(|(_, m)| var.terminal(*m)).collect();
    let mut buf = vec![ExtReal::ZERO; k];
    for step in (0..horizon).rev() {
        let links = &children[step];
        let mut cursor = 0;
        values = keys[step]
            .iter()
            .map(|(ctx, mem)| {
                if *ctx == Context::Settled {
                    return var.terminal(*mem);
                }
                for (x, slot) in buf.iter_mut().enumerate() {
                    *slot = values[links[cursor + x]];
                }
                cursor += k;
                model_for(tree, ctx).upper(&buf)
            })
            .collect();
    }
    let visited = keys.iter().map(|l| l.len() as u128).sum();
    Ok(EvalResult { value: values[0], visited, memo_depth: horizon })
}

/// A finite-memory variable with its terminal values negated.
pub struct Negated<'a, V>(pub &'a V);

impl<V: FiniteMemory> FiniteMemory for Negated<'_, V> {
    type Memory = V::Memory;

    fn horizon(&self) -> usize {
        self.0.horizon()
    }

    fn initial(&self) -> Self::Memory {
        self.0.initial()
    }

    fn step(&self, memory: Self::Memory, step: usize, x: usize) -> Self::Memory {
        self.0.step(memory, step, x)
    }

    fn terminal(&self, memory: Self::Memory) -> ExtReal {
        -self.0.terminal(memory)
    }

    fn is_settled(&self, memory: Self::Memory) -> bool {
        self.0.is_settled(memory)
    }
}

pub fn lower_exp_finite_memory<V: FiniteMemory>(tree: &ImpreciseTree, var: &V, s: &Situation) -> Result<EvalResult> {
    let r = upper_exp_finite_memory(tree, &Negated(var), s)?;
    Ok(EvalResult { value: -r.value, ..r })
}
