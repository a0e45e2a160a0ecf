//! Game values on finite arenas.
//!
//! Two independent routes are provided: [`brute_force`] enumerates every pair
//! of memoryless strategies and evaluates the induced Markov chains exactly,
//! and [`value_iteration`] computes the nested fixpoint of the one-step value
//! functional block by block, highest priority outermost.

mod brute;
mod chain;

use std::collections::VecDeque;

use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::arena::{Arena, Owner};
use crate::plts::Probability;

pub use brute::{
    brute_force, brute_force_values, BruteForceOptions, BruteForceSolution, ProfileSpace,
    DEFAULT_BUDGET,
};
pub use chain::AbsorbingClass;
pub(crate) use chain::{absorbing_class, class_payoff, strongly_connected, Graph};
use chain::{absorbing_values, Scalar};

/// Linear systems up to this many chain states are solved in exact rational
/// arithmetic when every weight is rational.
pub const EXACT_STATE_LIMIT: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("profile has {found} entries, arena has {expected} states")]
    ProfileSize { expected: usize, found: usize },
    #[error("invalid choice at state {state}: {reason}")]
    InvalidChoice { state: usize, reason: String },
    #[error("profile space of {size} exceeds the enumeration budget {budget}")]
    BudgetExceeded { size: u128, budget: u128 },
    #[error("value iteration at priority {priority} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        priority: u32,
        iterations: usize,
        residual: f64,
    },
    #[error("state {0} is out of range")]
    NoSuchState(usize),
    #[error("value vector has {found} entries, arena has {expected} states")]
    VectorSize { expected: usize, found: usize },
}

/// A memoryless strategy pair: the chosen successor at every player state
/// with at least one successor, `None` at terminal and Nature states.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct MemorylessProfile {
    pub choice: Vec<Option<usize>>,
}

impl MemorylessProfile {
    /// Always takes the first successor.
    pub fn first_choices(arena: &Arena) -> MemorylessProfile {
        MemorylessProfile {
            choice: arena
                .states()
                .iter()
                .map(|s| s.is_choice().then(|| s.successors[0]))
                .collect(),
        }
    }

    pub fn validate(&self, arena: &Arena) -> Result<(), SolverError> {
        if self.choice.len() != arena.len() {
            return Err(SolverError::ProfileSize {
                expected: arena.len(),
                found: self.choice.len(),
            });
        }
        for (i, (s, c)) in arena.states().iter().zip(&self.choice).enumerate() {
            let bad = |reason: &str| SolverError::InvalidChoice {
                state: i,
                reason: reason.to_string(),
            };
            match (s.is_choice(), c) {
                (true, Some(t)) if s.successors.contains(t) => {}
                (true, Some(_)) => return Err(bad("successor not in E(s)")),
                (true, None) => return Err(bad("missing choice at a player state")),
                (false, Some(_)) if s.is_terminal() => {
                    return Err(bad("terminal states take no choice"))
                }
                (false, Some(_)) => return Err(bad("Nature states take no choice")),
                (false, None) => {}
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let choices: Vec<(usize, usize)> = self
            .choice
            .iter()
            .enumerate()
            .filter_map(|(s, c)| c.map(|t| (s, t)))
            .collect();
        serde_json::to_string(&choices).expect("profile serializes")
    }

    /// Reads a list of `[state, successor]` pairs; unlisted player states
    /// take their first successor.
    pub fn from_json(text: &str, arena: &Arena) -> Result<MemorylessProfile, SolverError> {
        let pairs: Vec<(usize, usize)> =
            serde_json::from_str(text).map_err(|e| SolverError::InvalidChoice {
                state: 0,
                reason: format!("malformed profile JSON: {e}"),
            })?;
        let mut profile = MemorylessProfile::first_choices(arena);
        for (s, t) in pairs {
            if s >= arena.len() {
                return Err(SolverError::NoSuchState(s));
            }
            profile.choice[s] = Some(t);
        }
        profile.validate(arena)?;
        Ok(profile)
    }
}

/// The finite Markov chain obtained by fixing both players' memoryless
/// strategies, restricted to states reachable from the start.
#[derive(Debug, Clone)]
pub struct InducedChain {
    /// Arena index of each chain state; chain state 0 is the start.
    pub states: Vec<usize>,
    /// Outgoing transitions as `(chain state, probability)`.
    pub rows: Vec<Vec<(usize, Probability)>>,
    pub reward: Vec<Option<f64>>,
    pub priority: Vec<u32>,
}

pub fn induce_chain(
    arena: &Arena,
    profile: &MemorylessProfile,
    start: usize,
) -> Result<InducedChain, SolverError> {
    if start >= arena.len() {
        return Err(SolverError::NoSuchState(start));
    }
    profile.validate(arena)?;
    let mut local = vec![usize::MAX; arena.len()];
    let mut chain = InducedChain {
        states: Vec::new(),
        rows: Vec::new(),
        reward: Vec::new(),
        priority: Vec::new(),
    };
    let mut queue = VecDeque::from([start]);
    local[start] = 0;
    chain.states.push(start);
    while let Some(s) = queue.pop_front() {
        let state = arena.state(s);
        let edges: Vec<(usize, Probability)> = match state.owner {
            Owner::Nature => state
                .successors
                .iter()
                .copied()
                .zip(state.probabilities.iter().cloned())
                .collect(),
            _ => profile.choice[s]
                .map(|t| (t, Probability::one()))
                .into_iter()
                .collect(),
        };
        let mut row = Vec::with_capacity(edges.len());
        for (t, p) in edges {
            if local[t] == usize::MAX {
                local[t] = chain.states.len();
                chain.states.push(t);
                queue.push_back(t);
            }
            row.push((local[t], p));
        }
        chain.rows.push(row);
        chain.reward.push(state.reward);
        chain.priority.push(state.priority);
    }
    Ok(chain)
}

/// CSR arrays of a chain over some scalar type.
pub(crate) struct Csr<T> {
    pub offsets: Vec<usize>,
    pub targets: Vec<usize>,
    pub weights: Vec<T>,
    pub reward: Vec<Option<T>>,
    pub priority: Vec<u32>,
}

impl<T> Csr<T> {
    pub fn graph(&self) -> Graph<'_, T> {
        Graph {
            offsets: &self.offsets,
            targets: &self.targets,
            weights: &self.weights,
            reward: &self.reward,
            priority: &self.priority,
        }
    }
}

impl InducedChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.rows.iter().flatten().all(|(_, p)| p.exact().is_some())
    }

    pub(crate) fn csr<T: Scalar>(&self) -> Csr<T> {
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        for row in &self.rows {
            for (t, p) in row {
                targets.push(*t);
                weights.push(T::from_probability(p));
            }
            offsets.push(targets.len());
        }
        Csr {
            offsets,
            targets,
            weights,
            reward: self.reward.iter().map(|r| r.map(T::from_reward)).collect(),
            priority: self.priority.clone(),
        }
    }

    /// Absorbing class of every chain state that belongs to one.
    pub fn absorbing_classes(&self) -> Vec<Option<AbsorbingClass>> {
        let csr = self.csr::<f64>();
        let g = csr.graph();
        let sccs = strongly_connected(&csr.offsets, &csr.targets);
        let per_component: Vec<Option<AbsorbingClass>> = (0..sccs.members.len())
            .map(|c| absorbing_class(&g, &sccs, c))
            .collect();
        sccs.component.iter().map(|&c| per_component[c]).collect()
    }

    /// Payoff of an absorbing class of this chain.
    pub fn class_payoff(&self, class: AbsorbingClass) -> f64 {
        let csr = self.csr::<f64>();
        class_payoff(&csr.graph(), class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// Exact rationals for rational chains with fewer than
    /// [`EXACT_STATE_LIMIT`] states, floating point otherwise.
    #[default]
    Auto,
    Float,
    Exact,
}

/// Expected payoff of the chain from its start state.
pub fn expected_reward(chain: &InducedChain) -> f64 {
    expected_reward_with(chain, Precision::Auto)
}

pub fn expected_reward_with(chain: &InducedChain, precision: Precision) -> f64 {
    let exact = match precision {
        Precision::Auto => chain.is_exact() && chain.len() < EXACT_STATE_LIMIT,
        Precision::Float => false,
        Precision::Exact => true,
    };
    if exact {
        let v = chain_values::<BigRational>(chain);
        Scalar::to_f64(&v[0])
    } else {
        chain_values::<f64>(chain)[0]
    }
}

/// The exact expected payoff of a chain, as a rational.
pub fn expected_reward_exact(chain: &InducedChain) -> BigRational {
    chain_values::<BigRational>(chain).swap_remove(0)
}

fn chain_values<T: Scalar>(chain: &InducedChain) -> Vec<T> {
    let csr = chain.csr::<T>();
    let g = csr.graph();
    let sccs = strongly_connected(&csr.offsets, &csr.targets);
    absorbing_values(&g, &sccs, |c| class_payoff(&g, c))
}

/// Probability of ending in each absorbing class, from the start state.
pub fn absorption_probabilities(chain: &InducedChain) -> Vec<(AbsorbingClass, f64)> {
    let csr = chain.csr::<f64>();
    let g = csr.graph();
    let sccs = strongly_connected(&csr.offsets, &csr.targets);
    let classes: Vec<AbsorbingClass> = (0..sccs.members.len())
        .filter_map(|c| absorbing_class(&g, &sccs, c))
        .collect();
    classes
        .into_iter()
        .map(|class| {
            let v = absorbing_values(&g, &sccs, |c| if c == class { 1.0 } else { 0.0 });
            (class, v[0])
        })
        .filter(|(_, p)| *p > 0.0)
        .collect()
}

/// One application of the value functional: terminal states get their reward,
/// Player 1 the best successor, Player 2 the worst, Nature the expectation.
pub fn apply_functional(arena: &Arena, v: &[f64], s: usize) -> f64 {
    let state = arena.state(s);
    if let Some(r) = state.reward {
        return r;
    }
    match state.owner {
        Owner::Player1 => state.successors.iter().map(|&t| v[t]).fold(0.0, f64::max),
        Owner::Player2 => state.successors.iter().map(|&t| v[t]).fold(1.0, f64::min),
        Owner::Nature => state
            .successors
            .iter()
            .zip(&state.probabilities)
            .map(|(&t, p)| p.value() * v[t])
            .sum(),
    }
}

/// Sup-norm distance between `v` and its image under the value functional.
pub fn check_functional_fixpoint(arena: &Arena, v: &[f64]) -> Result<f64, SolverError> {
    if v.len() != arena.len() {
        return Err(SolverError::VectorSize {
            expected: arena.len(),
            found: v.len(),
        });
    }
    Ok((0..arena.len())
        .map(|s| (v[s] - apply_functional(arena, v, s)).abs())
        .fold(0.0, f64::max))
}

/// Nested fixpoint of the value functional.
///
/// States are grouped by priority. Blocks are nested from the highest
/// priority (outermost) to the lowest; an odd block is a least fixpoint
/// started at 0, an even block a greatest fixpoint started at 1. Every outer
/// step re-solves all inner blocks from scratch.
pub fn value_iteration(arena: &Arena, tol: f64, max_iter: usize) -> Result<Vec<f64>, SolverError> {
    let priorities: Vec<u32> = arena.distinct_priorities().into_iter().rev().collect();
    let blocks: Vec<Vec<usize>> = priorities
        .iter()
        .map(|&p| (0..arena.len()).filter(|&s| arena.state(s).priority == p).collect())
        .collect();
    let mut solver = Nested {
        arena,
        priorities: &priorities,
        blocks: &blocks,
        tol,
        max_iter,
        values: vec![0.0; arena.len()],
        scratch: Vec::new(),
    };
    if !blocks.is_empty() {
        solver.solve(0)?;
    }
    Ok(solver.values)
}

struct Nested<'a> {
    arena: &'a Arena,
    priorities: &'a [u32],
    blocks: &'a [Vec<usize>],
    tol: f64,
    max_iter: usize,
    values: Vec<f64>,
    scratch: Vec<f64>,
}

impl Nested<'_> {
    fn solve(&mut self, level: usize) -> Result<(), SolverError> {
        let priority = self.priorities[level];
        let start = if priority % 2 == 1 { 0.0 } else { 1.0 };
        for &s in &self.blocks[level] {
            self.values[s] = start;
        }
        let inner = level + 1 < self.blocks.len();
        let mut iterations = 0;
        loop {
            if inner {
                self.solve(level + 1)?;
            }
            let change = self.step(level);
            iterations += 1;
            if change < self.tol {
                if inner {
                    self.solve(level + 1)?;
                }
                return Ok(());
            }
            if iterations >= self.max_iter {
                return Err(SolverError::NotConverged {
                    priority,
                    iterations,
                    residual: change,
                });
            }
        }
    }

    /// Jacobi update of one block; returns the sup-norm change.
    fn step(&mut self, level: usize) -> f64 {
        let block = &self.blocks[level];
        self.scratch.clear();
        self.scratch
            .extend(block.iter().map(|&s| apply_functional(self.arena, &self.values, s)));
        let mut change: f64 = 0.0;
        for (&s, &new) in block.iter().zip(&self.scratch) {
            change = change.max((new - self.values[s]).abs());
            self.values[s] = new;
        }
        change
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::build_arena;
    use crate::denotational::{Valuation, ValueVector};
    use crate::formula::parse;
    use crate::plts::{figure_one, Plts};

    fn fig1(text: &str) -> Arena {
        build_arena(&parse(text).unwrap(), &figure_one(), &Valuation::new()).unwrap()
    }

    /// Profile for `mu X. <a> X` choosing the `index`-th distribution at `<p, <a> X>`.
    fn diamond_profile(arena: &Arena, index: usize) -> MemorylessProfile {
        let mut profile = MemorylessProfile::first_choices(arena);
        let dia = arena.state(arena.start(0)).successors[0];
        profile.choice[dia] = Some(arena.state(dia).successors[index]);
        profile
    }

    #[test]
    fn first_distribution_loops_or_escapes() {
        let arena = fig1("mu X. <a> X");
        let chain = induce_chain(&arena, &diamond_profile(&arena, 0), arena.start(0)).unwrap();
        // <p,F> -> <p,<a>X> -> d1 -> {<p,X> 1/3, <q,X> 2/3}; <q,X> -> <q,<a>X> stuck.
        assert_eq!(chain.len(), 6);
        let nature = chain.rows[2].clone();
        assert_eq!(nature.len(), 2);
        assert_eq!(nature[0].1, Probability::ratio(1, 3));
        assert_eq!(nature[1].1, Probability::ratio(2, 3));
        assert_eq!(expected_reward(&chain), 0.0);
        assert_eq!(expected_reward_exact(&chain), BigRational::from_integer(0.into()));
        let absorption = absorption_probabilities(&chain);
        assert_eq!(absorption.len(), 1);
        assert!(matches!(absorption[0].0, AbsorbingClass::Terminal(_)));
        assert!((absorption[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn second_distribution_gets_stuck_at_q() {
        let arena = fig1("mu X. <a> X");
        let chain = induce_chain(&arena, &diamond_profile(&arena, 1), arena.start(0)).unwrap();
        let last = *chain.states.last().unwrap();
        assert_eq!(arena.describe(last), "<q, <a> X>");
        assert_eq!(arena.state(last).reward, Some(0.0));
        assert_eq!(expected_reward(&chain), 0.0);
    }

    #[test]
    fn immediate_terminal_chain() {
        let m = Plts::new(vec!["p".into()], vec![]).unwrap();
        let rho = Valuation::new().with("X", ValueVector(vec![0.7]));
        let arena = build_arena(&parse("X").unwrap(), &m, &rho).unwrap();
        let chain =
            induce_chain(&arena, &MemorylessProfile::first_choices(&arena), 0).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(expected_reward(&chain), 0.7);
    }

    #[test]
    fn odd_self_loop_pays_zero() {
        let arena = fig1("mu X. X");
        let chain =
            induce_chain(&arena, &MemorylessProfile::first_choices(&arena), arena.start(0)).unwrap();
        assert_eq!(expected_reward(&chain), 0.0);
        let arena = fig1("nu X. X");
        let chain =
            induce_chain(&arena, &MemorylessProfile::first_choices(&arena), arena.start(0)).unwrap();
        assert_eq!(expected_reward(&chain), 1.0);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        let arena = fig1("mu X. <a> X");
        let mut profile = MemorylessProfile::first_choices(&arena);
        let dia = arena.state(arena.start(0)).successors[0];
        profile.choice[dia] = Some(arena.start(1));
        assert!(matches!(
            induce_chain(&arena, &profile, 0),
            Err(SolverError::InvalidChoice { .. })
        ));
        profile.choice[dia] = None;
        assert!(induce_chain(&arena, &profile, 0).is_err());
        assert!(induce_chain(&arena, &MemorylessProfile { choice: vec![] }, 0).is_err());
    }

    #[test]
    fn profile_json_round_trip() {
        let arena = fig1("mu X. <a> X");
        let profile = diamond_profile(&arena, 1);
        assert_eq!(
            MemorylessProfile::from_json(&profile.to_json(), &arena).unwrap(),
            profile
        );
    }

    #[test]
    fn value_iteration_on_terminal_only_arena() {
        let m = Plts::new(vec!["p".into(), "q".into()], vec![]).unwrap();
        let rho = Valuation::new().with("X", ValueVector(vec![0.25, 0.5]));
        let arena = build_arena(&parse("X").unwrap(), &m, &rho).unwrap();
        assert_eq!(value_iteration(&arena, 1e-9, 10).unwrap(), vec![0.25, 0.5]);
    }

    #[test]
    fn value_iteration_on_acyclic_arena_is_exact() {
        let m = figure_one();
        let rho = Valuation::new().with("X", ValueVector(vec![0.3, 0.6]));
        let arena = build_arena(&parse("<a> X | [a] X").unwrap(), &m, &rho).unwrap();
        assert!(!arena.has_cycle());
        // Depth of the arena bounds the number of Jacobi sweeps.
        let v = value_iteration(&arena, 1e-12, 8).unwrap();
        assert_eq!(check_functional_fixpoint(&arena, &v).unwrap(), 0.0);
        assert!((v[arena.start(0)] - 0.6).abs() < 1e-15);
        assert_eq!(v[arena.start(1)], 1.0);
    }

    #[test]
    fn value_iteration_reports_cap() {
        let arena = fig1("nu X. <a> X");
        assert!(matches!(
            value_iteration(&arena, 1e-15, 2),
            Err(SolverError::NotConverged { .. })
        ));
    }

    #[test]
    fn functional_residual() {
        let m = Plts::new(vec!["p".into()], vec![]).unwrap();
        let rho = Valuation::new().with("X", ValueVector(vec![1.0]));
        let arena = build_arena(&parse("X").unwrap(), &m, &rho).unwrap();
        assert_eq!(check_functional_fixpoint(&arena, &[0.0]).unwrap(), 1.0);
        let arena = fig1("nu Y. mu X. <a> X | [a] Y");
        let v = value_iteration(&arena, 1e-10, 100_000).unwrap();
        assert!(check_functional_fixpoint(&arena, &v).unwrap() < 1e-9);
    }
}
