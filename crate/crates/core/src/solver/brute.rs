//! Exhaustive enumeration of memoryless strategy pairs.
//!
//! Every pair `(sigma1, sigma2)` induces a Markov chain over the whole arena
//! whose expected payoff is computed exactly (up to floating point) at every
//! state. The lower value is `max_sigma1 min_sigma2`, the upper value
//! `min_sigma2 max_sigma1`, taken statewise.

use crate::arena::{Arena, Owner};
use crate::exec::Execution;

use super::chain::{absorbing_values, class_payoff, strongly_connected, Graph};
use super::{MemorylessProfile, SolverError};

/// Default cap on `|Sigma1| * |Sigma2|`.
pub const DEFAULT_BUDGET: u128 = 1_000_000;

/// Strategies enumerated per work item.
const CHUNK: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceOptions {
    pub budget: u128,
    pub execution: Execution,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        BruteForceOptions {
            budget: DEFAULT_BUDGET,
            execution: Execution::default(),
        }
    }
}

/// The player states that offer a real choice, per player. A strategy is
/// numbered in mixed radix over these states, earliest state most significant.
#[derive(Debug, Clone)]
pub struct ProfileSpace {
    player1: Vec<usize>,
    player2: Vec<usize>,
    radix: Vec<usize>,
}

impl ProfileSpace {
    pub fn new(arena: &Arena) -> ProfileSpace {
        let choices = |owner| -> Vec<usize> {
            (0..arena.len())
                .filter(|&s| {
                    let st = arena.state(s);
                    st.owner == owner && st.successors.len() > 1
                })
                .collect()
        };
        ProfileSpace {
            player1: choices(Owner::Player1),
            player2: choices(Owner::Player2),
            radix: arena.states().iter().map(|s| s.successors.len()).collect(),
        }
    }

    fn count(&self, states: &[usize]) -> u128 {
        states
            .iter()
            .try_fold(1u128, |acc, &s| acc.checked_mul(self.radix[s] as u128))
            .unwrap_or(u128::MAX)
    }

    pub fn player1_strategies(&self) -> u128 {
        self.count(&self.player1)
    }

    pub fn player2_strategies(&self) -> u128 {
        self.count(&self.player2)
    }

    /// `|Sigma1| * |Sigma2|`, saturating.
    pub fn size(&self) -> u128 {
        self.player1_strategies()
            .saturating_mul(self.player2_strategies())
    }

}

/// Lower and upper values at every arena state, with the optimal strategy
/// numbers needed to rebuild witnesses.
#[derive(Debug, Clone)]
pub struct BruteForceSolution {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Per state, the first Player 1 strategy attaining the lower value.
    pub lower_strategy: Vec<u64>,
    /// Per state, the first Player 2 strategy attaining the upper value.
    pub upper_strategy: Vec<u64>,
    pub space: ProfileSpace,
}

impl BruteForceSolution {
    /// The maximin Player 1 strategy for `start`, paired with the first
    /// Player 2 best response to it at `start`.
    pub fn lower_witness(&self, arena: &Arena, start: usize) -> MemorylessProfile {
        let sigma1 = self.lower_strategy[start];
        let mut eval = ProfileEvaluator::new(arena);
        eval.set(&self.space.player1, sigma1);
        let mut best = (f64::INFINITY, 0);
        for sigma2 in 0..self.space.player2_strategies() as u64 {
            eval.set(&self.space.player2, sigma2);
            let v = eval.values()[start];
            if v < best.0 {
                best = (v, sigma2);
            }
        }
        eval.set(&self.space.player2, best.1);
        eval.profile(arena)
    }

    /// The minimax Player 2 strategy for `start`, paired with the first
    /// Player 1 best response to it at `start`.
    pub fn upper_witness(&self, arena: &Arena, start: usize) -> MemorylessProfile {
        let sigma2 = self.upper_strategy[start];
        let mut eval = ProfileEvaluator::new(arena);
        eval.set(&self.space.player2, sigma2);
        let mut best = (f64::NEG_INFINITY, 0);
        for sigma1 in 0..self.space.player1_strategies() as u64 {
            eval.set(&self.space.player1, sigma1);
            let v = eval.values()[start];
            if v > best.0 {
                best = (v, sigma1);
            }
        }
        eval.set(&self.space.player1, best.1);
        eval.profile(arena)
    }
}

/// Evaluates all strategy pairs and returns statewise lower and upper values.
pub fn brute_force(arena: &Arena, options: BruteForceOptions) -> Result<BruteForceSolution, SolverError> {
    let space = ProfileSpace::new(arena);
    let size = space.size();
    if size > options.budget {
        return Err(SolverError::BudgetExceeded {
            size,
            budget: options.budget,
        });
    }
    let n1 = space.player1_strategies() as u64;
    let n2 = space.player2_strategies() as u64;
    let (lower, lower_strategy) = optimize(
        arena,
        &space,
        Side::Player1,
        n1,
        n2,
        options.execution,
    );
    let (upper, upper_strategy) = optimize(
        arena,
        &space,
        Side::Player2,
        n2,
        n1,
        options.execution,
    );
    Ok(BruteForceSolution {
        lower,
        upper,
        lower_strategy,
        upper_strategy,
        space,
    })
}

/// `(lower, upper, witness)` at a single start state.
pub fn brute_force_values(
    arena: &Arena,
    start: usize,
    options: BruteForceOptions,
) -> Result<(f64, f64, MemorylessProfile), SolverError> {
    if start >= arena.len() {
        return Err(SolverError::NoSuchState(start));
    }
    let solution = brute_force(arena, options)?;
    let witness = solution.lower_witness(arena, start);
    Ok((solution.lower[start], solution.upper[start], witness))
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Player1,
    Player2,
}

/// For `Side::Player1`: `max_outer min_inner` with the maximizing outer
/// strategy per state. For `Side::Player2`: `min_outer max_inner`.
fn optimize(
    arena: &Arena,
    space: &ProfileSpace,
    side: Side,
    n_outer: u64,
    n_inner: u64,
    execution: Execution,
) -> (Vec<f64>, Vec<u64>) {
    let (outer_states, inner_states) = match side {
        Side::Player1 => (&space.player1, &space.player2),
        Side::Player2 => (&space.player2, &space.player1),
    };
    // Strictly better in the outer player's direction.
    let outer_better = move |a: f64, b: f64| match side {
        Side::Player1 => a > b,
        Side::Player2 => a < b,
    };
    let inner_better = move |a: f64, b: f64| outer_better(b, a);
    let worst_outer = match side {
        Side::Player1 => f64::NEG_INFINITY,
        Side::Player2 => f64::INFINITY,
    };
    let n = arena.len();
    let chunks = n_outer.div_ceil(CHUNK);
    let partial = execution.map_range(0, chunks, |c| {
        let mut eval = ProfileEvaluator::new(arena);
        let mut best = vec![worst_outer; n];
        let mut arg = vec![0u64; n];
        let mut response = vec![0.0; n];
        for outer in c * CHUNK..((c + 1) * CHUNK).min(n_outer) {
            eval.set(outer_states, outer);
            response.fill(-worst_outer);
            for inner in 0..n_inner {
                eval.set(inner_states, inner);
                for (r, v) in response.iter_mut().zip(eval.values()) {
                    if inner_better(*v, *r) {
                        *r = *v;
                    }
                }
            }
            for s in 0..n {
                if outer_better(response[s], best[s]) {
                    best[s] = response[s];
                    arg[s] = outer;
                }
            }
        }
        (best, arg)
    });
    let mut best = vec![worst_outer; n];
    let mut arg = vec![0u64; n];
    for (chunk_best, chunk_arg) in partial {
        for s in 0..n {
            if outer_better(chunk_best[s], best[s]) {
                best[s] = chunk_best[s];
                arg[s] = chunk_arg[s];
            }
        }
    }
    (best, arg)
}

/// The arena as a chain whose player edges are rewired per profile.
struct ProfileEvaluator<'a> {
    arena: &'a Arena,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    reward: Vec<Option<f64>>,
    priority: Vec<u32>,
    digits: Vec<(usize, usize)>,
    values: Vec<f64>,
    dirty: bool,
}

impl<'a> ProfileEvaluator<'a> {
    fn new(arena: &'a Arena) -> ProfileEvaluator<'a> {
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        for s in arena.states() {
            match s.owner {
                Owner::Nature => {
                    targets.extend(&s.successors);
                    weights.extend(s.probabilities.iter().map(|p| p.value()));
                }
                _ if s.is_terminal() => {}
                _ => {
                    targets.push(s.successors[0]);
                    weights.push(1.0);
                }
            }
            offsets.push(targets.len());
        }
        ProfileEvaluator {
            arena,
            offsets,
            targets,
            weights,
            reward: arena.states().iter().map(|s| s.reward).collect(),
            priority: arena.states().iter().map(|s| s.priority).collect(),
            digits: Vec::new(),
            values: Vec::new(),
            dirty: true,
        }
    }

    fn set(&mut self, states: &[usize], index: u64) {
        let mut digits = std::mem::take(&mut self.digits);
        let space_radix = |s: usize| self.arena.state(s).successors.len() as u64;
        digits.clear();
        let mut rest = index;
        for &s in states.iter().rev() {
            let r = space_radix(s);
            digits.push((s, (rest % r) as usize));
            rest /= r;
        }
        for &(s, d) in &digits {
            self.targets[self.offsets[s]] = self.arena.state(s).successors[d];
        }
        self.digits = digits;
        self.dirty = true;
    }

    fn values(&mut self) -> &[f64] {
        if self.dirty {
            let g = Graph {
                offsets: &self.offsets,
                targets: &self.targets,
                weights: &self.weights,
                reward: &self.reward,
                priority: &self.priority,
            };
            let sccs = strongly_connected(&self.offsets, &self.targets);
            self.values = absorbing_values(&g, &sccs, |c| class_payoff(&g, c));
            self.dirty = false;
        }
        &self.values
    }

    fn profile(&self, arena: &Arena) -> MemorylessProfile {
        MemorylessProfile {
            choice: arena
                .states()
                .iter()
                .enumerate()
                .map(|(s, st)| st.is_choice().then(|| self.targets[self.offsets[s]]))
                .collect(),
        }
    }
}
