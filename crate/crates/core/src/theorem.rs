//! Checking that the fixpoint semantics and the game semantics agree on a
//! concrete (formula, model, valuation) triple.

use serde::Serialize;
use thiserror::Error;

use crate::arena::{build_arena, Arena, ArenaError};
use crate::denotational::{EvalError, EvalStats, Evaluator, Valuation, ValueVector};
use crate::exec::Execution;
use crate::formula::Formula;
use crate::plts::Plts;
use crate::random::{random_instance, Instance, InstanceBounds};
use crate::solver::{
    brute_force, check_functional_fixpoint, value_iteration, BruteForceOptions,
    BruteForceSolution, ProfileSpace, SolverError, DEFAULT_BUDGET,
};

/// Largest tolerated disagreement between the two semantics.
pub const GAP_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Oracle,
    Iteration,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub solver: SolverChoice,
    pub budget: u128,
    pub execution: Execution,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tol: crate::denotational::DEFAULT_TOLERANCE,
            max_iter: crate::denotational::DEFAULT_MAX_ITER,
            solver: SolverChoice::Both,
            budget: DEFAULT_BUDGET,
            execution: Execution::default(),
        }
    }
}

/// Maximum statewise differences; `None` when a side was not computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Gaps {
    /// |denotational - lower| over model states.
    pub denotational_lower: Option<f64>,
    /// |lower - upper| over model states.
    pub lower_upper: Option<f64>,
    /// |denotational - iteration| over model states.
    pub denotational_iteration: Option<f64>,
    /// |iteration - lower| over all arena states.
    pub iteration_oracle: Option<f64>,
}

impl Gaps {
    pub fn max(&self) -> f64 {
        [
            self.denotational_lower,
            self.lower_upper,
            self.denotational_iteration,
            self.iteration_oracle,
        ]
        .into_iter()
        .flatten()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub denotational: ValueVector,
    pub eval_stats: EvalStats,
    pub arena: Arena,
    pub brute: Option<BruteForceSolution>,
    pub iteration: Option<Vec<f64>>,
    pub gaps: Gaps,
    /// ||v - F(v)|| for the brute-force lower and upper vectors.
    pub oracle_residual: Option<f64>,
    /// ||v - F(v)|| for the value-iteration vector.
    pub iteration_residual: Option<f64>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.gaps.max() <= GAP_THRESHOLD
    }

    /// Lower value at each model state.
    pub fn lower(&self) -> Option<Vec<f64>> {
        let b = self.brute.as_ref()?;
        Some(self.arena.starts().iter().map(|&s| b.lower[s]).collect())
    }

    pub fn upper(&self) -> Option<Vec<f64>> {
        let b = self.brute.as_ref()?;
        Some(self.arena.starts().iter().map(|&s| b.upper[s]).collect())
    }

    pub fn iteration_at_starts(&self) -> Option<Vec<f64>> {
        let v = self.iteration.as_ref()?;
        Some(self.arena.starts().iter().map(|&s| v[s]).collect())
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Evaluates `f` both ways and records every gap. `f` must be in normal form.
pub fn check(f: &Formula, m: &Plts, rho: &Valuation, opts: &CheckOptions) -> Result<CheckOutcome, CheckError> {
    let (denotational, eval_stats) =
        Evaluator::new(opts.tol, opts.max_iter).evaluate_with_stats(f, m, rho)?;
    let arena = build_arena(f, m, rho)?;
    let brute = match opts.solver {
        SolverChoice::Iteration => None,
        _ => Some(brute_force(
            &arena,
            BruteForceOptions {
                budget: opts.budget,
                execution: opts.execution,
            },
        )?),
    };
    let iteration = match opts.solver {
        SolverChoice::Oracle => None,
        _ => Some(value_iteration(&arena, opts.tol, opts.max_iter)?),
    };
    let starts = arena.starts();
    let at_starts = |v: &[f64]| starts.iter().map(|&s| v[s]).collect::<Vec<_>>();
    let mut gaps = Gaps::default();
    let mut oracle_residual = None;
    if let Some(b) = &brute {
        let lower = at_starts(&b.lower);
        gaps.denotational_lower = Some(max_diff(&denotational.0, &lower));
        gaps.lower_upper = Some(max_diff(&lower, &at_starts(&b.upper)));
        oracle_residual = Some(
            check_functional_fixpoint(&arena, &b.lower)?
                .max(check_functional_fixpoint(&arena, &b.upper)?),
        );
    }
    let mut iteration_residual = None;
    if let Some(v) = &iteration {
        gaps.denotational_iteration = Some(max_diff(&denotational.0, &at_starts(v)));
        iteration_residual = Some(check_functional_fixpoint(&arena, v)?);
        if let Some(b) = &brute {
            gaps.iteration_oracle = Some(max_diff(v, &b.lower));
        }
    }
    Ok(CheckOutcome {
        denotational,
        eval_stats,
        arena,
        brute,
        iteration,
        gaps,
        oracle_residual,
        iteration_residual,
    })
}

/// Instances from the seeded stream whose strategy space fits the budget.
/// Instances over budget are skipped (and counted) so that every returned
/// instance can be checked by enumeration.
pub struct CheckableInstances {
    seed: u64,
    next: u64,
    bounds: InstanceBounds,
    budget: u128,
    pub skipped: u64,
}

impl CheckableInstances {
    pub fn new(seed: u64, bounds: InstanceBounds, budget: u128) -> CheckableInstances {
        CheckableInstances {
            seed,
            next: 0,
            bounds,
            budget,
            skipped: 0,
        }
    }
}

impl Iterator for CheckableInstances {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        loop {
            let instance = random_instance(self.seed, self.next, &self.bounds);
            self.next += 1;
            let arena = build_arena(&instance.formula, &instance.model, &instance.valuation)
                .expect("generated instances are well formed");
            if ProfileSpace::new(&arena).size() <= self.budget {
                return Some(instance);
            }
            self.skipped += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::plts::figure_one;

    #[test]
    fn figure_one_formulas_pass() {
        for text in ["mu X. <a> X", "nu X. [a] X | <a> (mu Y. Y)", "<a> (nu X. X)"] {
            let out = check(
                &parse(text).unwrap(),
                &figure_one(),
                &Valuation::new(),
                &CheckOptions::default(),
            )
            .unwrap();
            assert!(out.passed(), "{text}: {:?}", out.gaps);
        }
    }

    #[test]
    fn acyclic_formula_agrees_exactly() {
        let out = check(
            &parse("<a> (nu X. X)").unwrap(),
            &figure_one(),
            &Valuation::new(),
            &CheckOptions::default(),
        )
        .unwrap();
        assert_eq!(out.gaps.denotational_lower, Some(0.0));
        assert_eq!(out.gaps.lower_upper, Some(0.0));
    }

    #[test]
    fn instance_stream_respects_budget() {
        let mut it = CheckableInstances::new(1, InstanceBounds::default(), 1000);
        for inst in it.by_ref().take(10) {
            let arena = build_arena(&inst.formula, &inst.model, &inst.valuation).unwrap();
            assert!(ProfileSpace::new(&arena).size() <= 1000);
        }
    }
}
