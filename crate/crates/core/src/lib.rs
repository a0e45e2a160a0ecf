//! Probabilistic modal mu-calculus on finite probabilistic labeled transition
//! systems.
//!
//! Formulas are evaluated two ways: by the fixpoint semantics
//! ([`denotational`]) and as the value of a 2½-player stochastic parity game
//! ([`arena`], [`solver`]). The [`theorem`] module checks that both agree;
//! [`montecarlo`] provides a sampling cross-check of induced Markov chains.

pub mod arena;
pub mod denotational;
pub mod exec;
pub mod formula;
pub mod montecarlo;
pub mod plts;
pub mod random;
pub mod solver;
pub mod theorem;

pub use arena::{build_arena, Arena, Owner, Position};
pub use denotational::{evaluate, Evaluator, Valuation, ValueVector};
pub use exec::Execution;
pub use formula::{parse, Formula, SubformulaTable};
pub use plts::{Distribution, Plts, Probability};
pub use solver::{
    brute_force, brute_force_values, expected_reward, induce_chain, value_iteration,
    InducedChain, MemorylessProfile,
};
