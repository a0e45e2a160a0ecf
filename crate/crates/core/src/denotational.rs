//! Fixpoint semantics: every formula denotes a map from states to `[0, 1]`.
//!
//! Modalities take the best (`<a>`) or worst (`[a]`) expected value over the
//! `a`-successor distributions; `mu`/`nu` are computed by Kleene iteration
//! from the bottom (all zero) or top (all one) vector until the sup-norm
//! change drops below the tolerance.

use std::collections::BTreeMap;
use std::ops::Index;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Fixpoint, Formula};
use crate::plts::{Distribution, Plts};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("free variable {0} has no valuation entry")]
    UnboundVariable(String),
    #[error("formula is not in normal form")]
    NotNormalForm,
    #[error("valuation for {name} has {found} entries, model has {expected} states")]
    DomainMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("distribution support state #{0} is outside the value vector")]
    SupportMismatch(usize),
    #[error("valuation entry for {name} at state #{state} is outside [0,1]: {value}")]
    OutOfRange { name: String, state: usize, value: f64 },
    #[error("fixpoint {binder} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        binder: String,
        iterations: usize,
        residual: f64,
    },
    #[error("not a fixpoint formula")]
    NotFixpoint,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// A value in `[0, 1]` for every state of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueVector(pub Vec<f64>);

impl ValueVector {
    pub fn constant(len: usize, value: f64) -> ValueVector {
        ValueVector(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Sup-norm distance.
    pub fn distance(&self, other: &ValueVector) -> f64 {
        sup_distance(&self.0, &other.0)
    }

    pub fn in_unit_interval(&self) -> bool {
        self.0.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

impl Index<usize> for ValueVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Interpretation of variables as value vectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Valuation(pub BTreeMap<String, ValueVector>);

impl Valuation {
    pub fn new() -> Valuation {
        Valuation::default()
    }

    pub fn with(mut self, name: impl Into<String>, values: ValueVector) -> Valuation {
        self.0.insert(name.into(), values);
        self
    }

    pub fn get(&self, name: &str) -> Option<&ValueVector> {
        self.0.get(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, values: ValueVector) -> Option<ValueVector> {
        self.0.insert(name.into(), values)
    }

    pub fn remove(&mut self, name: &str) -> Option<ValueVector> {
        self.0.remove(name)
    }

    /// Reads `{"X": {"p": 0.7, ...}, ...}`; states missing from an entry get 0.
    pub fn from_json(text: &str, model: &Plts) -> Result<Valuation, ValuationFileError> {
        let raw: BTreeMap<String, BTreeMap<String, f64>> = serde_json::from_str(text)?;
        let mut out = Valuation::new();
        for (name, entries) in raw {
            let mut v = vec![0.0; model.len()];
            for (state, value) in entries {
                let i = model
                    .state_index(&state)
                    .map_err(|_| ValuationFileError::UnknownState(state.clone()))?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(ValuationFileError::OutOfRange(name, state, value));
                }
                v[i] = value;
            }
            out.insert(name, ValueVector(v));
        }
        Ok(out)
    }

    pub fn to_json(&self, model: &Plts) -> String {
        let raw: BTreeMap<&String, BTreeMap<&String, f64>> = self
            .0
            .iter()
            .map(|(x, v)| (x, model.states().iter().zip(v.0.iter().copied()).collect()))
            .collect();
        serde_json::to_string_pretty(&raw).expect("valuation serializes")
    }
}

#[derive(Debug, Error)]
pub enum ValuationFileError {
    #[error("malformed valuation JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("valuation mentions unknown state {0:?}")]
    UnknownState(String),
    #[error("valuation {0} at state {1} is outside [0,1]: {2}")]
    OutOfRange(String, String, f64),
}

/// `sum_q d(q) * v(q)`.
pub fn expectation(d: &Distribution, v: &ValueVector) -> Result<f64, EvalError> {
    for (q, _) in d.entries() {
        if *q >= v.len() {
            return Err(EvalError::SupportMismatch(*q));
        }
    }
    Ok(expectation_unchecked(d, &v.0))
}

fn expectation_unchecked(d: &Distribution, v: &[f64]) -> f64 {
    d.entries().iter().map(|(q, p)| p.value() * v[*q]).sum()
}

/// Counters collected during one evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalStats {
    /// Functional applications over all fixpoints, including nested restarts.
    pub iterations: usize,
    /// Largest amount by which a `mu` iterate decreased or a `nu` iterate
    /// increased at some state. Zero when every iteration sequence was monotone.
    pub monotonicity_violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluator {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator {
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl Evaluator {
    pub fn new(tol: f64, max_iter: usize) -> Evaluator {
        Evaluator { tol, max_iter }
    }

    pub fn evaluate(&self, f: &Formula, m: &Plts, rho: &Valuation) -> Result<ValueVector, EvalError> {
        self.evaluate_with_stats(f, m, rho).map(|(v, _)| v)
    }

    pub fn evaluate_with_stats(
        &self,
        f: &Formula,
        m: &Plts,
        rho: &Valuation,
    ) -> Result<(ValueVector, EvalStats), EvalError> {
        self.check_inputs(f, m, rho)?;
        let mut run = Run {
            eval: self,
            model: m,
            env: rho.clone(),
            stats: EvalStats::default(),
        };
        let v = run.eval(f)?;
        debug_assert!(v.in_unit_interval(), "value outside [0,1]: {v:?}");
        Ok((v, run.stats))
    }

    /// Sup-norm distance between `v` and one application of the functional
    /// defining the fixpoint formula `f`.
    pub fn residual(
        &self,
        f: &Formula,
        m: &Plts,
        rho: &Valuation,
        v: &ValueVector,
    ) -> Result<f64, EvalError> {
        let (_, x, body) = f.as_fixpoint().ok_or(EvalError::NotFixpoint)?;
        self.check_inputs(f, m, rho)?;
        if v.len() != m.len() {
            return Err(EvalError::DomainMismatch {
                name: x.to_string(),
                expected: m.len(),
                found: v.len(),
            });
        }
        let mut run = Run {
            eval: self,
            model: m,
            env: rho.clone(),
            stats: EvalStats::default(),
        };
        run.env.insert(x, v.clone());
        let next = run.eval(body)?;
        Ok(v.distance(&next))
    }

    fn check_inputs(&self, f: &Formula, m: &Plts, rho: &Valuation) -> Result<(), EvalError> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(EvalError::BadTolerance(self.tol));
        }
        if !f.is_normal_form() {
            return Err(EvalError::NotNormalForm);
        }
        for x in f.free_vars() {
            let v = rho.get(&x).ok_or_else(|| EvalError::UnboundVariable(x.clone()))?;
            if v.len() != m.len() {
                return Err(EvalError::DomainMismatch {
                    name: x,
                    expected: m.len(),
                    found: v.len(),
                });
            }
            if let Some((state, &value)) =
                v.0.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x))
            {
                return Err(EvalError::OutOfRange { name: x, state, value });
            }
        }
        Ok(())
    }
}

/// Evaluates with the default tolerance and iteration cap.
pub fn evaluate(f: &Formula, m: &Plts, rho: &Valuation) -> Result<ValueVector, EvalError> {
    Evaluator::default().evaluate(f, m, rho)
}

struct Run<'a> {
    eval: &'a Evaluator,
    model: &'a Plts,
    env: Valuation,
    stats: EvalStats,
}

impl Run<'_> {
    fn eval(&mut self, f: &Formula) -> Result<ValueVector, EvalError> {
        let n = self.model.len();
        Ok(match f {
            Formula::Var(x) => self
                .env
                .get(x)
                .cloned()
                .ok_or_else(|| EvalError::UnboundVariable(x.clone()))?,
            Formula::Or(g, h) => {
                let (g, h) = (self.eval(g)?, self.eval(h)?);
                ValueVector(g.0.iter().zip(&h.0).map(|(a, b)| a.max(*b)).collect())
            }
            Formula::And(g, h) => {
                let (g, h) = (self.eval(g)?, self.eval(h)?);
                ValueVector(g.0.iter().zip(&h.0).map(|(a, b)| a.min(*b)).collect())
            }
            Formula::Diamond(a, g) => {
                let child = self.eval(g)?;
                ValueVector(
                    (0..n)
                        .map(|p| {
                            self.model
                                .successors(p, a)
                                .iter()
                                .map(|d| expectation_unchecked(d, &child.0))
                                .fold(0.0, f64::max)
                        })
                        .collect(),
                )
            }
            Formula::Box(a, g) => {
                let child = self.eval(g)?;
                ValueVector(
                    (0..n)
                        .map(|p| {
                            self.model
                                .successors(p, a)
                                .iter()
                                .map(|d| expectation_unchecked(d, &child.0))
                                .fold(1.0, f64::min)
                        })
                        .collect(),
                )
            }
            Formula::Mu(x, body) => self.fixpoint(Fixpoint::Mu, x, body)?,
            Formula::Nu(x, body) => self.fixpoint(Fixpoint::Nu, x, body)?,
        })
    }

    fn fixpoint(&mut self, kind: Fixpoint, x: &str, body: &Formula) -> Result<ValueVector, EvalError> {
        let start = match kind {
            Fixpoint::Mu => 0.0,
            Fixpoint::Nu => 1.0,
        };
        let shadowed = self.env.remove(x);
        let mut current = ValueVector::constant(self.model.len(), start);
        let mut iterations = 0;
        let result = loop {
            if iterations == self.eval.max_iter {
                let residual = self.apply(x, body, &current)?.distance(&current);
                break Err(EvalError::NotConverged {
                    binder: x.to_string(),
                    iterations,
                    residual,
                });
            }
            let next = self.apply(x, body, &current)?;
            iterations += 1;
            let violation = current
                .0
                .iter()
                .zip(&next.0)
                .map(|(old, new)| match kind {
                    Fixpoint::Mu => old - new,
                    Fixpoint::Nu => new - old,
                })
                .fold(0.0, f64::max);
            self.stats.monotonicity_violation = self.stats.monotonicity_violation.max(violation);
            let change = next.distance(&current);
            current = next;
            if change < self.eval.tol {
                break Ok(current);
            }
        };
        self.env.remove(x);
        if let Some(v) = shadowed {
            self.env.insert(x, v);
        }
        result
    }

    fn apply(&mut self, x: &str, body: &Formula, v: &ValueVector) -> Result<ValueVector, EvalError> {
        self.stats.iterations += 1;
        self.env.insert(x, v.clone());
        self.eval(body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::plts::{figure_one, Probability};

    fn eval_fig1(text: &str) -> Vec<f64> {
        evaluate(&parse(text).unwrap(), &figure_one(), &Valuation::new())
            .unwrap()
            .0
    }

    fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - e).abs() <= tol, "{actual:?} vs {expected:?}");
        }
    }

    #[test]
    fn expectation_weighted_sum() {
        let d = Distribution::new(vec![(0, Probability::ratio(1, 3)), (1, Probability::ratio(2, 3))]);
        let v = ValueVector(vec![0.3, 0.6]);
        assert!((expectation(&d, &v).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(expectation(&Distribution::dirac(1), &v).unwrap(), 0.6);
        let c = ValueVector(vec![0.25, 0.25]);
        assert!((expectation(&d, &c).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(
            expectation(&Distribution::dirac(5), &v).unwrap_err(),
            EvalError::SupportMismatch(5)
        );
    }

    #[test]
    fn identity_fixpoints() {
        assert_eq!(eval_fig1("nu X. X"), vec![1.0, 1.0]);
        assert_eq!(eval_fig1("mu X. X"), vec![0.0, 0.0]);
    }

    #[test]
    fn figure_one_values() {
        assert_close(&eval_fig1("mu X. <a> X"), &[0.0, 0.0], 1e-9);
        assert_close(&eval_fig1("nu X. [a] X"), &[1.0, 1.0], 1e-9);
        assert_close(&eval_fig1("<a> (nu X. X)"), &[1.0, 0.0], 0.0);
        assert_close(&eval_fig1("[a] (mu X. X)"), &[0.0, 1.0], 0.0);
    }

    #[test]
    fn free_variables_read_the_valuation() {
        let m = figure_one();
        let rho = Valuation::new().with("Y", ValueVector(vec![0.3, 0.6]));
        let v = evaluate(&parse("<a> Y").unwrap(), &m, &rho).unwrap();
        // max(1/3 * 0.3 + 2/3 * 0.6, 0.6)
        assert_close(&v.0, &[0.6, 0.0], 1e-15);
        let v = evaluate(&parse("[a] Y").unwrap(), &m, &rho).unwrap();
        assert_close(&v.0, &[0.5, 1.0], 1e-15);
    }

    #[test]
    fn missing_free_variable_is_an_error() {
        let err = evaluate(&parse("<a> Y").unwrap(), &figure_one(), &Valuation::new()).unwrap_err();
        assert_eq!(err, EvalError::UnboundVariable("Y".into()));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let e = Evaluator::new(1e-12, 3);
        match e.evaluate(&parse("nu X. <a> X").unwrap(), &figure_one(), &Valuation::new()) {
            Err(EvalError::NotConverged { iterations, residual, .. }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn residual_of_fixpoints() {
        let e = Evaluator::default();
        let m = figure_one();
        let rho = Valuation::new();
        let nu = parse("nu X. [a] X").unwrap();
        let exact = e.evaluate(&nu, &m, &rho).unwrap();
        assert!(e.residual(&nu, &m, &rho, &exact).unwrap() < e.tol);
        let half = ValueVector(vec![0.5, 0.5]);
        assert_eq!(e.residual(&parse("mu X. X").unwrap(), &m, &rho, &half).unwrap(), 0.0);
        let r = e.residual(&nu, &m, &rho, &ValueVector(vec![0.0, 1.0])).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            e.residual(&parse("<a> (mu X. X)").unwrap(), &m, &rho, &half).unwrap_err(),
            EvalError::NotFixpoint
        );
    }

    #[test]
    fn nested_fixpoints_recompute_inner() {
        let m = figure_one();
        let f = parse("nu Y. mu X. <a> X | [a] Y").unwrap();
        let (v, stats) = Evaluator::default()
            .evaluate_with_stats(&f, &m, &Valuation::new())
            .unwrap();
        assert!(v.in_unit_interval());
        assert_eq!(stats.monotonicity_violation, 0.0);
        // q is stuck: <a> gives 0, [a] gives 1.
        assert_close(&v.0, &[1.0, 1.0], 1e-9);
    }

    #[test]
    fn valuation_json() {
        let m = figure_one();
        let rho = Valuation::from_json(r#"{"X": {"p": 0.7}}"#, &m).unwrap();
        assert_eq!(rho.get("X").unwrap().0, vec![0.7, 0.0]);
        assert_eq!(Valuation::from_json(&rho.to_json(&m), &m).unwrap(), rho);
        assert!(Valuation::from_json(r#"{"X": {"z": 0.7}}"#, &m).is_err());
        assert!(Valuation::from_json(r#"{"X": {"p": 1.7}}"#, &m).is_err());
    }
}
