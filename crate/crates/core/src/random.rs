//! Seeded random formulas, valuations and (model, formula) instances.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::denotational::{Valuation, ValueVector};
use crate::formula::{Fixpoint, Formula};
use crate::plts::{random_plts_with, Plts};

/// Name of the free variable used by open random formulas.
pub const FREE_VARIABLE: &str = "Z";

const BINDER_NAMES: [&str; 6] = ["X", "Y", "W", "U", "V", "T"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceBounds {
    pub max_states: usize,
    pub labels: usize,
    pub max_branching: usize,
    pub max_support: usize,
    pub max_binders: usize,
    pub max_depth: usize,
    /// Allow the free variable [`FREE_VARIABLE`], interpreted by a random valuation.
    pub free_variable: bool,
}

impl Default for InstanceBounds {
    fn default() -> Self {
        InstanceBounds {
            max_states: 6,
            labels: 2,
            max_branching: 3,
            max_support: 3,
            max_binders: 2,
            max_depth: 5,
            free_variable: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub index: u64,
    pub model: Plts,
    pub formula: Formula,
    pub valuation: Valuation,
}

/// A random normal-form formula with at most `max_binders` binders and depth
/// at most `max_depth`. Closed unless `free_variable` is set. Closed formulas
/// need `max_depth >= 2` and `max_binders >= 1`.
pub fn random_formula(
    rng: &mut impl Rng,
    labels: &[String],
    max_depth: usize,
    max_binders: usize,
    free_variable: bool,
) -> Formula {
    assert!(max_depth >= 1);
    assert!(free_variable || (max_depth >= 2 && max_binders >= 1));
    let mut g = FormulaGen {
        rng,
        labels,
        free_variable,
        next_binder: 0,
    };
    let mut scope = Vec::new();
    if free_variable {
        g.gen(max_depth, &mut scope, max_binders)
    } else {
        g.binder(max_depth, &mut scope, max_binders)
    }
}

struct FormulaGen<'a, R> {
    rng: &'a mut R,
    labels: &'a [String],
    free_variable: bool,
    next_binder: usize,
}

impl<R: Rng> FormulaGen<'_, R> {
    fn leaf(&mut self, scope: &[String]) -> Formula {
        let free = self.free_variable && (scope.is_empty() || self.rng.gen_bool(0.35));
        if free {
            Formula::var(FREE_VARIABLE)
        } else {
            Formula::Var(scope.choose(self.rng).expect("leaf needs a variable").clone())
        }
    }

    fn binder(&mut self, depth: usize, scope: &mut Vec<String>, binders: usize) -> Formula {
        let name = BINDER_NAMES[self.next_binder % BINDER_NAMES.len()].to_string();
        self.next_binder += 1;
        let kind = if self.rng.gen_bool(0.5) {
            Fixpoint::Mu
        } else {
            Fixpoint::Nu
        };
        scope.push(name.clone());
        let body = if depth > 2 {
            self.compound(depth - 1, scope, binders - 1)
        } else {
            self.leaf(scope)
        };
        scope.pop();
        Formula::fixpoint(kind, name, body)
    }

    fn gen(&mut self, depth: usize, scope: &mut Vec<String>, binders: usize) -> Formula {
        let can_leaf = !scope.is_empty() || self.free_variable;
        if can_leaf && (depth == 1 || self.rng.gen_bool(0.15)) {
            return self.leaf(scope);
        }
        self.compound(depth, scope, binders)
    }

    /// Anything but a bare variable; `depth >= 2`.
    fn compound(&mut self, depth: usize, scope: &mut Vec<String>, binders: usize) -> Formula {
        let can_leaf = !scope.is_empty() || self.free_variable;
        let roll = self.rng.gen_range(0..10);
        if binders > 0 && (roll < 2 || !can_leaf) {
            return self.binder(depth, scope, binders);
        }
        if roll < 7 && !self.labels.is_empty() {
            let a = self.labels.choose(self.rng).unwrap().clone();
            let child = self.gen(depth - 1, scope, binders);
            return if self.rng.gen_bool(0.5) {
                Formula::diamond(a, child)
            } else {
                Formula::boxed(a, child)
            };
        }
        let left_binders = self.rng.gen_range(0..=binders);
        let left = self.gen(depth - 1, scope, left_binders);
        let right = self.gen(depth - 1, scope, binders - left_binders);
        if self.rng.gen_bool(0.5) {
            Formula::or(left, right)
        } else {
            Formula::and(left, right)
        }
    }
}

/// Random values in `[0, 1]`, multiples of 1/16.
pub fn random_vector(rng: &mut impl Rng, len: usize) -> ValueVector {
    ValueVector((0..len).map(|_| rng.gen_range(0..=16) as f64 / 16.0).collect())
}

/// The `index`-th instance of the stream seeded by `seed`.
pub fn random_instance(seed: u64, index: u64, bounds: &InstanceBounds) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n_states = rng.gen_range(bounds.max_states.min(2)..=bounds.max_states.max(1));
    let labels: Vec<String> = ["a", "b", "c", "d"]
        .iter()
        .take(bounds.labels.clamp(1, 4))
        .map(|s| s.to_string())
        .collect();
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let model = random_plts_with(
        &mut rng,
        n_states,
        &label_refs,
        bounds.max_branching,
        bounds.max_support,
    );
    let open = bounds.free_variable && rng.gen_bool(0.4);
    let formula = random_formula(
        &mut rng,
        &labels,
        bounds.max_depth.max(2),
        bounds.max_binders.max(1),
        open,
    );
    let mut valuation = Valuation::new();
    if !formula.is_closed() {
        valuation.insert(FREE_VARIABLE, random_vector(&mut rng, n_states));
    }
    Instance {
        index,
        model,
        formula,
        valuation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas_respect_bounds() {
        let labels = vec!["a".to_string(), "b".to_string()];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..500 {
            let open = i % 2 == 0;
            let f = random_formula(&mut rng, &labels, 5, 2, open);
            assert!(f.depth() <= 5, "{f}");
            assert!(f.binder_count() <= 2, "{f}");
            assert!(f.is_normal_form(), "{f}");
            if !open {
                assert!(f.is_closed(), "{f}");
            }
            let reparsed: Formula = f.to_string().parse().unwrap();
            assert_eq!(reparsed, f);
        }
    }

    #[test]
    fn instances_are_reproducible() {
        let b = InstanceBounds::default();
        for i in 0..20 {
            let x = random_instance(7, i, &b);
            let y = random_instance(7, i, &b);
            assert_eq!(x.model, y.model);
            assert_eq!(x.formula, y.formula);
            assert_eq!(x.valuation, y.valuation);
            assert!(x.model.validate().is_empty());
            assert!(x.model.len() <= 6);
        }
        assert_ne!(
            random_instance(7, 0, &b).formula.to_string() + &random_instance(7, 1, &b).formula.to_string(),
            random_instance(8, 0, &b).formula.to_string() + &random_instance(8, 1, &b).formula.to_string()
        );
    }
}
