use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use plmu::formula::Fixpoint;
use plmu::plts::random_plts;
use plmu::random::{random_formula, random_instance, random_vector, InstanceBounds, FREE_VARIABLE};
use plmu::solver::{brute_force, BruteForceOptions};
use plmu::{build_arena, evaluate, Formula, Plts, Valuation};

/// Arbitrary formulas, including ones that reuse binder names or bind a
/// variable that also occurs free.
fn formula() -> impl Strategy<Value = Formula> {
    let leaf = prop::sample::select(vec!["X", "Y", "Z"]).prop_map(Formula::var);
    leaf.prop_recursive(5, 32, 2, |inner| {
        let label = prop::sample::select(vec!["a", "b"]);
        let name = prop::sample::select(vec!["X", "Y"]);
        prop_oneof![
            (label.clone(), inner.clone()).prop_map(|(a, f)| Formula::diamond(a, f)),
            (label, inner.clone()).prop_map(|(a, f)| Formula::boxed(a, f)),
            (inner.clone(), inner.clone()).prop_map(|(f, g)| Formula::or(f, g)),
            (inner.clone(), inner.clone()).prop_map(|(f, g)| Formula::and(f, g)),
            (name.clone(), inner.clone()).prop_map(|(x, f)| Formula::mu(x, f)),
            (name, inner).prop_map(|(x, f)| Formula::nu(x, f)),
        ]
    })
}

fn closed_formula(seed: u64) -> Formula {
    let labels = vec!["a".to_string(), "b".to_string()];
    random_formula(&mut ChaCha8Rng::seed_from_u64(seed), &labels, 5, 2, false)
}

fn swap_outer_binder(f: &Formula, kind: Fixpoint) -> Option<Formula> {
    let (_, x, body) = f.as_fixpoint()?;
    Some(Formula::fixpoint(kind, x.to_string(), body.clone()))
}

proptest! {
    #[test]
    fn print_then_parse_round_trips(f in formula()) {
        let text = f.to_string();
        prop_assert_eq!(text.parse::<Formula>().unwrap(), f);
    }

    #[test]
    fn normalize_is_idempotent_and_keeps_meaning(f in formula()) {
        let g = f.normalize();
        prop_assert!(g.is_normal_form());
        prop_assert_eq!(g.normalize(), g.clone());
        prop_assert_eq!(g.free_vars(), f.free_vars());
        prop_assert!(f.alpha_eq(&g));
        if f.is_normal_form() {
            prop_assert_eq!(&g, &f);
        }
    }

    #[test]
    fn normalized_formulas_evaluate_into_unit_interval(f in formula(), seed in any::<u64>()) {
        let m = random_plts(3, &["a", "b"], 2, 2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rho = Valuation::new();
        for x in ["X", "Y", "Z"] {
            rho.insert(x, random_vector(&mut rng, 3));
        }
        let v = evaluate(&f.normalize(), &m, &rho).unwrap();
        prop_assert!(v.in_unit_interval());
    }

    #[test]
    fn negation_is_an_involution(seed in any::<u64>()) {
        let f = closed_formula(seed);
        let nn = f.negate().unwrap().negate().unwrap();
        prop_assert_eq!(nn, f);
    }

    #[test]
    fn random_models_validate_and_round_trip(
        n in 1usize..7,
        branching in 0usize..4,
        support in 1usize..4,
        seed in any::<u64>(),
    ) {
        let m = random_plts(n, &["a", "b"], branching, support, seed);
        prop_assert!(m.validate().is_empty());
        prop_assert_eq!(Plts::from_json(&m.to_json()).unwrap(), m.clone());
        prop_assert_eq!(random_plts(n, &["a", "b"], branching, support, seed), m);
    }

    #[test]
    fn least_fixpoint_below_greatest(seed in any::<u64>(), index in 0u64..1000) {
        let inst = random_instance(seed, index, &InstanceBounds::default());
        let f = inst.formula;
        let (Some(mu), Some(nu)) = (
            swap_outer_binder(&f, Fixpoint::Mu),
            swap_outer_binder(&f, Fixpoint::Nu),
        ) else {
            return Ok(());
        };
        let lo = evaluate(&mu, &inst.model, &inst.valuation).unwrap();
        let hi = evaluate(&nu, &inst.model, &inst.valuation).unwrap();
        prop_assert!(lo.in_unit_interval() && hi.in_unit_interval());
        for p in 0..lo.len() {
            prop_assert!(lo[p] <= hi[p] + 2e-9, "{} vs {} at {}", lo[p], hi[p], p);
        }
    }

    #[test]
    fn lower_value_never_exceeds_upper(seed in any::<u64>(), index in 0u64..1000) {
        let inst = random_instance(seed, index, &InstanceBounds { max_states: 4, ..InstanceBounds::default() });
        let arena = build_arena(&inst.formula, &inst.model, &inst.valuation).unwrap();
        let options = BruteForceOptions { budget: 20_000, ..BruteForceOptions::default() };
        if let Ok(sol) = brute_force(&arena, options) {
            for s in 0..arena.len() {
                prop_assert!(sol.lower[s] <= sol.upper[s] + 1e-12);
                prop_assert!((0.0..=1.0).contains(&sol.lower[s]));
            }
        }
    }

    #[test]
    fn valuation_is_monotone(seed in any::<u64>(), bump in 0u32..16) {
        let labels = vec!["a".to_string(), "b".to_string()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_formula(&mut rng, &labels, 5, 2, true);
        let m = random_plts(4, &["a", "b"], 2, 3, seed);
        let low = random_vector(&mut rng, 4);
        let mut high = low.clone();
        for x in high.0.iter_mut() {
            *x = (*x + bump as f64 / 16.0).min(1.0);
        }
        let a = evaluate(&f, &m, &Valuation::new().with(FREE_VARIABLE, low)).unwrap();
        let b = evaluate(&f, &m, &Valuation::new().with(FREE_VARIABLE, high)).unwrap();
        for p in 0..4 {
            prop_assert!(a[p] <= b[p] + 2e-9);
        }
    }
}
