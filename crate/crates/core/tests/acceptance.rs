//! Acceptance suite: one pass/fail line per criterion on stderr.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plmu::denotational::{EvalStats, Evaluator, Valuation, ValueVector};
use plmu::montecarlo::Sampler;
use plmu::plts::figure_one;
use plmu::random::{random_formula, random_instance, random_vector, InstanceBounds, FREE_VARIABLE};
use plmu::solver::{brute_force, expected_reward, induce_chain, BruteForceOptions, ProfileSpace};
use plmu::theorem::{check, CheckOptions, CheckableInstances};
use plmu::{build_arena, parse, Execution};

const SEED: u64 = 20_240_611;
const INSTANCES: usize = 220;
/// Instances with more memoryless profiles than this are skipped.
const BUDGET: u128 = 100_000;
const GAP: f64 = 1e-6;
const TOL: f64 = 1e-9;

struct Line {
    passed: bool,
    text: String,
}

fn line(n: u32, name: &str, passed: bool, detail: String) -> Line {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let text = format!("criterion {n} [{verdict}] {name}: {detail}");
    // Written to the raw handle so the lines show up without --nocapture.
    writeln!(std::io::stderr(), "{text}").unwrap();
    Line { passed, text }
}

struct Sweep {
    checked: usize,
    fractional: usize,
    with_choice: usize,
    skipped: u64,
    worst_semantic_gap: f64,
    worst_determinacy_gap: f64,
    worst_residual: f64,
    worst_iteration_gap: f64,
}

fn random_sweep() -> Sweep {
    let opts = CheckOptions {
        budget: BUDGET,
        ..CheckOptions::default()
    };
    let mut stream = CheckableInstances::new(SEED, InstanceBounds::default(), BUDGET);
    let mut sweep = Sweep {
        checked: 0,
        fractional: 0,
        with_choice: 0,
        skipped: 0,
        worst_semantic_gap: 0.0,
        worst_determinacy_gap: 0.0,
        worst_residual: 0.0,
        worst_iteration_gap: 0.0,
    };
    for inst in stream.by_ref().take(INSTANCES) {
        let out = check(&inst.formula, &inst.model, &inst.valuation, &opts)
            .unwrap_or_else(|e| panic!("instance {}: {e}", inst.index));
        let g = out.gaps;
        sweep.checked += 1;
        if out.denotational.0.iter().any(|v| *v > 1e-6 && *v < 1.0 - 1e-6) {
            sweep.fractional += 1;
        }
        if ProfileSpace::new(&out.arena).size() > 1 {
            sweep.with_choice += 1;
        }
        sweep.worst_semantic_gap = sweep.worst_semantic_gap.max(g.denotational_lower.unwrap());
        sweep.worst_determinacy_gap = sweep.worst_determinacy_gap.max(g.lower_upper.unwrap());
        sweep.worst_residual = sweep.worst_residual.max(out.oracle_residual.unwrap());
        sweep.worst_iteration_gap = sweep.worst_iteration_gap.max(g.iteration_oracle.unwrap());
    }
    sweep.skipped = stream.skipped;
    sweep
}

fn figure_one_table() -> (bool, String) {
    // Values computed by hand on the two-state model.
    let table = [
        ("mu X. <a> X", [0.0, 0.0]),
        ("nu X. [a] X", [1.0, 1.0]),
        ("<a> (nu X. X)", [1.0, 0.0]),
        ("[a] (mu X. X)", [0.0, 1.0]),
    ];
    let m = figure_one();
    let rho = Valuation::new();
    let mut worst: f64 = 0.0;
    for (text, expected) in table {
        let f = parse(text).unwrap();
        let den = Evaluator::default().evaluate(&f, &m, &rho).unwrap();
        let arena = build_arena(&f, &m, &rho).unwrap();
        let sol = brute_force(&arena, BruteForceOptions::default()).unwrap();
        for p in 0..2 {
            let s = arena.start(p);
            for v in [den[p], sol.lower[s], sol.upper[s]] {
                worst = worst.max((v - expected[p]).abs());
            }
        }
    }
    (worst <= GAP, format!("4 formulas x 2 states x 3 values, max error {worst:.2e}"))
}

fn negation_identity() -> (bool, String) {
    let bounds = InstanceBounds {
        free_variable: false,
        ..InstanceBounds::default()
    };
    let mut worst: f64 = 0.0;
    let count = 150;
    for i in 0..count {
        let inst = random_instance(SEED ^ 0x4e47, i, &bounds);
        assert!(inst.formula.is_closed());
        let neg = inst.formula.negate().unwrap();
        let e = Evaluator::default();
        let v = e.evaluate(&inst.formula, &inst.model, &Valuation::new()).unwrap();
        let w = e.evaluate(&neg, &inst.model, &Valuation::new()).unwrap();
        for p in 0..v.len() {
            worst = worst.max((v[p] + w[p] - 1.0).abs());
        }
    }
    (worst <= 2e-9, format!("{count} closed formulas, max |[[F]] + [[not F]] - 1| = {worst:.2e}"))
}

struct MonteCarlo {
    within: usize,
    random: usize,
    degenerate: usize,
    total: usize,
    deterministic: bool,
}

/// Pairs are drawn from witness chains that can end with at least two
/// different payoffs; chains with a single outcome are skipped and counted.
fn monte_carlo() -> MonteCarlo {
    let mut stream = CheckableInstances::new(SEED ^ 0x4d43, InstanceBounds::default(), 10_000);
    let mut results = Vec::new();
    let mut degenerate = 0;
    while results.len() < 50 {
        let inst = stream.next().unwrap();
        let arena = build_arena(&inst.formula, &inst.model, &inst.valuation).unwrap();
        let sol = brute_force(&arena, BruteForceOptions::default()).unwrap();
        let k = results.len();
        let found = (0..inst.model.len()).find_map(|p| {
            let s = arena.start((p + k) % inst.model.len());
            let profile = sol.lower_witness(&arena, s);
            let chain = induce_chain(&arena, &profile, s).unwrap();
            let sampler = Sampler::new(&chain);
            (sampler.achievable_payoffs().len() >= 2).then_some((s, chain, sampler))
        });
        let Some((s, chain, sampler)) = found else {
            degenerate += 1;
            continue;
        };
        let exact = expected_reward(&chain);
        assert!((exact - sol.lower[s]).abs() <= 1e-9);
        let seed = SEED + k as u64;
        let est = sampler.estimate(10_000, seed, Execution::Parallel).unwrap();
        let rerun = sampler.estimate(10_000, seed, Execution::Sequential).unwrap();
        results.push((exact, est, rerun));
    }
    MonteCarlo {
        within: results
            .iter()
            .filter(|(exact, est, _)| (est.mean - exact).abs() <= 4.0 * est.stderr + 1e-12)
            .count(),
        random: results.iter().filter(|(_, est, _)| est.stderr > 0.0).count(),
        degenerate,
        total: results.len(),
        deterministic: results.iter().all(|(_, a, b)| a == b),
    }
}

fn monotonicity() -> (bool, String) {
    let labels = vec!["a".to_string(), "b".to_string()];
    let bounds = InstanceBounds::default();
    let e = Evaluator::new(TOL, 1_000_000);
    let mut worst_order: f64 = 0.0;
    let mut worst_iterate: f64 = 0.0;
    let count = 100;
    for i in 0..count {
        let base = random_instance(SEED ^ 0x4d4f, i, &bounds);
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ i);
        let f = random_formula(&mut rng, &labels, 5, 2, true);
        let n = base.model.len();
        let low = random_vector(&mut rng, n);
        let high = ValueVector(
            low.0
                .iter()
                .map(|x| (x + rng.gen_range(0..=8) as f64 / 16.0).min(1.0))
                .collect(),
        );
        let run = |v: &ValueVector| -> (ValueVector, EvalStats) {
            let rho = Valuation::new().with(FREE_VARIABLE, v.clone());
            e.evaluate_with_stats(&f, &base.model, &rho).unwrap()
        };
        let (a, sa) = run(&low);
        let (b, sb) = run(&high);
        for p in 0..n {
            worst_order = worst_order.max(a[p] - b[p]);
        }
        worst_iterate = worst_iterate
            .max(sa.monotonicity_violation)
            .max(sb.monotonicity_violation);
    }
    (
        worst_order <= 2.0 * TOL && worst_iterate <= 2.0 * TOL,
        format!(
            "{count} pairs, max [[F]]rho - [[F]]rho' = {worst_order:.2e}, max iterate reversal {worst_iterate:.2e} (bound {:.0e})",
            2.0 * TOL
        ),
    )
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();
    let sweep = random_sweep();
    let enough = sweep.checked >= 200;
    lines.push(line(
        1,
        "fixpoint semantics equals game value on random instances",
        enough && sweep.worst_semantic_gap <= GAP && sweep.worst_determinacy_gap <= GAP,
        format!(
            "{} instances ({} with a value strictly inside (0,1), {} with a player choice, {} over budget skipped), max |den - lower| {:.2e}, max |lower - upper| {:.2e}",
            sweep.checked,
            sweep.fractional,
            sweep.with_choice,
            sweep.skipped,
            sweep.worst_semantic_gap,
            sweep.worst_determinacy_gap
        ),
    ));
    let (ok, detail) = figure_one_table();
    lines.push(line(2, "two-state regression table", ok, detail));
    lines.push(line(
        3,
        "enumerated values are fixpoints of the game functional",
        enough && sweep.worst_residual <= GAP,
        format!("max residual {:.2e} over {} instances", sweep.worst_residual, sweep.checked),
    ));
    let (ok, detail) = negation_identity();
    lines.push(line(4, "negation identity", ok, detail));
    lines.push(line(
        5,
        "value iteration agrees with enumeration at every arena state",
        enough && sweep.worst_iteration_gap <= GAP,
        format!("max gap {:.2e} over {} instances", sweep.worst_iteration_gap, sweep.checked),
    ));
    let mc = monte_carlo();
    lines.push(line(
        6,
        "Monte Carlo estimates match exact chain values",
        mc.total == 50 && mc.within >= 48 && mc.deterministic,
        format!(
            "{}/{} within 4 stderr at n=10^4 ({} with nonzero variance, {} single-outcome instances skipped), rerun identical: {}",
            mc.within, mc.total, mc.random, mc.degenerate, mc.deterministic
        ),
    ));
    let (ok, detail) = monotonicity();
    lines.push(line(7, "monotonicity", ok, detail));
    let failed: Vec<&str> = lines.iter().filter(|l| !l.passed).map(|l| l.text.as_str()).collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
