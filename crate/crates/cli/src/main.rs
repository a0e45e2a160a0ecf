//! `plmu`: evaluate probabilistic mu-calculus formulas on PLTS models, dump
//! and solve the corresponding parity games, and cross-check the two.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use plmu::denotational::{EvalError, Evaluator, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use plmu::montecarlo::{Sampler, SimulationError};
use plmu::random::InstanceBounds;
use plmu::solver::{
    brute_force, expected_reward, induce_chain, BruteForceOptions, MemorylessProfile,
    ProfileSpace, SolverError, DEFAULT_BUDGET,
};
use plmu::theorem::{check, CheckError, CheckOptions, CheckOutcome, CheckableInstances, SolverChoice};
use plmu::{build_arena, parse, Arena, Execution, Formula, Plts, Valuation};

use report::{GapReport, Report, Residuals, Simulation, StateRow, Witness};

const EXIT_INPUT: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

#[derive(Parser)]
#[command(name = "plmu", version, about = "Probabilistic mu-calculus toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fixpoint semantics of a formula at every state.
    Eval {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        iter: Iteration,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Dump the parity game arena.
    Game {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Compare the fixpoint semantics with the game values.
    Check {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        iter: Iteration,
        #[arg(long, value_enum, default_value_t = SolverArg::Both)]
        solver: SolverArg,
        /// Largest number of memoryless profiles to enumerate.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
        #[arg(long)]
        sequential: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Monte Carlo estimate of the payoff under a memoryless profile.
    Simulate {
        #[command(flatten)]
        input: Input,
        /// Profile file (JSON list of [arena state, chosen successor]); by
        /// default the lower-value witness found by enumeration is used.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Simulate only from this model state.
        #[arg(long)]
        state: Option<String>,
        #[arg(short = 'n', long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check random (model, formula) pairs.
    RandomTest {
        #[arg(long, default_value_t = 200)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        iter: Iteration,
        #[command(flatten)]
        bounds: Bounds,
        /// Instances whose profile space exceeds this are skipped.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args)]
struct Input {
    /// PLTS model (JSON).
    model: PathBuf,
    /// Formula text, e.g. "mu X. <a> X".
    formula: String,
    /// Valuation of the free variables (JSON).
    #[arg(long)]
    rho: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
struct Iteration {
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
}

#[derive(Args)]
struct Bounds {
    #[arg(long, default_value_t = 6)]
    max_states: usize,
    #[arg(long, default_value_t = 2)]
    labels: usize,
    #[arg(long, default_value_t = 3)]
    max_branching: usize,
    #[arg(long, default_value_t = 3)]
    max_support: usize,
    #[arg(long, default_value_t = 2)]
    max_binders: usize,
    #[arg(long, default_value_t = 5)]
    max_depth: usize,
    /// Only closed formulas.
    #[arg(long)]
    closed: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Oracle,
    Iteration,
    Both,
}

impl From<SolverArg> for SolverChoice {
    fn from(s: SolverArg) -> SolverChoice {
        match s {
            SolverArg::Oracle => SolverChoice::Oracle,
            SolverArg::Iteration => SolverChoice::Iteration,
            SolverArg::Both => SolverChoice::Both,
        }
    }
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn input(error: impl Into<anyhow::Error>) -> Failure {
        Failure {
            code: EXIT_INPUT,
            error: error.into(),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Failure {
        let code = match e {
            EvalError::NotConverged { .. } => EXIT_NOT_CONVERGED,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Failure {
        let code = match e {
            SolverError::NotConverged { .. } => EXIT_NOT_CONVERGED,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

impl From<CheckError> for Failure {
    fn from(e: CheckError) -> Failure {
        match e {
            CheckError::Eval(e) => e.into(),
            CheckError::Solver(e) => e.into(),
            CheckError::Arena(e) => Failure::input(e),
        }
    }
}

type Outcome = Result<u8, Failure>;

struct Loaded {
    model: Plts,
    formula: Formula,
    rho: Valuation,
}

fn load(input: &Input) -> Result<Loaded, Failure> {
    let model = Plts::load(&input.model).map_err(Failure::input)?;
    let violations = model.validate();
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Failure::input(anyhow!(
            "invalid model {}:\n  {}",
            input.model.display(),
            lines.join("\n  ")
        )));
    }
    let formula = parse(&input.formula)
        .with_context(|| format!("cannot parse formula {:?}", input.formula))
        .map_err(Failure::input)?
        .normalize();
    let rho = match &input.rho {
        Some(path) => {
            let text = read(path)?;
            Valuation::from_json(&text, &model)
                .with_context(|| format!("invalid valuation {}", path.display()))
                .map_err(Failure::input)?
        }
        None => Valuation::new(),
    };
    let unbound: Vec<String> = formula
        .free_vars()
        .into_iter()
        .filter(|x| rho.get(x).is_none())
        .collect();
    if !unbound.is_empty() {
        return Err(Failure::input(anyhow!(
            "free variables without a valuation: {} (pass --rho)",
            unbound.join(", ")
        )));
    }
    Ok(Loaded {
        model,
        formula,
        rho,
    })
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::input)
}

fn emit<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value).expect("report serializes")),
        Format::Text => print!("{}", text()),
    }
}

fn cmd_eval(input: &Input, iter: Iteration, format: Format) -> Outcome {
    let start = Instant::now();
    let l = load(input)?;
    let (values, stats) =
        Evaluator::new(iter.tol, iter.max_iter).evaluate_with_stats(&l.formula, &l.model, &l.rho)?;
    let rows = l
        .model
        .states()
        .iter()
        .zip(&values.0)
        .map(|(p, v)| StateRow {
            denotational: Some(*v),
            ..StateRow::new(p)
        })
        .collect();
    let mut report = Report::new("eval", l.formula.to_string(), rows);
    report.residuals = Some(Residuals {
        oracle: None,
        iteration: None,
        denotational_iterations: stats.iterations,
        monotonicity_violation: stats.monotonicity_violation,
    });
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    emit(format, &report, || report.to_text());
    Ok(0)
}

#[derive(Serialize)]
struct ArenaStateJson {
    id: usize,
    position: String,
    owner: &'static str,
    priority: u32,
    reward: Option<f64>,
    successors: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    probabilities: Vec<String>,
}

fn arena_json(arena: &Arena) -> Vec<ArenaStateJson> {
    arena
        .states()
        .iter()
        .enumerate()
        .map(|(i, s)| ArenaStateJson {
            id: i,
            position: arena.describe(i),
            owner: s.owner.tag(),
            priority: s.priority,
            reward: s.reward,
            successors: s.successors.clone(),
            probabilities: s.probabilities.iter().map(|p| p.to_string()).collect(),
        })
        .collect()
}

fn cmd_game(input: &Input, format: Format) -> Outcome {
    let l = load(input)?;
    let arena = build_arena(&l.formula, &l.model, &l.rho).map_err(Failure::input)?;
    emit(format, &arena_json(&arena), || arena.dump());
    Ok(0)
}

fn check_report(model: &Plts, formula: &Formula, out: &CheckOutcome) -> Report {
    let lower = out.lower();
    let upper = out.upper();
    let iteration = out.iteration_at_starts();
    let rows: Vec<StateRow> = model
        .states()
        .iter()
        .enumerate()
        .map(|(i, p)| StateRow {
            state: p.clone(),
            denotational: Some(out.denotational[i]),
            lower: lower.as_ref().map(|v| v[i]),
            upper: upper.as_ref().map(|v| v[i]),
            iteration: iteration.as_ref().map(|v| v[i]),
        })
        .collect();
    let mut report = Report::new("check", formula.to_string(), rows);
    report.gaps = Some(GapReport::from_rows(&report.states, out.gaps.iteration_oracle));
    report.arena_states = Some(out.arena.len());
    report.profiles = Some(ProfileSpace::new(&out.arena).size());
    report.residuals = Some(Residuals {
        oracle: out.oracle_residual,
        iteration: out.iteration_residual,
        denotational_iterations: out.eval_stats.iterations,
        monotonicity_violation: out.eval_stats.monotonicity_violation,
    });
    if let Some(b) = &out.brute {
        report.witnesses = model
            .states()
            .iter()
            .enumerate()
            .map(|(i, p)| Witness {
                state: p.clone(),
                profile: pairs(&b.lower_witness(&out.arena, out.arena.start(i))),
            })
            .collect();
    }
    report
}

fn pairs(profile: &MemorylessProfile) -> Vec<(usize, usize)> {
    profile
        .choice
        .iter()
        .enumerate()
        .filter_map(|(s, c)| c.map(|t| (s, t)))
        .collect()
}

fn cmd_check(
    input: &Input,
    iter: Iteration,
    solver: SolverArg,
    budget: u128,
    sequential: bool,
    format: Format,
) -> Outcome {
    let start = Instant::now();
    let l = load(input)?;
    let opts = CheckOptions {
        tol: iter.tol,
        max_iter: iter.max_iter,
        solver: solver.into(),
        budget,
        execution: if sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let out = check(&l.formula, &l.model, &l.rho, &opts)?;
    let mut report = check_report(&l.model, &l.formula, &out);
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    emit(format, &report, || report.to_text());
    let passed = report.gaps.as_ref().is_some_and(|g| g.passed);
    Ok(if passed { 0 } else { EXIT_VIOLATION })
}

fn cmd_simulate(
    input: &Input,
    profile_path: Option<&Path>,
    state: Option<&str>,
    samples: u64,
    seed: u64,
    budget: u128,
    format: Format,
) -> Outcome {
    let start = Instant::now();
    let l = load(input)?;
    let arena = build_arena(&l.formula, &l.model, &l.rho).map_err(Failure::input)?;
    let fixed = match profile_path {
        Some(path) => Some(
            MemorylessProfile::from_json(&read(path)?, &arena)
                .with_context(|| format!("invalid profile {}", path.display()))
                .map_err(Failure::input)?,
        ),
        None => None,
    };
    let solution = match fixed {
        Some(_) => None,
        None => Some(brute_force(
            &arena,
            BruteForceOptions {
                budget,
                execution: Execution::default(),
            },
        )?),
    };
    let starts: Vec<usize> = match state {
        Some(name) => vec![l.model.state_index(name).map_err(Failure::input)?],
        None => (0..l.model.len()).collect(),
    };
    let mut report = Report::new("simulate", l.formula.to_string(), Vec::new());
    for p in starts {
        let s = arena.start(p);
        let profile = match (&fixed, &solution) {
            (Some(f), _) => f.clone(),
            (None, Some(b)) => b.lower_witness(&arena, s),
            (None, None) => unreachable!(),
        };
        let chain = induce_chain(&arena, &profile, s)?;
        let exact = expected_reward(&chain);
        let est = Sampler::new(&chain)
            .estimate(samples, seed, Execution::default())
            .map_err(|e| Failure {
                code: match e {
                    SimulationError::NoSamples => EXIT_INPUT,
                    SimulationError::StepCap(_) => 1,
                },
                error: e.into(),
            })?;
        let z = (est.stderr > 0.0).then(|| (est.mean - exact) / est.stderr);
        let name = l.model.states()[p].clone();
        report.states.push(StateRow {
            lower: solution.as_ref().map(|b| b.lower[s]),
            ..StateRow::new(&name)
        });
        report.witnesses.push(Witness {
            state: name.clone(),
            profile: pairs(&profile),
        });
        report.simulation.push(Simulation {
            state: name,
            exact,
            mean: est.mean,
            stderr: est.stderr,
            samples: est.samples,
            z,
        });
    }
    report.arena_states = Some(arena.len());
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    emit(format, &report, || report.to_text());
    Ok(0)
}

#[derive(Serialize)]
struct Counterexample {
    index: u64,
    formula: String,
    model: serde_json::Value,
    rho: serde_json::Value,
    gaps: GapReport,
}

#[derive(Serialize)]
struct RandomSummary {
    seed: u64,
    count: u64,
    checked: u64,
    skipped: u64,
    worst_gap: f64,
    worst_index: Option<u64>,
    worst_residual: f64,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    counterexample: Option<Counterexample>,
    elapsed_ms: f64,
}

fn cmd_random_test(
    count: u64,
    seed: u64,
    iter: Iteration,
    bounds: &Bounds,
    budget: u128,
    format: Format,
) -> Outcome {
    let start = Instant::now();
    let bounds = InstanceBounds {
        max_states: bounds.max_states,
        labels: bounds.labels,
        max_branching: bounds.max_branching,
        max_support: bounds.max_support,
        max_binders: bounds.max_binders,
        max_depth: bounds.max_depth,
        free_variable: !bounds.closed,
    };
    let opts = CheckOptions {
        tol: iter.tol,
        max_iter: iter.max_iter,
        solver: SolverChoice::Both,
        budget,
        execution: Execution::default(),
    };
    let mut stream = CheckableInstances::new(seed, bounds, budget);
    let mut summary = RandomSummary {
        seed,
        count,
        checked: 0,
        skipped: 0,
        worst_gap: 0.0,
        worst_index: None,
        worst_residual: 0.0,
        passed: true,
        counterexample: None,
        elapsed_ms: 0.0,
    };
    for _ in 0..count {
        let inst = stream.next().expect("instance stream is infinite");
        let out = check(&inst.formula, &inst.model, &inst.valuation, &opts)?;
        let report = check_report(&inst.model, &inst.formula, &out);
        let gaps = report.gaps.expect("check reports gaps");
        summary.checked += 1;
        summary.worst_residual = summary.worst_residual.max(out.oracle_residual.unwrap_or(0.0));
        if summary.worst_index.is_none() || gaps.max > summary.worst_gap {
            summary.worst_gap = gaps.max;
            summary.worst_index = Some(inst.index);
        }
        if !gaps.passed {
            summary.passed = false;
            summary.counterexample = Some(Counterexample {
                index: inst.index,
                formula: inst.formula.to_string(),
                model: serde_json::from_str(&inst.model.to_json()).expect("model JSON"),
                rho: serde_json::from_str(&inst.valuation.to_json(&inst.model)).expect("valuation JSON"),
                gaps,
            });
            break;
        }
    }
    summary.skipped = stream.skipped;
    summary.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    emit(format, &summary, || {
        let mut text = format!(
            "checked {} instances (seed {}, {} skipped over budget)\nworst gap {:.3e}{}\nworst fixpoint residual {:.3e}\n",
            summary.checked,
            summary.seed,
            summary.skipped,
            summary.worst_gap,
            summary.worst_index.map_or(String::new(), |i| format!(" at instance {i}")),
            summary.worst_residual,
        );
        if let Some(c) = &summary.counterexample {
            text.push_str(&format!(
                "VIOLATION at instance {}\nformula: {}\nmodel: {}\nrho: {}\n",
                c.index, c.formula, c.model, c.rho
            ));
        }
        text
    });
    Ok(if summary.passed { 0 } else { EXIT_VIOLATION })
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Eval { input, iter, format } => cmd_eval(&input, iter, format),
        Command::Game { input, format } => cmd_game(&input, format),
        Command::Check {
            input,
            iter,
            solver,
            budget,
            sequential,
            format,
        } => cmd_check(&input, iter, solver, budget, sequential, format),
        Command::Simulate {
            input,
            profile,
            state,
            samples,
            seed,
            budget,
            format,
        } => cmd_simulate(&input, profile.as_deref(), state.as_deref(), samples, seed, budget, format),
        Command::RandomTest {
            count,
            seed,
            iter,
            bounds,
            budget,
            format,
        } => cmd_random_test(count, seed, iter, &bounds, budget, format),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
