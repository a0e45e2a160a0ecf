use std::fmt::Write;

use serde::Serialize;

use plmu::theorem::GAP_THRESHOLD;

#[derive(Debug, Clone, Serialize)]
pub struct StateRow {
    pub state: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub denotational: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration: Option<f64>,
}

impl StateRow {
    pub fn new(state: &str) -> StateRow {
        StateRow {
            state: state.to_string(),
            denotational: None,
            lower: None,
            upper: None,
            iteration: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub denotational_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub denotational_iteration: Option<f64>,
    /// Over every arena state, not only the start positions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration_oracle: Option<f64>,
    pub max: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl GapReport {
    /// Recomputes the per-state gaps from `rows`.
    pub fn from_rows(rows: &[StateRow], iteration_oracle: Option<f64>) -> GapReport {
        let gap = |a: fn(&StateRow) -> Option<f64>, b: fn(&StateRow) -> Option<f64>| {
            rows.iter()
                .map(|r| Some((a(r)? - b(r)?).abs()))
                .collect::<Option<Vec<f64>>>()
                .filter(|_| !rows.is_empty())
                .map(|v| v.into_iter().fold(0.0, f64::max))
        };
        let denotational_lower = gap(|r| r.denotational, |r| r.lower);
        let lower_upper = gap(|r| r.lower, |r| r.upper);
        let denotational_iteration = gap(|r| r.denotational, |r| r.iteration);
        let max = [denotational_lower, lower_upper, denotational_iteration, iteration_oracle]
            .into_iter()
            .flatten()
            .fold(0.0, f64::max);
        GapReport {
            denotational_lower,
            lower_upper,
            denotational_iteration,
            iteration_oracle,
            max,
            threshold: GAP_THRESHOLD,
            passed: max <= GAP_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration: Option<f64>,
    pub denotational_iterations: usize,
    pub monotonicity_violation: f64,
}

/// Memoryless profile attaining the lower value from `state`, as
/// `[arena state, chosen successor]` pairs.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub state: String,
    pub profile: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Simulation {
    pub state: String,
    pub exact: f64,
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub z: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub formula: String,
    pub states: Vec<StateRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arena_states: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profiles: Option<u128>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaps: Option<GapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Residuals>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<Witness>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub simulation: Vec<Simulation>,
    pub elapsed_ms: f64,
}

impl Report {
    pub fn new(command: &'static str, formula: String, states: Vec<StateRow>) -> Report {
        Report {
            command,
            formula,
            states,
            arena_states: None,
            profiles: None,
            gaps: None,
            residuals: None,
            witnesses: Vec::new(),
            simulation: Vec::new(),
            elapsed_ms: 0.0,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "formula: {}", self.formula).unwrap();
        if let Some(n) = self.arena_states {
            writeln!(out, "arena states: {n}").unwrap();
        }
        if let Some(n) = self.profiles {
            writeln!(out, "memoryless profiles: {n}").unwrap();
        }
        type Column = (&'static str, fn(&StateRow) -> Option<f64>);
        let columns: [Column; 4] = [
            ("denotational", |r| r.denotational),
            ("lower", |r| r.lower),
            ("upper", |r| r.upper),
            ("iteration", |r| r.iteration),
        ];
        let shown: Vec<_> = columns
            .iter()
            .filter(|(_, get)| self.states.iter().any(|r| get(r).is_some()))
            .collect();
        if !shown.is_empty() {
            let width = self.states.iter().map(|r| r.state.len()).max().unwrap_or(5).max(5);
            write!(out, "{:width$}", "state").unwrap();
            for (name, _) in &shown {
                write!(out, "  {name:>14}").unwrap();
            }
            out.push('\n');
            for row in &self.states {
                write!(out, "{:width$}", row.state).unwrap();
                for (_, get) in &shown {
                    write!(out, "  {:>14.10}", get(row).unwrap_or(f64::NAN)).unwrap();
                }
                out.push('\n');
            }
        }
        if let Some(g) = &self.gaps {
            let fields = [
                ("|denotational - lower|", g.denotational_lower),
                ("|lower - upper|", g.lower_upper),
                ("|denotational - iteration|", g.denotational_iteration),
                ("|iteration - lower| (arena)", g.iteration_oracle),
            ];
            for (name, v) in fields {
                if let Some(v) = v {
                    writeln!(out, "{name}: {v:.3e}").unwrap();
                }
            }
            let verdict = if g.passed { "agree" } else { "DISAGREE" };
            writeln!(out, "max gap {:.3e} (threshold {:.0e}): {verdict}", g.max, g.threshold).unwrap();
        }
        if let Some(r) = &self.residuals {
            if let Some(v) = r.oracle {
                writeln!(out, "fixpoint residual (enumeration): {v:.3e}").unwrap();
            }
            if let Some(v) = r.iteration {
                writeln!(out, "fixpoint residual (iteration): {v:.3e}").unwrap();
            }
        }
        for w in &self.witnesses {
            let pairs: Vec<String> = w.profile.iter().map(|(s, t)| format!("s{s}->s{t}")).collect();
            writeln!(out, "witness from {}: {}", w.state, pairs.join(" ")).unwrap();
        }
        for s in &self.simulation {
            let z = s.z.map_or("-".to_string(), |z| format!("{z:.2}"));
            writeln!(
                out,
                "{}: exact {:.10} estimate {:.6} ± {:.6} (n={}, z={z})",
                s.state, s.exact, s.mean, s.stderr, s.samples
            )
            .unwrap();
        }
        out
    }
}
