//! Finite probabilistic labeled transition systems.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Mass tolerance for distributions given with floating-point weights.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read model file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("duplicate declaration of {0:?}")]
    Duplicate(String),
    #[error("invalid identifier {0:?}")]
    InvalidIdentifier(String),
    #[error("invalid probability {0}")]
    InvalidProbability(String),
}

/// A transition probability, kept exact when it was given as a fraction.
#[derive(Debug, Clone, PartialEq)]
pub enum Probability {
    Exact(BigRational),
    Approx(f64),
}

impl Probability {
    pub fn one() -> Probability {
        Probability::Exact(BigRational::one())
    }

    pub fn ratio(num: i64, den: i64) -> Probability {
        Probability::Exact(BigRational::new(num.into(), den.into()))
    }

    pub fn value(&self) -> f64 {
        match self {
            Probability::Exact(r) => rational_to_f64(r),
            Probability::Approx(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Probability::Exact(r) => Some(r),
            Probability::Approx(_) => None,
        }
    }

    fn is_positive(&self) -> bool {
        match self {
            Probability::Exact(r) => r.is_positive(),
            Probability::Approx(x) => *x > 0.0,
        }
    }

    /// Parses `"num/den"`, an integer or a decimal literal.
    pub fn parse(text: &str) -> Result<Probability, ModelError> {
        let bad = || ModelError::InvalidProbability(text.to_string());
        let text = text.trim();
        if let Some((num, den)) = text.split_once('/') {
            let num: BigInt = num.trim().parse().map_err(|_| bad())?;
            let den: BigInt = den.trim().parse().map_err(|_| bad())?;
            if den.is_zero() {
                return Err(bad());
            }
            return Ok(Probability::Exact(BigRational::new(num, den)));
        }
        if let Ok(n) = text.parse::<BigInt>() {
            return Ok(Probability::Exact(BigRational::from_integer(n)));
        }
        let x: f64 = text.parse().map_err(|_| bad())?;
        if !x.is_finite() {
            return Err(bad());
        }
        Ok(Probability::Approx(x))
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Probability::Exact(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Probability::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Probability::Approx(x) => write!(f, "{x}"),
        }
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A discrete distribution over model states, as `(state index, probability)`
/// pairs sorted by state index.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    entries: Vec<(usize, Probability)>,
}

impl Distribution {
    /// Builds a distribution from raw entries. Entries are sorted by state;
    /// no mass check is made here, see [`Plts::validate`].
    pub fn new(mut entries: Vec<(usize, Probability)>) -> Distribution {
        entries.sort_by_key(|(s, _)| *s);
        Distribution { entries }
    }

    pub fn dirac(state: usize) -> Distribution {
        Distribution {
            entries: vec![(state, Probability::one())],
        }
    }

    pub fn entries(&self) -> &[(usize, Probability)] {
        &self.entries
    }

    /// States with strictly positive probability.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries
            .iter()
            .filter(|(_, p)| p.is_positive())
            .map(|(s, _)| *s)
    }

    pub fn probability(&self, state: usize) -> f64 {
        self.entries
            .iter()
            .find(|(s, _)| *s == state)
            .map_or(0.0, |(_, p)| p.value())
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self.entries.as_slice(), [(_, p)] if p.value() == 1.0)
    }

    pub fn is_exact(&self) -> bool {
        self.entries.iter().all(|(_, p)| p.exact().is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// Total mass differs from one (beyond tolerance for inexact weights).
    Mass(String),
    ZeroProbability(String),
    NegativeProbability(String),
    UnknownTarget(usize),
    EmptySupport,
}

/// An invariant violation, located at the `index`-th `label` transition of `state`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub state: String,
    pub label: String,
    pub index: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = format!("({},{})", self.state, self.label);
        match &self.kind {
            ViolationKind::Mass(m) => write!(f, "distribution mass {m} ≠ 1 at {at}"),
            ViolationKind::ZeroProbability(s) => {
                write!(f, "zero-probability support entry {s} at {at}")
            }
            ViolationKind::NegativeProbability(s) => {
                write!(f, "negative probability for {s} at {at}")
            }
            ViolationKind::UnknownTarget(i) => write!(f, "undeclared target state #{i} at {at}"),
            ViolationKind::EmptySupport => write!(f, "empty distribution at {at}"),
        }
    }
}

/// A finite probabilistic labeled transition system.
///
/// `transitions[state][label]` lists the distributions reachable from `state`
/// by `label`, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Plts {
    states: Vec<String>,
    labels: Vec<String>,
    transitions: Vec<Vec<Vec<Distribution>>>,
}

impl Plts {
    pub fn new(states: Vec<String>, labels: Vec<String>) -> Result<Plts, ModelError> {
        check_names(&states)?;
        check_names(&labels)?;
        let transitions = vec![vec![Vec::new(); labels.len()]; states.len()];
        Ok(Plts {
            states,
            labels,
            transitions,
        })
    }

    /// Embeds an ordinary labeled transition system: every edge `p -a-> q`
    /// becomes a transition to the Dirac distribution on `q`.
    pub fn embed_lts(
        states: &[&str],
        edges: &[(&str, &str, &str)],
    ) -> Result<Plts, ModelError> {
        let mut labels: Vec<String> = Vec::new();
        for (_, a, _) in edges {
            if !labels.iter().any(|l| l == a) {
                labels.push(a.to_string());
            }
        }
        let mut m = Plts::new(states.iter().map(|s| s.to_string()).collect(), labels)?;
        for (p, a, q) in edges {
            let q = m.state_index(q)?;
            m.add_transition(p, a, Distribution::dirac(q))?;
        }
        Ok(m)
    }

    pub fn add_transition(
        &mut self,
        from: &str,
        label: &str,
        dist: Distribution,
    ) -> Result<(), ModelError> {
        let p = self.state_index(from)?;
        let a = self.label_index(label)?;
        self.transitions[p][a].push(dist);
        Ok(())
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_index(&self, name: &str) -> Result<usize, ModelError> {
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| ModelError::UnknownState(name.to_string()))
    }

    pub fn label_index(&self, name: &str) -> Result<usize, ModelError> {
        self.labels
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| ModelError::UnknownLabel(name.to_string()))
    }

    /// Distributions reachable from `state` by `label`. Unknown labels have none.
    pub fn successors(&self, state: usize, label: &str) -> &[Distribution] {
        match self.labels.iter().position(|l| l == label) {
            Some(a) => &self.transitions[state][a],
            None => &[],
        }
    }

    pub fn successors_by_index(&self, state: usize, label: usize) -> &[Distribution] {
        &self.transitions[state][label]
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.iter().flatten().map(Vec::len).sum()
    }

    /// True when every probability is an exact rational.
    pub fn is_exact(&self) -> bool {
        self.transitions
            .iter()
            .flatten()
            .flatten()
            .all(Distribution::is_exact)
    }

    /// Checks the distribution invariants: positive entries over declared
    /// states summing to one.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (p, by_label) in self.transitions.iter().enumerate() {
            for (a, dists) in by_label.iter().enumerate() {
                for (index, d) in dists.iter().enumerate() {
                    let mut report = |kind| {
                        out.push(Violation {
                            state: self.states[p].clone(),
                            label: self.labels[a].clone(),
                            index,
                            kind,
                        })
                    };
                    if d.entries.is_empty() {
                        report(ViolationKind::EmptySupport);
                        continue;
                    }
                    for (q, prob) in &d.entries {
                        let name = self
                            .states
                            .get(*q)
                            .cloned()
                            .unwrap_or_else(|| format!("#{q}"));
                        if *q >= self.states.len() {
                            report(ViolationKind::UnknownTarget(*q));
                        } else if prob.value() == 0.0 && !prob.is_positive() {
                            report(ViolationKind::ZeroProbability(name));
                        } else if !prob.is_positive() {
                            report(ViolationKind::NegativeProbability(name));
                        }
                    }
                    if d.is_exact() {
                        let total: BigRational = d
                            .entries
                            .iter()
                            .map(|(_, p)| p.exact().unwrap().clone())
                            .sum();
                        if !total.is_one() {
                            report(ViolationKind::Mass(
                                Probability::Exact(total).to_string(),
                            ));
                        }
                    } else {
                        let total: f64 = d.entries.iter().map(|(_, p)| p.value()).sum();
                        if (total - 1.0).abs() > MASS_TOLERANCE {
                            report(ViolationKind::Mass(total.to_string()));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Plts, ModelError> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Plts, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Plts::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("model serializes")
    }

    fn to_file(&self) -> ModelFile {
        let mut transitions = Vec::new();
        for (p, by_label) in self.transitions.iter().enumerate() {
            for (a, dists) in by_label.iter().enumerate() {
                for d in dists {
                    let dist = d
                        .entries
                        .iter()
                        .map(|(q, prob)| (self.states[*q].clone(), probability_json(prob)))
                        .collect();
                    transitions.push(TransitionFile {
                        from: self.states[p].clone(),
                        label: self.labels[a].clone(),
                        dist,
                    });
                }
            }
        }
        ModelFile {
            states: self.states.clone(),
            labels: self.labels.clone(),
            transitions,
        }
    }
}

fn check_names(names: &[String]) -> Result<(), ModelError> {
    for (i, n) in names.iter().enumerate() {
        if !crate::formula::is_identifier(n) {
            return Err(ModelError::InvalidIdentifier(n.clone()));
        }
        if names[..i].contains(n) {
            return Err(ModelError::Duplicate(n.clone()));
        }
    }
    Ok(())
}

fn probability_json(p: &Probability) -> Value {
    match p {
        Probability::Exact(r) if r.is_integer() => match r.numer().to_i64() {
            Some(n) => Value::from(n),
            None => Value::from(p.to_string()),
        },
        Probability::Exact(_) => Value::from(p.to_string()),
        Probability::Approx(x) => Value::from(*x),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    states: Vec<String>,
    #[serde(default)]
    labels: Vec<String>,
    #[serde(default)]
    transitions: Vec<TransitionFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TransitionFile {
    from: String,
    label: String,
    dist: BTreeMap<String, Value>,
}

impl ModelFile {
    fn into_model(self) -> Result<Plts, ModelError> {
        let mut m = Plts::new(self.states, self.labels)?;
        let mut parsed = Vec::with_capacity(self.transitions.len());
        let mut all_exact = true;
        for t in &self.transitions {
            let mut entries = Vec::with_capacity(t.dist.len());
            for (q, v) in &t.dist {
                let q = m.state_index(q)?;
                let prob = match v {
                    Value::String(s) => Probability::parse(s)?,
                    Value::Number(n) if n.is_i64() || n.is_u64() => {
                        Probability::parse(&n.to_string())?
                    }
                    Value::Number(n) => Probability::Approx(n.as_f64().unwrap()),
                    other => return Err(ModelError::InvalidProbability(other.to_string())),
                };
                all_exact &= prob.exact().is_some();
                entries.push((q, prob));
            }
            parsed.push(entries);
        }
        for (t, mut entries) in self.transitions.iter().zip(parsed) {
            if !all_exact {
                for (_, p) in entries.iter_mut() {
                    *p = Probability::Approx(p.value());
                }
            }
            m.add_transition(&t.from, &t.label, Distribution::new(entries))?;
        }
        Ok(m)
    }
}

/// Denominator exponent for generated probabilities: every weight is a
/// multiple of `2^-RANDOM_DYADIC_BITS`.
const RANDOM_DYADIC_BITS: u32 = 3;

/// Generates a valid random model deterministically from `seed`.
///
/// Each `(state, label)` pair gets `0..=max_branching` transitions; each
/// distribution has between one and `max_support` distinct targets with
/// dyadic weights summing to one.
pub fn random_plts(
    n_states: usize,
    labels: &[&str],
    max_branching: usize,
    max_support: usize,
    seed: u64,
) -> Plts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_plts_with(&mut rng, n_states, labels, max_branching, max_support)
}

pub(crate) fn random_plts_with(
    rng: &mut impl Rng,
    n_states: usize,
    labels: &[&str],
    max_branching: usize,
    max_support: usize,
) -> Plts {
    let states = (0..n_states).map(|i| format!("s{i}")).collect();
    let mut m = Plts::new(states, labels.iter().map(|l| l.to_string()).collect())
        .expect("generated names are valid");
    let units = 1usize << RANDOM_DYADIC_BITS;
    let max_support = max_support.min(n_states).min(units);
    if max_support == 0 {
        return m;
    }
    for p in 0..n_states {
        for a in 0..labels.len() {
            let count = rng.gen_range(0..=max_branching);
            for _ in 0..count {
                let size = rng.gen_range(1..=max_support);
                let mut targets = sample(rng, n_states, size).into_vec();
                targets.sort_unstable();
                // Random composition of `units` into `size` positive parts.
                let mut cuts: Vec<usize> = sample(rng, units - 1, size - 1)
                    .into_iter()
                    .map(|c| c + 1)
                    .collect();
                cuts.sort_unstable();
                cuts.push(units);
                let mut prev = 0;
                let entries = targets
                    .into_iter()
                    .zip(cuts)
                    .map(|(q, cut)| {
                        let w = cut - prev;
                        prev = cut;
                        (q, Probability::ratio(w as i64, units as i64))
                    })
                    .collect();
                m.transitions[p][a].push(Distribution::new(entries));
            }
        }
    }
    m
}

/// The two-state model with `p -a-> {p: 1/3, q: 2/3}` and `p -a-> {q: 1}`.
pub fn figure_one() -> Plts {
    let mut m = Plts::new(vec!["p".into(), "q".into()], vec!["a".into()]).unwrap();
    m.add_transition(
        "p",
        "a",
        Distribution::new(vec![(0, Probability::ratio(1, 3)), (1, Probability::ratio(2, 3))]),
    )
    .unwrap();
    m.add_transition("p", "a", Distribution::dirac(1)).unwrap();
    m
}
