//! Compilation of a formula, model and valuation into a 2½-player parity game.
//!
//! Positions pair a model state (or a distribution chosen at some state) with
//! a subformula. Player 1 owns diamonds, disjunctions and `mu` positions,
//! Player 2 owns boxes, conjunctions and `nu` positions, and Nature resolves
//! distribution positions. Infinite plays are won by Player 1 iff the highest
//! priority seen infinitely often is even; finite plays pay the terminal reward.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::denotational::Valuation;
use crate::formula::{Fixpoint, FormulaError, Node, SubformulaTable};
use crate::formula::Formula;
use crate::plts::{Plts, Probability};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArenaError {
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("free variable {0} has no valuation entry")]
    UnboundVariable(String),
    #[error("valuation for {0} does not match the model size")]
    DomainMismatch(String),
    #[error("exactly one of terminal state and infinite priority set must be given")]
    AmbiguousPlay,
    #[error("state {0} is not terminal")]
    NotTerminal(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Position {
    /// Model state `state` paired with subformula `sub`.
    Process { state: usize, sub: usize },
    /// The `index`-th `label`-distribution of `source`, paired with `sub`.
    Distribution {
        source: usize,
        label: usize,
        index: usize,
        sub: usize,
    },
}

impl Position {
    pub fn sub(&self) -> usize {
        match *self {
            Position::Process { sub, .. } | Position::Distribution { sub, .. } => sub,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Owner {
    Player1,
    Player2,
    Nature,
}

impl Owner {
    pub fn tag(self) -> &'static str {
        match self {
            Owner::Player1 => "P1",
            Owner::Player2 => "P2",
            Owner::Nature => "N",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArenaState {
    pub position: Position,
    pub owner: Owner,
    pub priority: u32,
    /// Set exactly on terminal states.
    pub reward: Option<f64>,
    pub successors: Vec<usize>,
    /// For Nature states, the probability of each successor (same order).
    pub probabilities: Vec<Probability>,
}

impl ArenaState {
    pub fn is_terminal(&self) -> bool {
        self.successors.is_empty()
    }

    /// Whether a player picks the successor here.
    pub fn is_choice(&self) -> bool {
        self.owner != Owner::Nature && !self.is_terminal()
    }
}

#[derive(Debug, Clone)]
pub struct Arena {
    states: Vec<ArenaState>,
    index: HashMap<Position, usize>,
    table: SubformulaTable,
    priorities: HashMap<String, u32>,
    model_states: Vec<String>,
    model_labels: Vec<String>,
}

/// Assigns each bound variable the least priority of its parity (odd for `mu`,
/// even for `nu`) exceeding the priority of every variable it subsumes.
/// Variables are handled innermost first.
pub fn variable_priorities(table: &SubformulaTable) -> HashMap<String, u32> {
    let mut out: HashMap<String, u32> = HashMap::new();
    let vars = table.bound_vars();
    for x in vars.iter().rev() {
        let binder = table.binder(x).unwrap();
        let floor = vars
            .iter()
            .filter(|y| table.subsumes(x, y).unwrap())
            .map(|y| out[y.as_str()])
            .max()
            .unwrap_or(0);
        let parity = match binder.kind {
            Fixpoint::Mu => 1,
            Fixpoint::Nu => 0,
        };
        let mut p = floor + 1;
        if p % 2 != parity {
            p += 1;
        }
        out.insert(x.clone(), p);
    }
    out
}

/// Builds the game for `f` from every start position `<p, f>`, keeping only
/// reachable positions. Exploration is breadth-first from the start positions
/// in model order, so identical inputs give identical arenas.
pub fn build_arena(f: &Formula, m: &Plts, rho: &Valuation) -> Result<Arena, ArenaError> {
    let table = SubformulaTable::new(f)?;
    for x in f.free_vars() {
        let v = rho.get(&x).ok_or_else(|| ArenaError::UnboundVariable(x.clone()))?;
        if v.len() != m.len() {
            return Err(ArenaError::DomainMismatch(x));
        }
    }
    let priorities = variable_priorities(&table);
    let mut arena = Arena {
        states: Vec::new(),
        index: HashMap::new(),
        table,
        priorities,
        model_states: m.states().to_vec(),
        model_labels: m.labels().to_vec(),
    };
    let mut queue = VecDeque::new();
    for p in 0..m.len() {
        let pos = Position::Process {
            state: p,
            sub: arena.table.root(),
        };
        arena.intern(pos, &mut queue);
    }
    while let Some(i) = queue.pop_front() {
        arena.expand(i, m, rho, &mut queue);
    }
    Ok(arena)
}

impl Arena {
    fn intern(&mut self, pos: Position, queue: &mut VecDeque<usize>) -> usize {
        if let Some(&i) = self.index.get(&pos) {
            return i;
        }
        let i = self.states.len();
        self.states.push(ArenaState {
            position: pos,
            owner: Owner::Nature,
            priority: 0,
            reward: None,
            successors: Vec::new(),
            probabilities: Vec::new(),
        });
        self.index.insert(pos, i);
        queue.push_back(i);
        i
    }

    fn expand(&mut self, i: usize, m: &Plts, rho: &Valuation, queue: &mut VecDeque<usize>) {
        let pos = self.states[i].position;
        let mut owner = Owner::Nature;
        let mut priority = 0;
        let mut reward = None;
        let mut successors = Vec::new();
        let mut probabilities = Vec::new();
        match pos {
            Position::Distribution {
                source,
                label,
                index,
                sub,
            } => {
                let d = &m.successors_by_index(source, label)[index];
                for (q, prob) in d.entries() {
                    if prob.value() > 0.0 {
                        successors.push(self.intern(Position::Process { state: *q, sub }, queue));
                        probabilities.push(prob.clone());
                    }
                }
            }
            Position::Process { state, sub } => match self.table.node(sub).clone() {
                Node::Var(x) => match self.table.binder(&x) {
                    None => {
                        owner = Owner::Player1;
                        reward = Some(rho.get(&x).expect("checked at build")[state]);
                    }
                    Some(b) => {
                        owner = match b.kind {
                            Fixpoint::Mu => Owner::Player1,
                            Fixpoint::Nu => Owner::Player2,
                        };
                        priority = self.priorities[&x];
                        let body = b.body;
                        successors.push(self.intern(Position::Process { state, sub: body }, queue));
                    }
                },
                Node::Fix(kind, _, body) => {
                    owner = match kind {
                        Fixpoint::Mu => Owner::Player1,
                        Fixpoint::Nu => Owner::Player2,
                    };
                    successors.push(self.intern(Position::Process { state, sub: body }, queue));
                }
                Node::Or(l, r) | Node::And(l, r) => {
                    owner = if matches!(self.table.node(sub), Node::Or(..)) {
                        Owner::Player1
                    } else {
                        Owner::Player2
                    };
                    successors.push(self.intern(Position::Process { state, sub: l }, queue));
                    let right = self.intern(Position::Process { state, sub: r }, queue);
                    if !successors.contains(&right) {
                        successors.push(right);
                    }
                }
                Node::Diamond(a, child) | Node::Box(a, child) => {
                    let diamond = matches!(self.table.node(sub), Node::Diamond(..));
                    owner = if diamond { Owner::Player1 } else { Owner::Player2 };
                    if let Ok(label) = m.label_index(&a) {
                        for index in 0..m.successors_by_index(state, label).len() {
                            successors.push(self.intern(
                                Position::Distribution {
                                    source: state,
                                    label,
                                    index,
                                    sub: child,
                                },
                                queue,
                            ));
                        }
                    }
                    if successors.is_empty() {
                        reward = Some(if diamond { 0.0 } else { 1.0 });
                    }
                }
            },
        }
        let s = &mut self.states[i];
        s.owner = owner;
        s.priority = priority;
        s.reward = reward;
        s.successors = successors;
        s.probabilities = probabilities;
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ArenaState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &ArenaState {
        &self.states[i]
    }

    pub fn table(&self) -> &SubformulaTable {
        &self.table
    }

    pub fn variable_priority(&self, x: &str) -> Option<u32> {
        self.priorities.get(x).copied()
    }

    pub fn index_of(&self, pos: &Position) -> Option<usize> {
        self.index.get(pos).copied()
    }

    /// The start position `<p, F>` for model state `p`.
    pub fn start(&self, p: usize) -> usize {
        self.index[&Position::Process {
            state: p,
            sub: self.table.root(),
        }]
    }

    /// Start positions in model state order.
    pub fn starts(&self) -> Vec<usize> {
        (0..self.model_states.len()).map(|p| self.start(p)).collect()
    }

    pub fn is_exact(&self) -> bool {
        self.states
            .iter()
            .all(|s| s.probabilities.iter().all(|p| p.exact().is_some()))
    }

    pub fn distinct_priorities(&self) -> BTreeSet<u32> {
        self.states.iter().map(|s| s.priority).collect()
    }

    /// Whether the game graph has a cycle.
    pub fn has_cycle(&self) -> bool {
        // Kahn's algorithm: a cycle exists iff some state is never released.
        let mut indegree = vec![0usize; self.len()];
        for s in &self.states {
            for &t in &s.successors {
                indegree[t] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..self.len()).filter(|&i| indegree[i] == 0).collect();
        let mut released = 0;
        while let Some(i) = ready.pop() {
            released += 1;
            for &t in &self.states[i].successors {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    ready.push(t);
                }
            }
        }
        released < self.len()
    }

    /// Payoff of a play: the terminal reward for finite plays, otherwise 1 iff
    /// the largest priority in `infinitely_often` is even.
    pub fn classify_play_payoff(
        &self,
        infinitely_often: &[u32],
        terminal: Option<usize>,
    ) -> Result<f64, ArenaError> {
        match (infinitely_often.is_empty(), terminal) {
            (true, Some(t)) => self.states[t].reward.ok_or(ArenaError::NotTerminal(t)),
            (false, None) => Ok(parity_payoff(infinitely_often.iter().copied())),
            _ => Err(ArenaError::AmbiguousPlay),
        }
    }

    pub fn describe(&self, i: usize) -> String {
        match self.states[i].position {
            Position::Process { state, sub } => {
                format!("<{}, {}>", self.model_states[state], self.table.formula(sub))
            }
            Position::Distribution {
                source,
                label,
                index,
                sub,
            } => format!(
                "<{}-{}#{}, {}>",
                self.model_states[source],
                self.model_labels[label],
                index,
                self.table.formula(sub)
            ),
        }
    }

    /// Line-oriented dump: `id | owner | priority | reward | successors`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.states.iter().enumerate() {
            let reward = s.reward.map_or("-".to_string(), |r| r.to_string());
            let succ: Vec<String> = if s.owner == Owner::Nature {
                s.successors
                    .iter()
                    .zip(&s.probabilities)
                    .map(|(t, p)| format!("s{t}:{p}"))
                    .collect()
            } else {
                s.successors.iter().map(|t| format!("s{t}")).collect()
            };
            writeln!(
                out,
                "s{i} {} | {} | {} | {} | {}",
                self.describe(i),
                s.owner.tag(),
                s.priority,
                reward,
                succ.join(" ")
            )
            .unwrap();
        }
        out
    }
}

impl fmt::Display for Arena {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

/// 1 if the maximum priority is even, 0 if odd.
pub fn parity_payoff(priorities: impl IntoIterator<Item = u32>) -> f64 {
    match priorities.into_iter().max() {
        Some(p) if p % 2 == 0 => 1.0,
        Some(_) => 0.0,
        None => panic!("parity payoff of an empty priority set"),
    }
}
