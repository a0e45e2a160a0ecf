//! Exact expected payoff of finite Markov chains with parity and terminal payoffs.
//!
//! The chain is split into strongly connected components. Terminal states pay
//! their reward, bottom components pay 1 iff their largest priority is even,
//! and every other component is transient: its values solve a small linear
//! system against the already-solved components downstream of it.

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::plts::Probability;

/// Numbers the block solver can run on.
pub(crate) trait Scalar: Clone + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_probability(p: &Probability) -> Self;
    fn from_reward(r: f64) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    /// Pivot quality; zero means unusable.
    fn magnitude(&self) -> f64;
    fn to_f64(&self) -> f64;
    /// Removes rounding drift outside `[0, 1]`; values solved here are
    /// probabilities.
    fn clamp_unit(self) -> Self;
    /// Whether an iterative fallback is available when elimination fails.
    const APPROXIMATE: bool;
}

impl Scalar for f64 {
    const APPROXIMATE: bool = true;

    fn clamp_unit(self) -> Self {
        self.clamp(0.0, 1.0)
    }

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_probability(p: &Probability) -> Self {
        p.value()
    }
    fn from_reward(r: f64) -> Self {
        r
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    const APPROXIMATE: bool = false;

    fn clamp_unit(self) -> Self {
        self
    }

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_probability(p: &Probability) -> Self {
        match p {
            Probability::Exact(r) => r.clone(),
            Probability::Approx(x) => BigRational::from_float(*x).expect("finite probability"),
        }
    }
    fn from_reward(r: f64) -> Self {
        BigRational::from_float(r).expect("finite reward")
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn magnitude(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            ToPrimitive::to_f64(&self.abs()).unwrap_or(f64::MAX).max(f64::MIN_POSITIVE)
        }
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// A chain in compressed sparse row form.
pub(crate) struct Graph<'a, T> {
    pub offsets: &'a [usize],
    pub targets: &'a [usize],
    pub weights: &'a [T],
    pub reward: &'a [Option<T>],
    pub priority: &'a [u32],
}

impl<T> Graph<'_, T> {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edges(&self, s: usize) -> std::ops::Range<usize> {
        self.offsets[s]..self.offsets[s + 1]
    }
}

/// Strongly connected components, numbered so that every edge leads to a
/// component with an equal or smaller number (sinks first).
#[derive(Debug, Clone, Default)]
pub(crate) struct Sccs {
    pub component: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

/// Iterative Tarjan.
pub(crate) fn strongly_connected(offsets: &[usize], targets: &[usize]) -> Sccs {
    const UNVISITED: usize = usize::MAX;
    let n = offsets.len() - 1;
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut calls: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    let mut out = Sccs {
        component: vec![UNVISITED; n],
        members: Vec::new(),
    };
    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        calls.push((root, offsets[root]));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, edge)) = calls.last() {
            if edge < offsets[v + 1] {
                let w = targets[edge];
                calls.last_mut().unwrap().1 += 1;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    calls.push((w, offsets[w]));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                calls.pop();
                if let Some(&(parent, _)) = calls.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let id = out.members.len();
                    let mut members = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        out.component[w] = id;
                        members.push(w);
                        if w == v {
                            break;
                        }
                    }
                    members.sort_unstable();
                    out.members.push(members);
                }
            }
        }
    }
    out
}

/// Where a run of the chain ends up with probability one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AbsorbingClass {
    /// A terminal state (local index).
    Terminal(usize),
    /// A bottom strongly connected component, with the largest priority in it.
    Bottom { component: usize, max_priority: u32 },
}

/// The absorbing class of component `c`, or `None` when it is transient.
pub(crate) fn absorbing_class<T>(g: &Graph<'_, T>, sccs: &Sccs, c: usize) -> Option<AbsorbingClass> {
    let members = &sccs.members[c];
    if let [s] = members.as_slice() {
        if g.edges(*s).is_empty() {
            return Some(AbsorbingClass::Terminal(*s));
        }
    }
    let closed = members
        .iter()
        .all(|&s| g.edges(s).all(|e| sccs.component[g.targets[e]] == c));
    closed.then(|| AbsorbingClass::Bottom {
        component: c,
        max_priority: members.iter().map(|&s| g.priority[s]).max().unwrap(),
    })
}

/// The payoff of an absorbing class: the reward of a terminal, or the parity
/// of the largest priority of a bottom component.
pub(crate) fn class_payoff<T: Scalar>(g: &Graph<'_, T>, class: AbsorbingClass) -> T {
    match class {
        AbsorbingClass::Terminal(s) => g.reward[s].clone().expect("terminal state without reward"),
        AbsorbingClass::Bottom { max_priority, .. } => {
            if max_priority % 2 == 0 {
                T::one()
            } else {
                T::zero()
            }
        }
    }
}

/// For every state, the expected value of `class_value` over the absorbing
/// class the chain ends in.
pub(crate) fn absorbing_values<T: Scalar>(
    g: &Graph<'_, T>,
    sccs: &Sccs,
    class_value: impl Fn(AbsorbingClass) -> T,
) -> Vec<T> {
    let mut value = vec![T::zero(); g.len()];
    for (c, members) in sccs.members.iter().enumerate() {
        if let Some(class) = absorbing_class(g, sccs, c) {
            let v = class_value(class);
            for &s in members {
                value[s] = v.clone();
            }
            continue;
        }
        // Transient block: x_s - sum_{t in C} w x_t = sum_{t not in C} w value_t.
        let k = members.len();
        let local = |s: usize| members.binary_search(&s).ok();
        let mut a = vec![vec![T::zero(); k]; k];
        let mut b = vec![T::zero(); k];
        for (i, &s) in members.iter().enumerate() {
            a[i][i] = T::one();
            for e in g.edges(s) {
                let t = g.targets[e];
                let w = &g.weights[e];
                match local(t) {
                    Some(j) => a[i][j] = a[i][j].sub(w),
                    None => b[i] = b[i].add(&w.mul(&value[t])),
                }
            }
        }
        let x = if k == 1 {
            Some(vec![b[0].div(&a[0][0])])
        } else {
            eliminate(a.clone(), b.clone())
        };
        let x = match x {
            Some(x) => x,
            None if T::APPROXIMATE => gauss_seidel(&a, &b),
            None => panic!("singular transient block in exact arithmetic"),
        };
        for (i, &s) in members.iter().enumerate() {
            value[s] = x[i].clone().clamp_unit();
        }
    }
    value
}

/// Pivots below this magnitude are treated as singular in floating point.
const PIVOT_FLOOR: f64 = 1e-14;

/// Gaussian elimination with partial pivoting.
pub(crate) fn eliminate<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let (pivot, best) = (col..n)
            .map(|r| (r, a[r][col].magnitude()))
            .fold((col, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let floor = if T::APPROXIMATE { PIVOT_FLOOR } else { 0.0 };
        if best <= floor {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            if a[r][col].magnitude() == 0.0 {
                continue;
            }
            let factor = a[r][col].div(&a[col][col]);
            let (top, bottom) = a.split_at_mut(r);
            for (x, y) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x = x.sub(&factor.mul(y));
            }
            let delta = factor.mul(&b[col]);
            b[r] = b[r].sub(&delta);
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..n {
            acc = acc.sub(&a[r][c].mul(&x[c]));
        }
        x[r] = acc.div(&a[r][r]);
    }
    Some(x)
}

/// Iterative fallback for an ill-conditioned transient block; stops once the
/// residual drops below 1e-12.
fn gauss_seidel<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Vec<T> {
    let n = b.len();
    let a: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(T::to_f64).collect()).collect();
    let b: Vec<f64> = b.iter().map(T::to_f64).collect();
    let mut x = vec![0.0; n];
    for _ in 0..10_000_000 {
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - off) / a[i][i];
        }
        let residual = (0..n)
            .map(|i| ((0..n).map(|j| a[i][j] * x[j]).sum::<f64>() - b[i]).abs())
            .fold(0.0, f64::max);
        if residual < 1e-12 {
            break;
        }
    }
    x.into_iter().map(T::from_reward).collect()
}
