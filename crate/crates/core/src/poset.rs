//! Finite posets, order queries, product posets and the zeta/Möbius matrices.
//!
//! A [`Poset`] stores its elements in a fixed linear extension, so element
//! handles are plain `usize` positions and every matrix built on top of it is
//! indexed in that order. With the lower-triangular convention used
//! throughout the crate, a matrix `M` belongs to the incidence algebra when
//! `M[(i, j)] != 0` only if `j ≼ i`, so incidence members are lower
//! triangular.

use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fmt;

use nalgebra::{DMatrix, Scalar};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest poset accepted by the constructors that validate input.
pub const MAX_ELEMENTS: usize = 64;

/// A finite partially ordered set indexed by a fixed linear extension.
#[derive(Clone, PartialEq, Eq)]
pub struct Poset {
    labels: Vec<String>,
    /// `leq[a][b]` is `a ≼ b`, both in linear-extension positions.
    leq: Vec<Vec<bool>>,
    /// `input_index[pos]` is the index of the element in the caller's label list.
    input_index: Vec<usize>,
}

/// The five order-theoretic neighbourhoods of an element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderSets {
    /// `↓i = { q : i ≼ q }`
    pub down: Vec<usize>,
    /// `↓↓i`
    pub strict_down: Vec<usize>,
    /// `↑i = { q : q ≼ i }`
    pub up: Vec<usize>,
    /// `↑↑i`
    pub strict_up: Vec<usize>,
    /// Elements incomparable with `i`.
    pub off: Vec<usize>,
}

impl Poset {
    /// Builds a poset from its Hasse diagram. Each pair `(a, b)` states
    /// `a ≼ b`. Non-cover pairs (a full or partial relation) are accepted and
    /// simply closed along with the covers; reflexive pairs are ignored.
    pub fn from_cover_relations<L, A, B>(labels: &[L], covers: &[(A, B)]) -> Result<Self>
    where
        L: AsRef<str>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let labels: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
        let lookup = |name: &str| -> Result<usize> {
            labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| Error::UnknownElement(name.to_string()))
        };
        let mut edges = Vec::with_capacity(covers.len());
        for (a, b) in covers {
            edges.push((lookup(a.as_ref())?, lookup(b.as_ref())?));
        }
        Self::from_index_relations(labels, &edges)
    }

    /// Same as [`Poset::from_cover_relations`] with covers given as indices
    /// into `labels`.
    pub fn from_index_relations(labels: Vec<String>, covers: &[(usize, usize)]) -> Result<Self> {
        let n = labels.len();
        if n > MAX_ELEMENTS {
            return Err(Error::TooLarge { size: n, max: MAX_ELEMENTS });
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateElement(l.clone()));
            }
        }
        let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(a, b) in covers {
            if a >= n || b >= n {
                return Err(Error::UnknownElement(format!("#{}", a.max(b))));
            }
            if a != b {
                succ[a].insert(b);
            }
        }

        // Kahn's algorithm, ties broken by the smallest input index.
        let mut indegree = vec![0usize; n];
        for s in &succ {
            for &b in s {
                indegree[b] += 1;
            }
        }
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&v| indegree[v] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for &b in &succ[v] {
                indegree[b] -= 1;
                if indegree[b] == 0 {
                    ready.push(Reverse(b));
                }
            }
        }
        if order.len() < n {
            let witness = find_cycle(&succ, &indegree)
                .into_iter()
                .map(|v| labels[v].clone())
                .collect();
            return Err(Error::Cycle { witness });
        }

        let mut position = vec![0usize; n];
        for (pos, &v) in order.iter().enumerate() {
            position[v] = pos;
        }
        // Reachability, filled in reverse topological order.
        let mut leq = vec![vec![false; n]; n];
        for pos in (0..n).rev() {
            let v = order[pos];
            leq[pos][pos] = true;
            for &b in &succ[v] {
                let bp = position[b];
                let below = leq[bp].clone();
                for (dst, &src) in leq[pos].iter_mut().zip(&below) {
                    *dst |= src;
                }
            }
        }
        let labels = order.iter().map(|&v| labels[v].clone()).collect();
        Ok(Poset { labels, leq, input_index: order })
    }

    /// Builds a poset from a full order relation given as a boolean matrix
    /// over `labels` (`relation[a][b]` is `a ≼ b`). The relation must already
    /// be reflexive, antisymmetric and transitive.
    pub fn from_relation_matrix(labels: Vec<String>, relation: &[Vec<bool>]) -> Result<Self> {
        let n = labels.len();
        if relation.len() != n || relation.iter().any(|r| r.len() != n) {
            return Err(Error::dim(format!("relation must be {n}x{n}")));
        }
        for a in 0..n {
            if !relation[a][a] {
                return Err(Error::contract(format!("relation is not reflexive at `{}`", labels[a])));
            }
            for b in 0..n {
                if a != b && relation[a][b] && relation[b][a] {
                    return Err(Error::NotAntisymmetric {
                        a: labels[a].clone(),
                        b: labels[b].clone(),
                    });
                }
                for c in 0..n {
                    if relation[a][b] && relation[b][c] && !relation[a][c] {
                        return Err(Error::contract(format!(
                            "relation is not transitive: {} ≼ {} ≼ {}",
                            labels[a], labels[b], labels[c]
                        )));
                    }
                }
            }
        }
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && relation[a][b])
            .collect();
        Self::from_index_relations(labels, &pairs)
    }

    /// Chain `1 ≼ 2 ≼ … ≼ n`.
    pub fn chain(n: usize) -> Self {
        let covers: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_index_relations(numbered(n), &covers).expect("chain is a poset")
    }

    /// `n` pairwise incomparable elements.
    pub fn antichain(n: usize) -> Self {
        Self::from_index_relations(numbered(n), &[]).expect("antichain is a poset")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels in linear-extension order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// Linear-extension position of the element called `label`.
    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownElement(label.to_string()))
    }

    /// Input index of the element at each linear-extension position.
    pub fn linear_extension(&self) -> &[usize] {
        &self.input_index
    }

    /// `a ≼ b`
    #[inline]
    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    /// `a ≺ b`
    #[inline]
    pub fn lt(&self, a: usize, b: usize) -> bool {
        a != b && self.leq[a][b]
    }

    #[inline]
    pub fn comparable(&self, a: usize, b: usize) -> bool {
        self.leq[a][b] || self.leq[b][a]
    }

    /// Entry `(row, col)` of an incidence-algebra member may be non-zero.
    #[inline]
    pub fn in_incidence_pattern(&self, row: usize, col: usize) -> bool {
        self.leq[col][row]
    }

    /// The prediction of component `component` held at subsystem
    /// `subsystem` is a free (downstream) variable, i.e. `subsystem ≼ component`.
    /// In matrix coordinates this is entry `(component, subsystem)`.
    #[inline]
    pub fn in_downstream_pattern(&self, subsystem: usize, component: usize) -> bool {
        self.leq[subsystem][component]
    }

    pub fn down(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&q| self.leq(i, q)).collect()
    }

    pub fn strict_down(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&q| self.lt(i, q)).collect()
    }

    pub fn up(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&q| self.leq(q, i)).collect()
    }

    pub fn strict_up(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&q| self.lt(q, i)).collect()
    }

    pub fn order_sets(&self, i: usize) -> Result<OrderSets> {
        if i >= self.len() {
            return Err(Error::UnknownElement(format!("#{i}")));
        }
        Ok(OrderSets {
            down: self.down(i),
            strict_down: self.strict_down(i),
            up: self.up(i),
            strict_up: self.strict_up(i),
            off: (0..self.len()).filter(|&q| !self.comparable(i, q)).collect(),
        })
    }

    pub fn order_sets_by_label(&self, label: &str) -> Result<OrderSets> {
        self.order_sets(self.index_of(label)?)
    }

    pub fn is_minimal(&self, i: usize) -> bool {
        (0..self.len()).all(|q| !self.lt(q, i))
    }

    /// All pairs `(i, j)` with `i ≼ j`, sorted by `i` then `j`.
    ///
    /// Read as entries of a local variable, pair `(i, j)` is the prediction
    /// of `x_j` held at subsystem `i`, so this ordering is column-major over
    /// the downstream pattern.
    pub fn intervals(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.leq(i, j))
            .collect()
    }

    /// Transitive reduction as `(a, b)` pairs with `a` covered by `b`.
    pub fn covers(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if self.lt(a, b) && !(0..n).any(|c| self.lt(a, c) && self.lt(c, b)) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Product poset ordered componentwise.
    ///
    /// Elements are laid out lexicographically (`self` major, `other`
    /// minor), which is a linear extension of the product order and makes
    /// `zeta(P×Q) = zeta(P) ⊗ zeta(Q)`.
    pub fn product(&self, other: &Poset) -> Poset {
        let (n, m) = (self.len(), other.len());
        let mut labels = Vec::with_capacity(n * m);
        let mut input_index = Vec::with_capacity(n * m);
        for a in 0..n {
            for b in 0..m {
                labels.push(format!("({},{})", self.labels[a], other.labels[b]));
                input_index.push(self.input_index[a] * m + other.input_index[b]);
            }
        }
        let mut leq = vec![vec![false; n * m]; n * m];
        for (x, row) in leq.iter_mut().enumerate() {
            for (y, cell) in row.iter_mut().enumerate() {
                *cell = self.leq(x / m, y / m) && other.leq(x % m, y % m);
            }
        }
        Poset { labels, leq, input_index }
    }

    /// Zeta matrix: `ζ(i, j) = 1` iff `j ≼ i`.
    pub fn zeta_matrix<T: Scalar + Zero + One>(&self) -> DMatrix<T> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| if self.leq(j, i) { T::one() } else { T::zero() })
    }

    /// Möbius matrix `μ = ζ⁻¹`, computed row by row with the recursion
    /// `μ(f)_i = f_i − Σ_{j ≺ i} μ(f)_j` in exact ring arithmetic.
    pub fn mobius_matrix<T>(&self) -> DMatrix<T>
    where
        T: Scalar + Zero + One + std::ops::Sub<Output = T> + Copy,
    {
        let n = self.len();
        let mut mu = DMatrix::<T>::zeros(n, n);
        for i in 0..n {
            mu[(i, i)] = T::one();
            for j in 0..i {
                if self.lt(j, i) {
                    for k in 0..=j {
                        mu[(i, k)] = mu[(i, k)] - mu[(j, k)];
                    }
                }
            }
        }
        debug_assert!(
            mu == self.mobius_by_substitution::<T>(),
            "Möbius recursion disagrees with substitution"
        );
        mu
    }

    /// `μ` obtained by forward substitution on `ζ μ = I`. Used to cross-check
    /// the recursive construction.
    pub fn mobius_by_substitution<T>(&self) -> DMatrix<T>
    where
        T: Scalar + Zero + One + std::ops::Sub<Output = T> + Copy,
    {
        let n = self.len();
        let zeta = self.zeta_matrix::<T>();
        let mut mu = DMatrix::<T>::zeros(n, n);
        // ζ has unit diagonal, so row i of μ is e_i − Σ_{k<i} ζ(i,k) μ(k,·).
        for col in 0..n {
            for i in 0..n {
                let mut acc = if i == col { T::one() } else { T::zero() };
                for k in 0..i {
                    if zeta[(i, k)] != T::zero() {
                        acc = acc - zeta[(i, k)] * mu[(k, col)];
                    }
                }
                mu[(i, col)] = acc;
            }
        }
        mu
    }

    /// Row-vector zeta action `f ζᵀ`, i.e. `(ζ f)_i = Σ_{j ≼ i} f_j`.
    pub fn zeta_apply<T>(&self, f: &[T]) -> Vec<T>
    where
        T: Zero + Copy,
    {
        assert_eq!(f.len(), self.len(), "one entry per element");
        (0..self.len())
            .map(|i| (0..self.len()).filter(|&j| self.leq(j, i)).fold(T::zero(), |a, j| a + f[j]))
            .collect()
    }

    /// Row-vector Möbius action `f μᵀ` via the recursion.
    pub fn mobius_apply<T>(&self, f: &[T]) -> Vec<T>
    where
        T: Zero + Copy + std::ops::Sub<Output = T>,
    {
        assert_eq!(f.len(), self.len(), "one entry per element");
        let mut out: Vec<T> = Vec::with_capacity(self.len());
        for (i, &fi) in f.iter().enumerate() {
            let upstream = (0..i).filter(|&j| self.lt(j, i)).fold(T::zero(), |a, j| a + out[j]);
            out.push(fi - upstream);
        }
        out
    }

    /// Serializable Hasse-diagram form, listing elements in input order.
    pub fn to_spec(&self) -> PosetSpec {
        let n = self.len();
        let mut by_input = vec![0usize; n];
        for (pos, &inp) in self.input_index.iter().enumerate() {
            by_input[inp] = pos;
        }
        PosetSpec {
            elements: by_input.iter().map(|&p| Label::from_str(&self.labels[p])).collect(),
            covers: self
                .covers()
                .into_iter()
                .map(|(a, b)| [Label::from_str(&self.labels[a]), Label::from_str(&self.labels[b])])
                .collect(),
        }
    }
}

impl fmt::Debug for Poset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let covers: Vec<String> = self
            .covers()
            .into_iter()
            .map(|(a, b)| format!("{}≺{}", self.labels[a], self.labels[b]))
            .collect();
        f.debug_struct("Poset")
            .field("elements", &self.labels)
            .field("covers", &covers)
            .finish()
    }
}

fn numbered(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Follows edges among the unprocessed vertices of a failed Kahn pass until
/// a vertex repeats.
fn find_cycle(succ: &[BTreeSet<usize>], indegree: &[usize]) -> Vec<usize> {
    let remaining = |v: usize| indegree[v] > 0;
    let Some(start) = (0..succ.len()).find(|&v| remaining(v)) else {
        return Vec::new();
    };
    let mut path = vec![start];
    let mut cur = start;
    loop {
        let next = succ[cur]
            .iter()
            .copied()
            .find(|&b| remaining(b))
            .expect("vertex left by Kahn has an unprocessed successor");
        if let Some(at) = path.iter().position(|&v| v == next) {
            let mut cycle = path[at..].to_vec();
            cycle.push(next);
            return cycle;
        }
        path.push(next);
        cur = next;
    }
}

/// Element label as it appears in JSON: either a number or a string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Str(String),
}

impl Label {
    fn from_str(s: &str) -> Label {
        match s.parse::<i64>() {
            Ok(v) if v.to_string() == s => Label::Int(v),
            _ => Label::Str(s.to_string()),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(v) => write!(f, "{v}"),
            Label::Str(s) => f.write_str(s),
        }
    }
}

/// JSON fragment `{"elements": [...], "covers": [[a, b], ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosetSpec {
    pub elements: Vec<Label>,
    #[serde(default)]
    pub covers: Vec<[Label; 2]>,
}

impl PosetSpec {
    pub fn build(&self) -> Result<Poset> {
        let labels: Vec<String> = self.elements.iter().map(Label::to_string).collect();
        let covers: Vec<(String, String)> = self
            .covers
            .iter()
            .map(|[a, b]| (a.to_string(), b.to_string()))
            .collect();
        Poset::from_cover_relations(&labels, &covers)
    }
}
