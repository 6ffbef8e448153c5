//! Probability vectors, weight classes and nodes of the p-tree.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Tolerance for component sums and for weight-class equality.
pub const CLASS_TOL: f64 = 1e-12;

/// A probability vector `p = (p_1, ..., p_s)` with `s >= 2` and strictly
/// positive components, together with its partition into weight classes
/// (maximal groups of equal components).
///
/// Classes are ordered by their smallest member; members are ascending.
#[derive(Debug, Clone)]
pub struct ProbVector {
    components: Vec<f64>,
    exact: Option<Vec<Rational>>,
    class_of: Vec<usize>,
    classes: Vec<Vec<usize>>,
}

impl ProbVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::InvalidProbVector(format!(
                "need at least 2 components, got {}",
                components.len()
            )));
        }
        if let Some(bad) = components.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::InvalidProbVector(format!(
                "component {bad} is not strictly positive"
            )));
        }
        let sum: f64 = components.iter().sum();
        if (sum - 1.0).abs() > CLASS_TOL {
            return Err(Error::InvalidProbVector(format!(
                "components sum to {sum}, not 1"
            )));
        }
        let (class_of, classes) = group_classes(&components, |a, b| {
            (components[a] - components[b]).abs() <= CLASS_TOL
        })?;
        Ok(ProbVector {
            components,
            exact: None,
            class_of,
            classes,
        })
    }

    /// Builds the vector from exact fractions; classes are exact equality.
    pub fn from_rationals(exact: Vec<Rational>) -> Result<Self> {
        if exact.len() < 2 {
            return Err(Error::InvalidProbVector(format!(
                "need at least 2 components, got {}",
                exact.len()
            )));
        }
        let zero = Rational::from_integer(0.into());
        if let Some(bad) = exact.iter().find(|c| **c <= zero) {
            return Err(Error::InvalidProbVector(format!(
                "component {} is not strictly positive",
                rational::display(bad)
            )));
        }
        let total: Rational = exact.iter().cloned().sum();
        let components: Vec<f64> = exact.iter().map(rational::to_f64).collect();
        if (rational::to_f64(&total) - 1.0).abs() > CLASS_TOL {
            return Err(Error::InvalidProbVector(format!(
                "components sum to {}, not 1",
                rational::display(&total)
            )));
        }
        let (class_of, classes) = group_classes(&components, |a, b| exact[a] == exact[b])?;
        Ok(ProbVector {
            components,
            exact: Some(exact),
            class_of,
            classes,
        })
    }

    /// Parses each entry with [`rational::parse_rational`].
    pub fn parse<S: AsRef<str>>(entries: &[S]) -> Result<Self> {
        let exact = entries
            .iter()
            .map(|e| rational::parse_rational(e.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rationals(exact)
    }

    pub fn uniform(s: usize) -> Result<Self> {
        let one = Rational::from_integer(1.into());
        let share = one / Rational::from_integer((s as i64).into());
        Self::from_rationals(vec![share; s])
    }

    /// Alphabet size `s`.
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn component(&self, j: usize) -> f64 {
        self.components[j]
    }

    pub fn exact(&self) -> Option<&[Rational]> {
        self.exact.as_deref()
    }

    /// Human-readable component, exact when available.
    pub fn display_component(&self, j: usize) -> String {
        match &self.exact {
            Some(e) => rational::display(&e[j]),
            None => format!("{}", self.components[j]),
        }
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of(&self, j: usize) -> usize {
        self.class_of[j]
    }

    pub fn class_weight(&self, class: usize) -> f64 {
        self.components[self.classes[class][0]]
    }

    /// Class indices sorted by ascending weight (ties cannot occur).
    pub fn classes_by_weight(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.classes.len()).collect();
        order.sort_by(|a, b| {
            self.class_weight(*a)
                .partial_cmp(&self.class_weight(*b))
                .unwrap_or(Ordering::Equal)
        });
        order
    }

    pub fn same_class(&self, a: usize, b: usize) -> bool {
        self.class_of[a] == self.class_of[b]
    }

    pub fn is_uniform(&self) -> bool {
        self.classes.len() == 1
    }

    /// Component-wise equality within [`CLASS_TOL`].
    pub fn approx_eq(&self, other: &ProbVector) -> bool {
        self.len() == other.len()
            && self
                .components
                .iter()
                .zip(&other.components)
                .all(|(a, b)| (a - b).abs() <= CLASS_TOL)
    }

    /// Number of class-preserving permutations of the alphabet.
    pub fn class_permutation_count(&self) -> u128 {
        self.classes
            .iter()
            .map(|c| (1..=c.len() as u128).product::<u128>())
            .product()
    }

    /// All class-preserving permutations of `0..s`, in lexicographic order.
    pub fn class_permutations(&self) -> Vec<Vec<usize>> {
        let s = self.len();
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(s);
        let mut used = vec![false; s];
        fn rec(
            p: &ProbVector,
            current: &mut Vec<usize>,
            used: &mut [bool],
            out: &mut Vec<Vec<usize>>,
        ) {
            let j = current.len();
            if j == p.len() {
                out.push(current.clone());
                return;
            }
            for &k in &p.classes[p.class_of[j]] {
                if !used[k] {
                    used[k] = true;
                    current.push(k);
                    rec(p, current, used, out);
                    current.pop();
                    used[k] = false;
                }
            }
        }
        rec(self, &mut current, &mut used, &mut out);
        out
    }

    /// Weights of all nodes of length `k`, indexed by [`Node::index`].
    pub fn level_weights(&self, k: usize) -> Vec<f64> {
        let mut level = vec![1.0];
        for _ in 0..k {
            let mut next = Vec::with_capacity(level.len() * self.len());
            for &pj in &self.components {
                next.extend(level.iter().map(|w| pj * w));
            }
            level = next;
        }
        level
    }
}

impl PartialEq for ProbVector {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other)
    }
}

fn group_classes(
    components: &[f64],
    same: impl Fn(usize, usize) -> bool,
) -> Result<(Vec<usize>, Vec<Vec<usize>>)> {
    let mut class_of = vec![usize::MAX; components.len()];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for j in 0..components.len() {
        if class_of[j] != usize::MAX {
            continue;
        }
        let id = classes.len();
        let members: Vec<usize> = (j..components.len())
            .filter(|&k| class_of[k] == usize::MAX && same(j, k))
            .collect();
        for &k in &members {
            class_of[k] = id;
        }
        classes.push(members);
    }
    // Tolerance grouping must be transitive for classes to be well defined.
    for a in 0..components.len() {
        for b in 0..components.len() {
            if same(a, b) != (class_of[a] == class_of[b]) {
                return Err(Error::InvalidProbVector(format!(
                    "components {} and {} make weight classes ambiguous",
                    components[a], components[b]
                )));
            }
        }
    }
    Ok((class_of, classes))
}

impl fmt::Display for ProbVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (0..self.len()).map(|j| self.display_component(j)).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Entropy `h(p) = -Σ p_j log₂ p_j`, in bits.
pub fn entropy(p: &ProbVector) -> f64 {
    -p.components().iter().map(|x| x * x.log2()).sum::<f64>()
}

/// Weight `w_v = Π p_{a_i}` of a node; the root has weight 1.
pub fn weight(p: &ProbVector, v: &Node) -> Result<f64> {
    v.validate(p.len())?;
    Ok(v.symbols().iter().map(|&a| p.component(a)).product())
}

/// A node of the p-tree: a finite sequence of (0-based) symbols.
///
/// The parent of `v = (a_1, ..., a_n)` is `σ(v) = (a_2, ..., a_n)`; the
/// children of `u` are the nodes `j·u` obtained by prepending a symbol.
/// Nodes order by length, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Node(Vec<usize>);

impl Node {
    pub fn root() -> Self {
        Node(Vec::new())
    }

    pub fn new(symbols: Vec<usize>) -> Self {
        Node(symbols)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, s: usize) -> Result<()> {
        match self.0.iter().find(|&&a| a >= s) {
            Some(&symbol) => Err(Error::InvalidNode {
                symbol,
                alphabet: s,
            }),
            None => Ok(()),
        }
    }

    /// `σ(v)`: drops the leftmost symbol. The root maps to itself.
    pub fn sigma(&self) -> Node {
        Node(self.0.iter().skip(1).copied().collect())
    }

    /// The child `j·v`.
    pub fn child(&self, j: usize) -> Node {
        let mut symbols = Vec::with_capacity(self.0.len() + 1);
        symbols.push(j);
        symbols.extend_from_slice(&self.0);
        Node(symbols)
    }

    /// Lexicographic rank among the nodes of the same length.
    pub fn index(&self, s: usize) -> usize {
        self.0.iter().fold(0, |acc, &a| acc * s + a)
    }

    pub fn from_index(len: usize, mut index: usize, s: usize) -> Node {
        let mut symbols = vec![0; len];
        for slot in symbols.iter_mut().rev() {
            *slot = index % s;
            index /= s;
        }
        Node(symbols)
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

/// Rank of the child `j·u` at length `k + 1`, where `u` has rank `parent` at
/// length `k`.
#[inline]
pub(crate) fn child_index(j: usize, parent: usize, level_size: usize) -> usize {
    j * level_size + parent
}
