//! Convex decompositions into permutations.
//!
//! [`birkhoff_decompose`] peels bottleneck perfect matchings off a
//! nonnegative matrix whose rows and columns all sum to the same `α`.
//! [`block_decompose`] does this per weight class of a [`BlockCoupling`],
//! and [`automorphism_measure`] assembles the per-node decompositions into a
//! product-form probability measure on `𝒜_N`.

use std::collections::HashMap;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::prob::{Node, ProbVector};
use crate::tree::TreeAutomorphism;

/// Entries at or below this are treated as zero between peels.
pub const FLUSH_TOL: f64 = 1e-12;
/// Tolerance on constant row and column sums.
pub const SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffTerm {
    pub coefficient: f64,
    /// Row `i` is matched to column `permutation[i]`.
    pub permutation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffDecomposition {
    pub n: usize,
    /// The common row/column sum of the input.
    pub alpha: f64,
    pub terms: Vec<BirkhoffTerm>,
}

impl BirkhoffDecomposition {
    /// `α · Σ c_k P_k`.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for t in &self.terms {
            for (i, &j) in t.permutation.iter().enumerate() {
                m[i][j] += self.alpha * t.coefficient;
            }
        }
        m
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient).sum()
    }
}

/// Largest entrywise difference.
pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

fn constant_sum(m: &[Vec<f64>]) -> Result<f64> {
    let n = m.len();
    if n == 0 {
        return Err(Error::NonConstantSums("empty matrix".into()));
    }
    if m.iter().any(|row| row.len() != n) {
        return Err(Error::NonConstantSums("matrix is not square".into()));
    }
    if m.iter().flatten().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::NonConstantSums(
            "entries must be finite and nonnegative".into(),
        ));
    }
    let alpha: f64 = m[0].iter().sum();
    for i in 0..n {
        let row: f64 = m[i].iter().sum();
        let col: f64 = m.iter().map(|r| r[i]).sum();
        if (row - alpha).abs() > SUM_TOL || (col - alpha).abs() > SUM_TOL {
            return Err(Error::NonConstantSums(format!(
                "row {} sums to {row}, column {} to {col}, row 1 to {alpha}",
                i + 1,
                i + 1
            )));
        }
    }
    if alpha <= FLUSH_TOL {
        return Err(Error::NonConstantSums("common sum is zero".into()));
    }
    Ok(alpha)
}

/// Kuhn augmenting-path matching of `rows` into free columns.
fn perfect_matching(allowed: &[Vec<bool>], rows: &[usize], used_cols: &[bool]) -> bool {
    let n = allowed.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(
        r: usize,
        allowed: &[Vec<bool>],
        used_cols: &[bool],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for c in 0..allowed.len() {
            if allowed[r][c] && !used_cols[c] && !seen[c] {
                seen[c] = true;
                if owner[c].is_none_or(|o| augment(o, allowed, used_cols, seen, owner)) {
                    owner[c] = Some(r);
                    return true;
                }
            }
        }
        false
    }
    rows.iter().all(|&r| {
        let mut seen = vec![false; n];
        augment(r, allowed, used_cols, &mut seen, &mut owner)
    })
}

/// Lexicographically least perfect matching inside `allowed`.
fn lex_least_matching(allowed: &[Vec<bool>]) -> Option<Vec<usize>> {
    let n = allowed.len();
    let all: Vec<usize> = (0..n).collect();
    if !perfect_matching(allowed, &all, &vec![false; n]) {
        return None;
    }
    let mut used = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    for i in 0..n {
        let rest: Vec<usize> = (i + 1..n).collect();
        let j = (0..n).find(|&j| {
            if !allowed[i][j] || used[j] {
                return false;
            }
            used[j] = true;
            let ok = perfect_matching(allowed, &rest, &used);
            used[j] = false;
            ok
        })?;
        used[j] = true;
        perm.push(j);
    }
    Some(perm)
}

/// Perfect matching maximising the minimum matched entry, ties broken by
/// the lexicographically least permutation.
fn bottleneck_matching(m: &[Vec<f64>]) -> Option<Vec<usize>> {
    let mut values: Vec<f64> = m.iter().flatten().copied().filter(|&x| x > 0.0).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let allowed_at = |t: f64| -> Vec<Vec<bool>> {
        m.iter()
            .map(|row| row.iter().map(|&x| x > 0.0 && x >= t).collect())
            .collect()
    };
    let all: Vec<usize> = (0..m.len()).collect();
    let free = vec![false; m.len()];
    if values.is_empty() || !perfect_matching(&allowed_at(values[0]), &all, &free) {
        return None;
    }
    let (mut lo, mut hi) = (0usize, values.len() - 1);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if perfect_matching(&allowed_at(values[mid]), &all, &free) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lex_least_matching(&allowed_at(values[lo]))
}

/// Greedy bottleneck peeling of a constant-sum matrix.
pub fn birkhoff_decompose(m: &[Vec<f64>]) -> Result<BirkhoffDecomposition> {
    let alpha = constant_sum(m)?;
    let n = m.len();
    let mut residual: Vec<Vec<f64>> = m.to_vec();
    let mut raw: Vec<BirkhoffTerm> = Vec::new();
    loop {
        let biggest = residual.iter().flatten().copied().fold(0.0, f64::max);
        if biggest <= FLUSH_TOL {
            break;
        }
        let Some(perm) = bottleneck_matching(&residual) else {
            if biggest <= SUM_TOL * alpha.max(1.0) {
                break;
            }
            return Err(Error::NoPerfectMatching);
        };
        let c = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| residual[i][j])
            .fold(f64::INFINITY, f64::min);
        for (i, &j) in perm.iter().enumerate() {
            residual[i][j] -= c;
        }
        for x in residual.iter_mut().flatten() {
            if *x <= FLUSH_TOL {
                *x = 0.0;
            }
        }
        match raw.iter_mut().find(|t| t.permutation == perm) {
            Some(t) => t.coefficient += c,
            None => raw.push(BirkhoffTerm {
                coefficient: c,
                permutation: perm,
            }),
        }
    }
    let total: f64 = raw.iter().map(|t| t.coefficient).sum();
    for t in &mut raw {
        t.coefficient /= total;
    }
    Ok(BirkhoffDecomposition {
        n,
        alpha,
        terms: raw,
    })
}

/// An `s × s` one-step coupling, block diagonal over the weight classes of
/// `p`, each block with row and column sums equal to the class weight.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCoupling {
    p: ProbVector,
    entries: Vec<Vec<f64>>,
}

impl BlockCoupling {
    pub const TOL: f64 = 1e-12;

    pub fn new(p: ProbVector, entries: Vec<Vec<f64>>) -> Result<Self> {
        let s = p.len();
        if entries.len() != s || entries.iter().any(|r| r.len() != s) {
            return Err(Error::InvalidCoupling(format!("expected a {s}×{s} matrix")));
        }
        for (j, row) in entries.iter().enumerate() {
            for (k, &x) in row.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::InvalidCoupling(format!(
                        "entry ({}, {}) = {x} is negative",
                        j + 1,
                        k + 1
                    )));
                }
                if !p.same_class(j, k) && x > Self::TOL {
                    return Err(Error::InvalidCoupling(format!(
                        "entry ({}, {}) couples symbols of different weight",
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
        for j in 0..s {
            let w = p.component(j);
            let row: f64 = entries[j].iter().sum();
            let col: f64 = entries.iter().map(|r| r[j]).sum();
            if (row - w).abs() > Self::TOL || (col - w).abs() > Self::TOL {
                return Err(Error::InvalidCoupling(format!(
                    "row/column {} sums to {row}/{col}, expected {w}",
                    j + 1
                )));
            }
        }
        Ok(BlockCoupling { p, entries })
    }

    /// `diag(p)`: every symbol coupled to itself.
    pub fn diagonal(p: &ProbVector) -> Self {
        let s = p.len();
        let entries = (0..s)
            .map(|j| {
                (0..s)
                    .map(|k| if j == k { p.component(j) } else { 0.0 })
                    .collect()
            })
            .collect();
        BlockCoupling {
            p: p.clone(),
            entries,
        }
    }

    /// Each class block spread evenly: entry `w / |class|`.
    pub fn uniform_blocks(p: &ProbVector) -> Self {
        let s = p.len();
        let entries = (0..s)
            .map(|j| {
                (0..s)
                    .map(|k| {
                        if p.same_class(j, k) {
                            p.component(j) / p.classes()[p.class_of(j)].len() as f64
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        BlockCoupling {
            p: p.clone(),
            entries,
        }
    }

    pub fn p(&self) -> &ProbVector {
        &self.p
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }
}

/// A finitely supported probability measure on class-preserving
/// permutations of the alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationMeasure {
    /// Sorted by permutation, masses positive.
    pub support: Vec<(Vec<usize>, f64)>,
}

impl PermutationMeasure {
    /// `Σ_π m(π)·p_j·[π(j) = k]`.
    pub fn pushforward(&self, p: &ProbVector) -> Vec<Vec<f64>> {
        let s = p.len();
        let mut out = vec![vec![0.0; s]; s];
        for (perm, mass) in &self.support {
            for (j, &k) in perm.iter().enumerate() {
                out[j][k] += mass * p.component(j);
            }
        }
        out
    }
}

/// Decomposes every class block with `α` = class weight and takes the
/// product measure over blocks.
pub fn block_decompose(c: &BlockCoupling) -> Result<PermutationMeasure> {
    let p = c.p();
    let mut support: Vec<(Vec<usize>, f64)> = vec![((0..p.len()).collect(), 1.0)];
    for class in p.classes() {
        if class.len() == 1 {
            continue;
        }
        let block: Vec<Vec<f64>> = class
            .iter()
            .map(|&j| class.iter().map(|&k| c.entries[j][k]).collect())
            .collect();
        let d = birkhoff_decompose(&block)?;
        support = support
            .into_iter()
            .flat_map(|(perm, mass)| {
                d.terms.iter().map(move |t| {
                    let mut next = perm.clone();
                    for (a, &b) in t.permutation.iter().enumerate() {
                        next[class[a]] = class[b];
                    }
                    (next, mass * t.coefficient)
                })
            })
            .collect();
    }
    support.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(PermutationMeasure { support })
}

/// A finitely supported probability measure on `𝒜_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutomorphismMeasure {
    pub height: usize,
    pub support: Vec<(TreeAutomorphism, f64)>,
}

impl AutomorphismMeasure {
    pub fn total_mass(&self) -> f64 {
        self.support.iter().map(|(_, m)| m).sum()
    }

    /// `Σ_A m(A)·w_v·[A(v) = u]`.
    pub fn pair_mass(&self, p: &ProbVector, v: &Node, u: &Node) -> Result<f64> {
        let w = crate::prob::weight(p, v)?;
        Ok(self
            .support
            .iter()
            .filter(|(a, _)| &a.map_node(v) == u)
            .map(|(_, m)| m * w)
            .sum())
    }
}

/// Couplings keyed by matched node pair `(v, u)`, `|v| = |u|`.
pub type NodeCouplings = HashMap<(Node, Node), BlockCoupling>;

/// Path masses `p(v, u)` of every node pair of length `<= height`:
/// `p(∅, ∅) = 1` and `p(j·v, k·u) = p(v, u)·M_{(v,u)}(j, k)`, so that
/// `Σ_u p(v, u) = w_v`. Only positive masses are kept.
pub fn path_masses(
    p: &ProbVector,
    couplings: &NodeCouplings,
    height: usize,
) -> Result<Vec<HashMap<(Node, Node), f64>>> {
    let s = p.len();
    let mut levels = vec![HashMap::from([((Node::root(), Node::root()), 1.0)])];
    for k in 0..height {
        let mut next = HashMap::new();
        let mut pairs: Vec<_> = levels[k].iter().collect();
        pairs.sort_by(|a, b| a.0.cmp(b.0));
        for ((v, u), &mass) in pairs {
            let c = couplings
                .get(&(v.clone(), u.clone()))
                .ok_or_else(|| missing(v, u))?;
            for j in 0..s {
                for k2 in 0..s {
                    let m = c.entries[j][k2];
                    if m > 0.0 {
                        *next.entry((v.child(j), u.child(k2))).or_insert(0.0) += mass * m;
                    }
                }
            }
        }
        levels.push(next);
    }
    Ok(levels)
}

fn missing(v: &Node, u: &Node) -> Error {
    Error::MissingCoupling {
        v: v.symbols().iter().map(|a| a + 1).collect(),
        u: u.symbols().iter().map(|a| a + 1).collect(),
    }
}

/// Product-form measure on `𝒜_N`: at every node `v`, the child permutation
/// is drawn from the block decomposition of the coupling at `(v, A(v))`,
/// independently across nodes.
pub fn automorphism_measure(
    p: &ProbVector,
    couplings: &NodeCouplings,
    height: usize,
    caps: &Caps,
) -> Result<AutomorphismMeasure> {
    if height == 0 {
        return Err(Error::Domain("height must be positive".into()));
    }
    if height > caps.measure_height {
        return Err(Error::too_large(
            "automorphism measure height",
            height,
            caps.measure_height as u64,
        ));
    }
    for (key, c) in couplings {
        if !c.p().approx_eq(p) {
            return Err(Error::InvalidCoupling(format!(
                "coupling at {:?} uses a different probability vector",
                key
            )));
        }
    }
    let s = p.len();
    let mut cache: HashMap<(Node, Node), PermutationMeasure> = HashMap::new();
    // Partial automorphisms: perms[k] for the levels built so far.
    let mut partial: Vec<(Vec<Vec<Vec<usize>>>, f64)> = vec![(Vec::new(), 1.0)];
    for k in 0..height {
        let width = s.pow(k as u32);
        let mut next = Vec::new();
        for (perms, mass) in partial {
            let a = TreeAutomorphism::from_parts_unchecked(s, k, perms.clone());
            let mut level: Vec<(Vec<Vec<usize>>, f64)> = vec![(Vec::new(), mass)];
            for idx in 0..width {
                let v = Node::from_index(k, idx, s);
                let u = a.map_node(&v);
                let key = (v, u);
                if !cache.contains_key(&key) {
                    let c = couplings.get(&key).ok_or_else(|| missing(&key.0, &key.1))?;
                    cache.insert(key.clone(), block_decompose(c)?);
                }
                let measure = &cache[&key];
                level = level
                    .into_iter()
                    .flat_map(|(row, m)| {
                        measure.support.iter().map(move |(perm, q)| {
                            let mut r = row.clone();
                            r.push(perm.clone());
                            (r, m * q)
                        })
                    })
                    .collect();
                if level.len() as u64 > caps.measure_support {
                    return Err(Error::too_large(
                        "automorphism measure support",
                        level.len(),
                        caps.measure_support,
                    ));
                }
            }
            for (row, m) in level {
                let mut full = perms.clone();
                full.push(row);
                next.push((full, m));
            }
            if next.len() as u64 > caps.measure_support {
                return Err(Error::too_large(
                    "automorphism measure support",
                    next.len(),
                    caps.measure_support,
                ));
            }
        }
        partial = next;
    }
    let support = partial
        .into_iter()
        .map(|(perms, m)| (TreeAutomorphism::from_parts_unchecked(s, height, perms), m))
        .collect();
    Ok(AutomorphismMeasure { height, support })
}
