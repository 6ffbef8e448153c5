//! Tree names and tree automorphisms of the truncated p-tree.
//!
//! A tree name of height `N` labels every node `v` with `0 < |v| <= N`.
//! Labels are stored level by level, each level in [`Node::index`] order.
//!
//! A tree automorphism is stored in its canonical factorisation: one
//! class-preserving permutation of the alphabet per node of length `< N`,
//! acting by `A(j·u) = π_u(j)·A(u)`.

use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::prob::{child_index, Node, ProbVector};

/// Which metric a tree name's labels live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelSpace {
    /// Finite alphabet with the discrete metric.
    Discrete,
    /// Symbol × circle point, with `D = ½·discrete(symbol) + ½·arc(circle)`.
    SymbolCircle,
}

impl LabelSpace {
    pub fn name(self) -> &'static str {
        match self {
            LabelSpace::Discrete => "discrete",
            LabelSpace::SymbolCircle => "symbol-circle",
        }
    }
}

/// A tree-name label.
#[derive(Debug, Clone, Copy)]
pub enum Label {
    Symbol(u32),
    /// `fiber` is a circle point in `[0, 1)`.
    SymbolFiber {
        symbol: u32,
        fiber: f64,
    },
}

impl Label {
    pub fn space(&self) -> LabelSpace {
        match self {
            Label::Symbol(_) => LabelSpace::Discrete,
            Label::SymbolFiber { .. } => LabelSpace::SymbolCircle,
        }
    }

    /// Distance in the label's space; labels of different spaces are at
    /// distance 1.
    pub fn distance(&self, other: &Label) -> f64 {
        match (self, other) {
            (Label::Symbol(a), Label::Symbol(b)) => discrete(a == b),
            (
                Label::SymbolFiber {
                    symbol: a,
                    fiber: x,
                },
                Label::SymbolFiber {
                    symbol: b,
                    fiber: y,
                },
            ) => 0.5 * discrete(a == b) + 0.5 * arc_distance(*x, *y),
            _ => 1.0,
        }
    }
}

fn discrete(equal: bool) -> f64 {
    if equal {
        0.0
    } else {
        1.0
    }
}

/// Arc-length distance on the circle `[0, 1)`; at most ½.
pub fn arc_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Label::Symbol(a), Label::Symbol(b)) => a == b,
            (
                Label::SymbolFiber {
                    symbol: a,
                    fiber: x,
                },
                Label::SymbolFiber {
                    symbol: b,
                    fiber: y,
                },
            ) => a == b && x.to_bits() == y.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Label {}

impl Hash for Label {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Label::Symbol(a) => {
                0u8.hash(state);
                a.hash(state);
            }
            Label::SymbolFiber { symbol, fiber } => {
                1u8.hash(state);
                symbol.hash(state);
                fiber.to_bits().hash(state);
            }
        }
    }
}

/// A labelled truncated p-tree of height `N >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeName {
    p: ProbVector,
    height: usize,
    space: LabelSpace,
    levels: Vec<Vec<Label>>,
}

impl TreeName {
    /// `levels[k - 1]` holds the `s^k` labels of length-`k` nodes.
    pub fn new(p: ProbVector, space: LabelSpace, levels: Vec<Vec<Label>>) -> Result<Self> {
        let height = levels.len();
        if height == 0 {
            return Err(Error::InvalidTreeName("height must be positive".into()));
        }
        let s = p.len();
        let mut expected = 1usize;
        for (k, level) in levels.iter().enumerate() {
            expected = expected
                .checked_mul(s)
                .ok_or_else(|| Error::InvalidTreeName("tree too large".into()))?;
            if level.len() != expected {
                return Err(Error::InvalidTreeName(format!(
                    "level {} has {} labels, expected {}",
                    k + 1,
                    level.len(),
                    expected
                )));
            }
            if let Some(bad) = level.iter().find(|l| l.space() != space) {
                return Err(Error::InvalidTreeName(format!(
                    "label {bad:?} is not in the {} space",
                    space.name()
                )));
            }
            if space == LabelSpace::SymbolCircle {
                let off_circle = level.iter().any(|l| {
                    matches!(l, Label::SymbolFiber { fiber, .. } if !(0.0..1.0).contains(fiber))
                });
                if off_circle {
                    return Err(Error::InvalidTreeName("fiber outside [0, 1)".into()));
                }
            }
        }
        Ok(TreeName {
            p,
            height,
            space,
            levels,
        })
    }

    /// Labels every node with `label(v)`, visiting nodes in canonical order.
    pub fn from_fn(
        p: ProbVector,
        height: usize,
        space: LabelSpace,
        mut label: impl FnMut(&Node) -> Label,
    ) -> Result<Self> {
        let s = p.len();
        let mut levels = Vec::with_capacity(height);
        let mut size = 1usize;
        for k in 1..=height {
            size *= s;
            levels.push(
                (0..size)
                    .map(|i| label(&Node::from_index(k, i, s)))
                    .collect(),
            );
        }
        Self::new(p, space, levels)
    }

    pub fn p(&self) -> &ProbVector {
        &self.p
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn space(&self) -> LabelSpace {
        self.space
    }

    /// Labels of the length-`k` nodes, `1 <= k <= N`.
    pub fn level(&self, k: usize) -> &[Label] {
        &self.levels[k - 1]
    }

    pub fn levels(&self) -> &[Vec<Label>] {
        &self.levels
    }

    pub fn label(&self, v: &Node) -> Result<Label> {
        v.validate(self.p.len())?;
        if v.is_root() || v.len() > self.height {
            return Err(Error::InvalidTreeName(format!(
                "node of length {} is not labelled in a height-{} name",
                v.len(),
                self.height
            )));
        }
        Ok(self.levels[v.len() - 1][v.index(self.p.len())])
    }

    /// Restriction to the nodes of length `<= height`.
    pub fn truncate(&self, height: usize) -> Result<TreeName> {
        if height == 0 || height > self.height {
            return Err(Error::HeightMismatch {
                left: height,
                right: self.height,
            });
        }
        Ok(TreeName {
            p: self.p.clone(),
            height,
            space: self.space,
            levels: self.levels[..height].to_vec(),
        })
    }

    /// Returns a copy with one label replaced.
    pub fn with_label(&self, v: &Node, label: Label) -> Result<TreeName> {
        self.label(v)?;
        if label.space() != self.space {
            return Err(Error::MetricMismatch);
        }
        let mut out = self.clone();
        out.levels[v.len() - 1][v.index(self.p.len())] = label;
        Ok(out)
    }

    pub(crate) fn check_compatible(&self, other: &TreeName) -> Result<()> {
        if self.height != other.height {
            return Err(Error::HeightMismatch {
                left: self.height,
                right: other.height,
            });
        }
        if !self.p.approx_eq(&other.p) {
            return Err(Error::VectorMismatch);
        }
        if self.space != other.space {
            return Err(Error::MetricMismatch);
        }
        Ok(())
    }
}

/// Number of nodes of length `< height` (the nodes carrying a permutation).
pub fn internal_node_count(s: usize, height: usize) -> u128 {
    (0..height)
        .map(|k| (s as u128).saturating_pow(k as u32))
        .fold(0u128, u128::saturating_add)
}

/// A tree automorphism in per-node child-permutation form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeAutomorphism {
    s: usize,
    height: usize,
    /// `perms[k][i]` is the permutation at the length-`k` node of rank `i`.
    perms: Vec<Vec<Vec<usize>>>,
}

impl TreeAutomorphism {
    pub fn identity(p: &ProbVector, height: usize) -> Self {
        let s = p.len();
        let id: Vec<usize> = (0..s).collect();
        let perms = (0..height)
            .map(|k| vec![id.clone(); s.pow(k as u32)])
            .collect();
        TreeAutomorphism { s, height, perms }
    }

    /// Validates shape, bijectivity and class preservation of every
    /// permutation.
    pub fn new(p: &ProbVector, perms: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let s = p.len();
        let height = perms.len();
        for (k, level) in perms.iter().enumerate() {
            if level.len() != s.pow(k as u32) {
                return Err(Error::InvalidAutomorphism(format!(
                    "level {k} has {} permutations, expected {}",
                    level.len(),
                    s.pow(k as u32)
                )));
            }
            for perm in level {
                check_class_permutation(p, perm)?;
            }
        }
        Ok(TreeAutomorphism { s, height, perms })
    }

    pub(crate) fn from_parts_unchecked(
        s: usize,
        height: usize,
        perms: Vec<Vec<Vec<usize>>>,
    ) -> Self {
        TreeAutomorphism { s, height, perms }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn alphabet(&self) -> usize {
        self.s
    }

    pub fn perms(&self) -> &[Vec<Vec<usize>>] {
        &self.perms
    }

    /// Child permutation at a node of length `< N`.
    pub fn perm_at(&self, u: &Node) -> &[usize] {
        &self.perms[u.len()][u.index(self.s)]
    }

    pub fn is_identity(&self) -> bool {
        self.perms
            .iter()
            .flatten()
            .all(|perm| perm.iter().enumerate().all(|(j, &k)| j == k))
    }

    /// Image `A(v)` of a node of length `<= N`.
    pub fn map_node(&self, v: &Node) -> Node {
        let k = v.len();
        Node::from_index(k, self.map_index(k, v.index(self.s)), self.s)
    }

    /// Image rank of the length-`k` node of rank `index`.
    pub fn map_index(&self, k: usize, index: usize) -> usize {
        let s = self.s;
        let (mut src, mut img, mut size) = (0usize, 0usize, 1usize);
        // Walk from the root outwards: the innermost symbol is `index % s`.
        let mut digits = Vec::with_capacity(k);
        let mut rest = index;
        for _ in 0..k {
            digits.push(rest % s);
            rest /= s;
        }
        for (lvl, &a) in digits.iter().enumerate() {
            let b = self.perms[lvl][src][a];
            src = child_index(a, src, size);
            img = child_index(b, img, size);
            size *= s;
        }
        img
    }

    /// Node maps for every level: `maps[k][i]` is the image rank of the
    /// length-`k` node of rank `i` (level 0 is the root).
    pub fn node_maps(&self) -> Vec<Vec<usize>> {
        let s = self.s;
        let mut maps = vec![vec![0usize]];
        let mut size = 1usize;
        for k in 0..self.height {
            let prev = &maps[k];
            let mut next = vec![0usize; size * s];
            for (u, &img) in prev.iter().enumerate() {
                let perm = &self.perms[k][u];
                for j in 0..s {
                    next[child_index(j, u, size)] = child_index(perm[j], img, size);
                }
            }
            maps.push(next);
            size *= s;
        }
        maps
    }

    /// The automorphism `v ↦ other(self(v))`, so that applying `self` to a
    /// name already transformed by `other` equals applying the product once.
    pub fn then(&self, other: &TreeAutomorphism) -> Result<TreeAutomorphism> {
        self.check_same_shape(other)?;
        let maps = self.node_maps();
        let perms = (0..self.height)
            .map(|k| {
                self.perms[k]
                    .iter()
                    .enumerate()
                    .map(|(u, perm)| {
                        let outer = &other.perms[k][maps[k][u]];
                        perm.iter().map(|&j| outer[j]).collect()
                    })
                    .collect()
            })
            .collect();
        Ok(TreeAutomorphism::from_parts_unchecked(
            self.s,
            self.height,
            perms,
        ))
    }

    pub fn inverse(&self) -> TreeAutomorphism {
        let maps = self.node_maps();
        let perms = (0..self.height)
            .map(|k| {
                let mut level = vec![Vec::new(); maps[k].len()];
                for (u, perm) in self.perms[k].iter().enumerate() {
                    let mut inv = vec![0usize; self.s];
                    for (j, &b) in perm.iter().enumerate() {
                        inv[b] = j;
                    }
                    level[maps[k][u]] = inv;
                }
                level
            })
            .collect();
        TreeAutomorphism::from_parts_unchecked(self.s, self.height, perms)
    }

    /// Restriction to the nodes of length `<= height`.
    pub fn truncate(&self, height: usize) -> TreeAutomorphism {
        TreeAutomorphism::from_parts_unchecked(
            self.s,
            height.min(self.height),
            self.perms[..height.min(self.height)].to_vec(),
        )
    }

    fn check_same_shape(&self, other: &TreeAutomorphism) -> Result<()> {
        if self.height != other.height {
            return Err(Error::HeightMismatch {
                left: self.height,
                right: other.height,
            });
        }
        if self.s != other.s {
            return Err(Error::VectorMismatch);
        }
        Ok(())
    }
}

fn check_class_permutation(p: &ProbVector, perm: &[usize]) -> Result<()> {
    let s = p.len();
    if perm.len() != s {
        return Err(Error::InvalidAutomorphism(format!(
            "permutation {perm:?} has the wrong length"
        )));
    }
    let mut seen = vec![false; s];
    for (j, &k) in perm.iter().enumerate() {
        if k >= s || seen[k] {
            return Err(Error::InvalidAutomorphism(format!(
                "{perm:?} is not a permutation"
            )));
        }
        seen[k] = true;
        if !p.same_class(j, k) {
            return Err(Error::InvalidAutomorphism(format!(
                "{perm:?} moves symbol {j} out of its weight class"
            )));
        }
    }
    Ok(())
}

/// Size of `𝒜_N`: the class-preserving permutation count raised to the
/// number of internal nodes (saturating).
pub fn automorphism_count(p: &ProbVector, height: usize) -> u128 {
    let per_node = p.class_permutation_count();
    let nodes = internal_node_count(p.len(), height);
    let mut total: u128 = 1;
    for _ in 0..nodes {
        total = total.saturating_mul(per_node);
        if total == u128::MAX || per_node == 1 {
            break;
        }
    }
    total
}

/// Exhaustive, duplicate-free enumeration of `𝒜_N`.
///
/// Order: lexicographic in the sequence of per-node permutations, nodes in
/// canonical order, so the identity comes first.
pub fn enumerate_automorphisms(
    p: &ProbVector,
    height: usize,
    caps: &Caps,
) -> Result<Vec<TreeAutomorphism>> {
    let count = automorphism_count(p, height);
    if count > caps.automorphisms as u128 {
        return Err(Error::too_large(
            "automorphism group size",
            if count == u128::MAX {
                "more than 2^128".to_string()
            } else {
                count.to_string()
            },
            caps.automorphisms,
        ));
    }
    let s = p.len();
    let choices = p.class_permutations();
    let slots: Vec<(usize, usize)> = (0..height)
        .flat_map(|k| (0..s.pow(k as u32)).map(move |i| (k, i)))
        .collect();
    let mut digits = vec![0usize; slots.len()];
    let mut out = Vec::with_capacity(count as usize);
    loop {
        let mut perms: Vec<Vec<Vec<usize>>> = (0..height)
            .map(|k| vec![Vec::new(); s.pow(k as u32)])
            .collect();
        for (slot, &d) in slots.iter().zip(&digits) {
            perms[slot.0][slot.1] = choices[d].clone();
        }
        out.push(TreeAutomorphism::from_parts_unchecked(s, height, perms));
        // Odometer: the last slot varies fastest.
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < choices.len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// The name `v ↦ t(A(v))`.
pub fn apply_automorphism(a: &TreeAutomorphism, t: &TreeName) -> Result<TreeName> {
    if a.height() != t.height() {
        return Err(Error::HeightMismatch {
            left: a.height(),
            right: t.height(),
        });
    }
    if a.alphabet() != t.p().len() {
        return Err(Error::VectorMismatch);
    }
    let maps = a.node_maps();
    let levels = (1..=t.height())
        .map(|k| {
            let src = t.level(k);
            maps[k].iter().map(|&img| src[img]).collect()
        })
        .collect();
    TreeName::new(t.p().clone(), t.space(), levels)
}

/// Labels drawn i.i.d. uniformly from `0..alphabet_size`, deterministic in
/// `seed`.
pub fn random_tree_name(
    p: &ProbVector,
    height: usize,
    alphabet_size: u32,
    seed: u64,
) -> Result<TreeName> {
    if alphabet_size == 0 {
        return Err(Error::Domain("alphabet size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TreeName::from_fn(p.clone(), height, LabelSpace::Discrete, |_| {
        Label::Symbol(rng.random_range(0..alphabet_size))
    })
}

/// A uniformly random element of `𝒜_N`, deterministic in `seed`.
pub fn random_automorphism(p: &ProbVector, height: usize, seed: u64) -> TreeAutomorphism {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let choices = p.class_permutations();
    let s = p.len();
    let perms = (0..height)
        .map(|k| {
            (0..s.pow(k as u32))
                .map(|_| choices[rng.random_range(0..choices.len())].clone())
                .collect()
        })
        .collect();
    TreeAutomorphism::from_parts_unchecked(s, height, perms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::weight;
    use std::collections::HashSet;

    fn pv(xs: &[&str]) -> ProbVector {
        ProbVector::parse(xs).unwrap()
    }

    #[test]
    fn automorphism_counts() {
        let caps = Caps::default();
        assert_eq!(
            enumerate_automorphisms(&pv(&["1/3", "2/3"]), 3, &caps)
                .unwrap()
                .len(),
            1
        );
        assert_eq!(
            enumerate_automorphisms(&pv(&["1/2", "1/2"]), 1, &caps)
                .unwrap()
                .len(),
            2
        );
        // 2^(1 + 2) internal-node choices, cross-checked by the dedup below.
        let all = enumerate_automorphisms(&pv(&["1/2", "1/2"]), 2, &caps).unwrap();
        assert_eq!(all.len(), 8);
        let distinct: HashSet<Vec<Vec<usize>>> = all.iter().map(|a| a.node_maps()).collect();
        assert_eq!(distinct.len(), 8);
        assert!(all[0].is_identity());
    }

    #[test]
    fn cap_is_enforced() {
        let caps = Caps {
            automorphisms: 100,
            ..Caps::default()
        };
        let err = enumerate_automorphisms(&pv(&["1/3", "1/3", "1/3"]), 2, &caps).unwrap_err();
        match err {
            Error::TooLarge { count, cap, .. } => {
                assert_eq!(count, "1296");
                assert_eq!(cap, 100);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn automorphisms_preserve_weights_and_commute_with_sigma() {
        let p = pv(&["1/4", "1/4", "1/2"]);
        let all = enumerate_automorphisms(&p, 3, &Caps::default()).unwrap();
        assert_eq!(all.len(), 2usize.pow(13));
        for a in all.iter().step_by(97) {
            for k in 0..=3 {
                for i in 0..3usize.pow(k) {
                    let v = Node::from_index(k as usize, i, 3);
                    let av = a.map_node(&v);
                    assert_eq!(weight(&p, &v).unwrap(), weight(&p, &av).unwrap());
                    assert_eq!(a.map_node(&v.sigma()), av.sigma());
                }
            }
        }
    }

    #[test]
    fn enumeration_is_a_group() {
        let p = pv(&["1/2", "1/2"]);
        let all = enumerate_automorphisms(&p, 2, &Caps::default()).unwrap();
        let set: HashSet<TreeAutomorphism> = all.iter().cloned().collect();
        for a in &all {
            assert!(set.contains(&a.inverse()));
            for b in &all {
                assert!(set.contains(&a.then(b).unwrap()));
            }
        }
        let q = pv(&["1/6", "1/6", "1/6", "1/2"]);
        let all = enumerate_automorphisms(&q, 1, &Caps::default()).unwrap();
        assert_eq!(all.len(), 6);
        let set: HashSet<TreeAutomorphism> = all.iter().cloned().collect();
        for a in &all {
            assert!(set.contains(&a.inverse()));
            for b in &all {
                assert!(set.contains(&a.then(b).unwrap()));
            }
        }
    }

    #[test]
    fn apply_examples() {
        let p = pv(&["1/2", "1/2"]);
        let t = TreeName::new(
            p.clone(),
            LabelSpace::Discrete,
            vec![vec![Label::Symbol(7), Label::Symbol(9)]],
        )
        .unwrap();
        let swap = TreeAutomorphism::new(&p, vec![vec![vec![1, 0]]]).unwrap();
        let out = apply_automorphism(&swap, &t).unwrap();
        assert_eq!(out.level(1), &[Label::Symbol(9), Label::Symbol(7)]);
        let id = TreeAutomorphism::identity(&p, 1);
        assert_eq!(apply_automorphism(&id, &t).unwrap(), t);
        let tall = TreeAutomorphism::identity(&p, 2);
        assert!(matches!(
            apply_automorphism(&tall, &t),
            Err(Error::HeightMismatch { .. })
        ));
    }

    #[test]
    fn apply_respects_products_and_inverses() {
        let p = pv(&["1/4", "1/4", "1/2"]);
        for seed in 0..20 {
            let t = random_tree_name(&p, 3, 3, seed).unwrap();
            let a = random_automorphism(&p, 3, 1000 + seed);
            let b = random_automorphism(&p, 3, 2000 + seed);
            let lhs = apply_automorphism(&a, &apply_automorphism(&b, &t).unwrap()).unwrap();
            let rhs = apply_automorphism(&a.then(&b).unwrap(), &t).unwrap();
            assert_eq!(lhs, rhs);
            let back =
                apply_automorphism(&a.inverse(), &apply_automorphism(&a, &t).unwrap()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn class_violations_are_rejected() {
        let p = pv(&["1/3", "2/3"]);
        assert!(TreeAutomorphism::new(&p, vec![vec![vec![1, 0]]]).is_err());
        assert!(TreeAutomorphism::new(&p, vec![vec![vec![0, 0]]]).is_err());
        assert!(TreeAutomorphism::new(&p, vec![vec![vec![0, 1], vec![0, 1]]]).is_err());
    }

    #[test]
    fn random_names() {
        let p = pv(&["1/2", "1/2"]);
        assert_eq!(
            random_tree_name(&p, 3, 2, 5).unwrap(),
            random_tree_name(&p, 3, 2, 5).unwrap()
        );
        // 14 labels over 2 symbols: two independent names collide with
        // probability 2^-14.
        assert_ne!(
            random_tree_name(&p, 3, 2, 5).unwrap(),
            random_tree_name(&p, 3, 2, 6).unwrap()
        );
        let flat = random_tree_name(&p, 3, 1, 9).unwrap();
        assert!(flat
            .levels()
            .iter()
            .flatten()
            .all(|l| *l == Label::Symbol(0)));
    }

    #[test]
    fn map_index_agrees_with_node_maps() {
        let p = pv(&["1/3", "1/3", "1/3"]);
        let a = random_automorphism(&p, 3, 3);
        let maps = a.node_maps();
        for (k, map) in maps.iter().enumerate() {
            for (i, &image) in map.iter().enumerate() {
                assert_eq!(a.map_index(k, i), image);
            }
        }
    }

    #[test]
    fn circle_metric() {
        assert!((arc_distance(0.9, 0.1) - 0.2).abs() < 1e-15);
        let a = Label::SymbolFiber {
            symbol: 0,
            fiber: 0.0,
        };
        let b = Label::SymbolFiber {
            symbol: 1,
            fiber: 0.5,
        };
        assert_eq!(a.distance(&b), 0.75);
        assert_eq!(a.distance(&a), 0.0);
    }
}
