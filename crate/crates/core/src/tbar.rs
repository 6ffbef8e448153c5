//! The t̄_N distance between tree names.
//!
//! `t̄_N(h, h') = (1/N) · min_{A ∈ 𝒜_N} Σ_{0<|v|≤N} d(h(v), h'(A v)) · w_v`.
//!
//! The exact solver is a bottom-up matching DP. Because `w_{j·u} = p_j·w_u`,
//! the normalised cost of matching the subtree below `u` with the subtree
//! below `u'` is
//!
//! `C(u, u') = min_π Σ_j p_j · [d(h(j·u), h'(π(j)·u')) + C(j·u, π(j)·u')]`
//!
//! with `π` ranging over class-preserving permutations; the minimum splits
//! into one exact assignment problem per weight class. Subtrees are
//! hash-consed first, so the memo is keyed by pairs of distinct subtrees
//! rather than raw node pairs. This collapses the state-determined names of
//! finite-state systems to a handful of entries per level.

use std::collections::HashMap;

use crate::assignment::assign_lex_min;
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::markov::PreimageGraph;
use crate::prob::{child_index, ProbVector};
use crate::tree::{enumerate_automorphisms, Label, TreeAutomorphism, TreeName};

/// Outcome of a t̄_N computation.
#[derive(Debug, Clone, PartialEq)]
pub struct TbarResult {
    pub value: f64,
    /// An automorphism attaining the minimum.
    pub witness: TreeAutomorphism,
    pub height: usize,
}

/// Hash-consed tree: `levels[k]` stores, for each distinct subtree rooted at
/// depth `k`, its `s` children as `(label, child subtree id)`.
#[derive(Debug, Clone)]
pub(crate) struct Dag {
    s: usize,
    height: usize,
    levels: Vec<Vec<(Label, u32)>>,
    /// Subtree id of every explicit node (absent for graph-built dags).
    node_ids: Option<Vec<Vec<u32>>>,
}

impl Dag {
    pub(crate) fn from_name(t: &TreeName) -> Dag {
        let s = t.p().len();
        let height = t.height();
        let mut levels: Vec<Vec<(Label, u32)>> = vec![Vec::new(); height + 1];
        let mut node_ids: Vec<Vec<u32>> = vec![Vec::new(); height + 1];
        node_ids[height] = vec![0; s.pow(height as u32)];
        let mut size = s.pow(height as u32);
        for k in (0..height).rev() {
            size /= s;
            let labels = t.level(k + 1);
            let below = &node_ids[k + 1];
            let mut interned: HashMap<Vec<(Label, u32)>, u32> = HashMap::new();
            let mut flat = Vec::new();
            let mut ids = Vec::with_capacity(size);
            for u in 0..size {
                let sig: Vec<(Label, u32)> = (0..s)
                    .map(|j| {
                        let c = child_index(j, u, size);
                        (labels[c], below[c])
                    })
                    .collect();
                let next = interned.len() as u32;
                let id = *interned.entry(sig.clone()).or_insert_with(|| {
                    flat.extend_from_slice(&sig);
                    next
                });
                ids.push(id);
            }
            levels[k] = flat;
            node_ids[k] = ids;
        }
        Dag {
            s,
            height,
            levels,
            node_ids: Some(node_ids),
        }
    }

    /// Every state's tree name is determined by the state, so the subtree
    /// rooted at a node with state `i` has id `i` at every depth.
    pub(crate) fn from_graph(g: &PreimageGraph, height: usize) -> Dag {
        let s = g.p().len();
        let level: Vec<(Label, u32)> = (0..g.state_count())
            .flat_map(|i| {
                (0..s).map(move |j| {
                    let t = g.target(i, j);
                    (Label::Symbol(t as u32), t as u32)
                })
            })
            .collect();
        Dag {
            s,
            height,
            levels: vec![level; height],
            node_ids: None,
        }
    }

    fn children(&self, k: usize, id: u32) -> &[(Label, u32)] {
        let start = id as usize * self.s;
        &self.levels[k][start..start + self.s]
    }
}

/// Per-depth memo: `(left id, right id) -> (cost, child assignment)`.
type Memo = Vec<HashMap<(u32, u32), (f64, Vec<usize>)>>;

struct Matcher<'a> {
    p: &'a ProbVector,
    left: &'a Dag,
    right: &'a Dag,
    memo: Memo,
    entries: u64,
    cap: u64,
}

impl<'a> Matcher<'a> {
    fn new(p: &'a ProbVector, left: &'a Dag, right: &'a Dag, caps: &Caps) -> Self {
        Matcher {
            p,
            left,
            right,
            memo: vec![HashMap::new(); left.height],
            entries: 0,
            cap: caps.memo_entries,
        }
    }

    /// Normalised cost `C` for the subtree pair `(a, b)` rooted at depth `k`.
    fn cost(&mut self, k: usize, a: u32, b: u32) -> Result<f64> {
        if k >= self.left.height {
            return Ok(0.0);
        }
        if let Some((c, _)) = self.memo[k].get(&(a, b)) {
            return Ok(*c);
        }
        let (left, right) = (self.left, self.right);
        let s = self.p.len();
        let mut perm = vec![0usize; s];
        let mut total = 0.0;
        let p = self.p;
        for class in p.classes() {
            let m = class.len();
            let pj = p.component(class[0]);
            let mut matrix = vec![0.0; m * m];
            for (x, &jx) in class.iter().enumerate() {
                for (y, &jy) in class.iter().enumerate() {
                    let (la, ca) = left.children(k, a)[jx];
                    let (lb, cb) = right.children(k, b)[jy];
                    let below = self.cost(k + 1, ca, cb)?;
                    matrix[x * m + y] = pj * (la.distance(&lb) + below);
                }
            }
            let (c, assign) = assign_lex_min(&matrix, m);
            for (x, &y) in assign.iter().enumerate() {
                perm[class[x]] = class[y];
            }
            total += c;
        }
        self.entries += 1;
        if self.entries > self.cap {
            return Err(Error::too_large(
                "t-bar memo entries",
                self.entries,
                self.cap,
            ));
        }
        self.memo[k].insert((a, b), (total, perm));
        Ok(total)
    }

    fn perm(&self, k: usize, a: u32, b: u32) -> &[usize] {
        &self.memo[k][&(a, b)].1
    }
}

fn check_pair(t1: &TreeName, t2: &TreeName) -> Result<()> {
    t1.check_compatible(t2)
}

/// Exact t̄_N with a witness automorphism, default caps.
pub fn tbar_exact(t1: &TreeName, t2: &TreeName) -> Result<TbarResult> {
    tbar_exact_with(t1, t2, &Caps::default())
}

pub fn tbar_exact_with(t1: &TreeName, t2: &TreeName, caps: &Caps) -> Result<TbarResult> {
    check_pair(t1, t2)?;
    let left = Dag::from_name(t1);
    let right = Dag::from_name(t2);
    let mut matcher = Matcher::new(t1.p(), &left, &right, caps);
    let total = matcher.cost(0, 0, 0)?;
    let witness = reconstruct_witness(&matcher);
    let n = t1.height();
    Ok(TbarResult {
        value: (total / n as f64).clamp(0.0, 1.0),
        witness,
        height: n,
    })
}

fn reconstruct_witness(matcher: &Matcher<'_>) -> TreeAutomorphism {
    let s = matcher.p.len();
    let height = matcher.left.height;
    let left_ids = matcher.left.node_ids.as_ref().expect("explicit dag");
    let right_ids = matcher.right.node_ids.as_ref().expect("explicit dag");
    let mut perms: Vec<Vec<Vec<usize>>> = Vec::with_capacity(height);
    let mut image = vec![0usize];
    let mut size = 1usize;
    for k in 0..height {
        let mut level = Vec::with_capacity(size);
        let mut next_image = vec![0usize; size * s];
        for u in 0..size {
            let perm = matcher
                .perm(k, left_ids[k][u], right_ids[k][image[u]])
                .to_vec();
            for j in 0..s {
                next_image[child_index(j, u, size)] = child_index(perm[j], image[u], size);
            }
            level.push(perm);
        }
        perms.push(level);
        image = next_image;
        size *= s;
    }
    TreeAutomorphism::from_parts_unchecked(s, height, perms)
}

/// t̄_N value only, for callers that reuse hash-consed names.
pub(crate) fn tbar_value_dags(p: &ProbVector, a: &Dag, b: &Dag, caps: &Caps) -> Result<f64> {
    let mut matcher = Matcher::new(p, a, b, caps);
    let total = matcher.cost(0, 0, 0)?;
    Ok((total / a.height as f64).clamp(0.0, 1.0))
}

/// `(1/N) Σ_v d(t1(v), t2(A v)) w_v` for a given automorphism.
pub fn matching_cost(t1: &TreeName, t2: &TreeName, a: &TreeAutomorphism) -> Result<f64> {
    check_pair(t1, t2)?;
    if a.height() != t1.height() {
        return Err(Error::HeightMismatch {
            left: a.height(),
            right: t1.height(),
        });
    }
    Ok(cost_with_maps(t1, t2, &a.node_maps()))
}

fn cost_with_maps(t1: &TreeName, t2: &TreeName, maps: &[Vec<usize>]) -> f64 {
    let p = t1.p();
    let mut total = 0.0;
    for (k, map) in maps.iter().enumerate().take(t1.height() + 1).skip(1) {
        let weights = p.level_weights(k);
        let (l1, l2) = (t1.level(k), t2.level(k));
        total += map
            .iter()
            .enumerate()
            .map(|(v, &av)| l1[v].distance(&l2[av]) * weights[v])
            .sum::<f64>();
    }
    total / t1.height() as f64
}

/// Exhaustive minimum over `𝒜_N`; the first minimiser in enumeration order
/// is the witness.
pub fn tbar_bruteforce(t1: &TreeName, t2: &TreeName, caps: &Caps) -> Result<TbarResult> {
    check_pair(t1, t2)?;
    let all = enumerate_automorphisms(t1.p(), t1.height(), caps)?;
    let mut best: Option<(f64, TreeAutomorphism)> = None;
    for a in all {
        let c = cost_with_maps(t1, t2, &a.node_maps());
        if best.as_ref().is_none_or(|(b, _)| c < *b - 1e-15) {
            best = Some((c, a));
        }
    }
    let (value, witness) = best.expect("the identity is always enumerated");
    Ok(TbarResult {
        value,
        witness,
        height: t1.height(),
    })
}

/// Per-height matrices of `t̄_m(τ_I, τ_J)` over the states of a preimage
/// graph.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistances {
    pub heights: Vec<usize>,
    /// `matrices[h][i][j]` for `heights[h]`.
    pub matrices: Vec<Vec<Vec<f64>>>,
}

impl StateDistances {
    /// Largest off-diagonal entry at `heights[h]`.
    pub fn max_off_diagonal(&self, h: usize) -> f64 {
        let m = &self.matrices[h];
        let mut best: f64 = 0.0;
        for (i, row) in m.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if i != j {
                    best = best.max(x);
                }
            }
        }
        best
    }
}

/// State-collapsed t̄ between the state tree names of a preimage graph. The
/// memo is keyed on `(state, state, remaining height)`, shared across all
/// requested heights.
pub fn tbar_states(g: &PreimageGraph, heights: &[usize], caps: &Caps) -> Result<StateDistances> {
    if let Some(&bad) = heights.iter().find(|&&m| m == 0) {
        return Err(Error::Domain(format!("height {bad} must be positive")));
    }
    let top = heights.iter().copied().max().unwrap_or(0);
    let n = g.state_count();
    let dag = Dag::from_graph(g, top);
    let mut matcher = Matcher::new(g.p(), &dag, &dag, caps);
    let mut matrices = Vec::with_capacity(heights.len());
    for &m in heights {
        let mut matrix = vec![vec![0.0; n]; n];
        for (i, row) in matrix.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let c = matcher.cost(top - m, i as u32, j as u32)?;
                *cell = (c / m as f64).clamp(0.0, 1.0);
            }
        }
        matrices.push(matrix);
    }
    Ok(StateDistances {
        heights: heights.to_vec(),
        matrices,
    })
}

/// Summary of sampled t̄_n values over independent point pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub pairs: usize,
    pub height: usize,
    /// `None` when no pairs were drawn.
    pub mean: Option<f64>,
    /// Nearest-rank quantiles at 0.5, 0.9 and 0.99.
    pub quantiles: Option<[f64; 3]>,
    pub values: Vec<f64>,
}

/// Nearest-rank quantile of sorted data.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Product-measure estimate of `∫∫ t̄_n(τ_x, τ_y) dμ(x) dν(y)`.
///
/// Pair `i` draws its two points from seeds derived from `(seed, i)`, so the
/// result does not depend on the execution mode.
pub fn process_tbar_mc(
    sys_a: &crate::dynsim::SystemDescriptor,
    sys_b: &crate::dynsim::SystemDescriptor,
    n: usize,
    pairs: usize,
    seed: u64,
    caps: &Caps,
    exec: Exec,
) -> Result<McSummary> {
    use crate::dynsim::{preimage_tree, sample_point, LabelMode};
    use crate::seed::derive_seed;

    if !sys_a.p().approx_eq(sys_b.p()) {
        return Err(Error::VectorMismatch);
    }
    if n == 0 {
        return Err(Error::Domain("height must be positive".into()));
    }
    let s = sys_a.p().len() as u128;
    let work = (n as u128).saturating_mul(s.saturating_pow(n as u32));
    if work > caps.tree_nodes as u128 {
        return Err(Error::too_large("n·s^n work", work, caps.tree_nodes));
    }
    let mode_a = LabelMode::natural(sys_a);
    let mode_b = LabelMode::natural(sys_b);
    let values = exec.try_map_indexed(pairs, |i| {
        let pair_seed = derive_seed(seed, i as u64);
        let x = sample_point(sys_a, 1, derive_seed(pair_seed, 0))?;
        let y = sample_point(sys_b, 1, derive_seed(pair_seed, 1))?;
        let tx = preimage_tree(sys_a, &x, n, mode_a, caps)?;
        let ty = preimage_tree(sys_b, &y, n, mode_b, caps)?;
        let (a, b) = (Dag::from_name(&tx), Dag::from_name(&ty));
        if tx.space() != ty.space() {
            return Err(Error::MetricMismatch);
        }
        tbar_value_dags(sys_a.p(), &a, &b, caps)
    })?;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let (mean, quantiles) = if values.is_empty() {
        (None, None)
    } else {
        (
            Some(values.iter().sum::<f64>() / values.len() as f64),
            Some([
                nearest_rank(&sorted, 0.5),
                nearest_rank(&sorted, 0.9),
                nearest_rank(&sorted, 0.99),
            ]),
        )
    };
    Ok(McSummary {
        pairs,
        height: n,
        mean,
        quantiles,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Node;
    use crate::tree::{apply_automorphism, random_automorphism, random_tree_name, LabelSpace};

    fn pv(xs: &[&str]) -> ProbVector {
        ProbVector::parse(xs).unwrap()
    }

    #[test]
    fn identical_names_are_at_distance_zero() {
        let p = pv(&["1/4", "1/4", "1/2"]);
        let t = random_tree_name(&p, 3, 3, 1).unwrap();
        let r = tbar_exact(&t, &t).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.witness.is_identity());
        assert_eq!(
            tbar_bruteforce(&t, &t, &Caps::default()).unwrap().value,
            0.0
        );
    }

    #[test]
    fn automorphic_images_are_at_distance_zero() {
        let p = pv(&["1/3", "1/3", "1/3"]);
        for seed in 0..10 {
            let t = random_tree_name(&p, 3, 2, seed).unwrap();
            let a = random_automorphism(&p, 3, seed + 50);
            let image = apply_automorphism(&a, &t).unwrap();
            assert!(tbar_exact(&t, &image).unwrap().value.abs() < 1e-15);
        }
    }

    #[test]
    fn witness_cost_matches_value() {
        let p = pv(&["1/6", "1/6", "2/3"]);
        for seed in 0..20 {
            let t1 = random_tree_name(&p, 3, 3, seed).unwrap();
            let t2 = random_tree_name(&p, 3, 3, seed + 100).unwrap();
            let r = tbar_exact(&t1, &t2).unwrap();
            let c = matching_cost(&t1, &t2, &r.witness).unwrap();
            assert!((c - r.value).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_group_means_identity_cost() {
        let p = pv(&["1/3", "2/3"]);
        let t1 = random_tree_name(&p, 3, 2, 3).unwrap();
        let t2 = random_tree_name(&p, 3, 2, 4).unwrap();
        let id = TreeAutomorphism::identity(&p, 3);
        let expected = matching_cost(&t1, &t2, &id).unwrap();
        assert_eq!(
            tbar_bruteforce(&t1, &t2, &Caps::default()).unwrap().value,
            expected
        );
        assert!((tbar_exact(&t1, &t2).unwrap().value - expected).abs() < 1e-15);
    }

    #[test]
    fn mismatches_are_errors() {
        let p = pv(&["1/2", "1/2"]);
        let q = pv(&["1/3", "2/3"]);
        let a = random_tree_name(&p, 2, 2, 0).unwrap();
        assert!(matches!(
            tbar_exact(&a, &random_tree_name(&p, 3, 2, 0).unwrap()),
            Err(Error::HeightMismatch { .. })
        ));
        assert_eq!(
            tbar_exact(&a, &random_tree_name(&q, 2, 2, 0).unwrap()),
            Err(Error::VectorMismatch)
        );
        let circle = TreeName::from_fn(p.clone(), 2, LabelSpace::SymbolCircle, |v: &Node| {
            Label::SymbolFiber {
                symbol: v.symbols()[0] as u32,
                fiber: 0.0,
            }
        })
        .unwrap();
        assert_eq!(tbar_exact(&a, &circle), Err(Error::MetricMismatch));
    }

    #[test]
    fn memo_cap_is_enforced() {
        let p = pv(&["1/2", "1/2"]);
        let a = random_tree_name(&p, 6, 5, 0).unwrap();
        let b = random_tree_name(&p, 6, 5, 1).unwrap();
        let caps = Caps {
            memo_entries: 10,
            ..Caps::default()
        };
        assert!(matches!(
            tbar_exact_with(&a, &b, &caps),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn nearest_rank_quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(nearest_rank(&xs, 0.5), 2.0);
        assert_eq!(nearest_rank(&xs, 0.9), 4.0);
        assert_eq!(nearest_rank(&xs, 0.0), 1.0);
    }
}
