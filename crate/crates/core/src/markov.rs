//! One-sided Markov shifts, preimage graphs and the tvwB decider.
//!
//! For a stochastic matrix `A`, the preimages of a point whose current state
//! is `I` sit in states `J` with conditional probability `A_IJ`, so the
//! state tree name `τ_I` is read off the forward edges of the weighted graph
//! `G(A)`: the child `j·u` of a node in state `K` is in the state reached
//! from `K` along the edge carrying branch symbol `j`.
//!
//! The shift is tvwB iff some common weight sequence leads every vertex of
//! `G(A)` to one shared vertex. [`decide_tvwb`] searches for that sequence
//! over *sets* of endpoints: per-vertex path tuples project onto endpoint
//! sets, and a synchronising family exists iff a singleton is reachable
//! from the full vertex set. The search therefore has depth below `2^N`;
//! the classical tuple argument only bounds it by `N^{3N}`, and both bounds
//! are reported.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::prob::{ProbVector, CLASS_TOL};
use crate::rational::{self, Rational};

/// A square matrix with nonnegative rows summing to one, kept exact.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    entries: Vec<Vec<Rational>>,
}

impl StochasticMatrix {
    pub fn new(entries: Vec<Vec<Rational>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Err(Error::NotStochastic("empty matrix".into()));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotStochastic(format!(
                    "row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|x| !rational::is_nonnegative(x)) {
                return Err(Error::NotStochastic(format!(
                    "negative entry {} in row {}",
                    rational::display(bad),
                    i + 1
                )));
            }
            let sum: Rational = row.iter().cloned().sum();
            if (rational::to_f64(&sum) - 1.0).abs() > CLASS_TOL {
                return Err(Error::NotStochastic(format!(
                    "row {} sums to {}",
                    i + 1,
                    rational::display(&sum)
                )));
            }
        }
        Ok(StochasticMatrix { entries })
    }

    pub fn parse<S: AsRef<str>>(rows: &[Vec<S>]) -> Result<Self> {
        let entries = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|x| rational::parse_rational(x.as_ref()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i][j]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.entries
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(rational::to_f64).collect())
            .collect()
    }

    fn support(&self) -> Vec<Vec<bool>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|x| !x.is_zero()).collect())
            .collect()
    }

    /// Every state reaches every state along positive entries.
    pub fn is_irreducible(&self) -> bool {
        let n = self.dim();
        let support = self.support();
        (0..n).all(|start| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if support[i][j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|x| x)
        })
    }

    /// Some power is strictly positive; powers are checked up to the
    /// Wielandt bound `(N-1)^2 + 1`.
    pub fn is_primitive(&self) -> bool {
        let n = self.dim();
        let base = self.support();
        let mut power = base.clone();
        let bound = (n - 1) * (n - 1) + 1;
        for _ in 0..bound {
            if power.iter().flatten().all(|&x| x) {
                return true;
            }
            power = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).any(|k| power[i][k] && base[k][j]))
                        .collect()
                })
                .collect();
        }
        power.iter().flatten().all(|&x| x)
    }
}

/// The left fixed probability vector `q A = q` of an irreducible matrix.
pub fn stationary(a: &StochasticMatrix) -> Result<Vec<f64>> {
    if !a.is_irreducible() {
        return Err(Error::Reducible);
    }
    let n = a.dim();
    let m = a.to_f64();
    // Rows 0..n-1 of (Aᵀ - I) q = 0, last row replaced by Σ q = 1.
    let mut system = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            system[(i, j)] = m[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        system[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = system.clone().lu();
    let mut q = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Domain("singular stationary system".into()))?;
    for _ in 0..3 {
        let residual = &rhs - &system * &q;
        match lu.solve(&residual) {
            Some(dq) => q += dq,
            None => break,
        }
    }
    let total: f64 = q.iter().sum();
    Ok(q.iter().map(|x| x / total).collect())
}

/// `‖q A − q‖₁`.
pub fn stationary_residual(a: &StochasticMatrix, q: &[f64]) -> f64 {
    let m = a.to_f64();
    let n = a.dim();
    (0..n)
        .map(|j| ((0..n).map(|i| q[i] * m[i][j]).sum::<f64>() - q[j]).abs())
        .sum()
}

/// Result of the End(p) row criterion.
#[derive(Debug, Clone, PartialEq)]
pub enum EndCheck {
    /// Every row's nonzero entries are the components of `p` (ascending).
    Endomorphism(ProbVector),
    /// `row` is the first (0-based) row whose nonzero multiset differs from
    /// row 0's; `None` when the common multiset itself is not a valid `p`.
    Rejected { row: Option<usize>, reason: String },
}

impl EndCheck {
    pub fn vector(&self) -> Option<&ProbVector> {
        match self {
            EndCheck::Endomorphism(p) => Some(p),
            EndCheck::Rejected { .. } => None,
        }
    }
}

fn nonzero_sorted(row: &[Rational]) -> Vec<Rational> {
    let mut xs: Vec<Rational> = row.iter().filter(|x| !x.is_zero()).cloned().collect();
    xs.sort();
    xs
}

/// `X_A⁻ ∈ End(p)` iff every row equals `p` after deleting zero entries.
pub fn end_p_check(a: &StochasticMatrix) -> EndCheck {
    let first = nonzero_sorted(&a.rows()[0]);
    for (i, row) in a.rows().iter().enumerate().skip(1) {
        if nonzero_sorted(row) != first {
            return EndCheck::Rejected {
                row: Some(i),
                reason: format!(
                    "row {} has nonzero entries {{{}}}, row 1 has {{{}}}",
                    i + 1,
                    join(&nonzero_sorted(row)),
                    join(&first)
                ),
            };
        }
    }
    match ProbVector::from_rationals(first) {
        Ok(p) => EndCheck::Endomorphism(p),
        Err(e) => EndCheck::Rejected {
            row: None,
            reason: e.to_string(),
        },
    }
}

fn join(xs: &[Rational]) -> String {
    xs.iter()
        .map(rational::display)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Whether a sufficient condition applies, and if so whether it holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sufficiency {
    Holds(bool),
    /// The condition's hypotheses are not met (e.g. non-uniform `p`).
    Inapplicable,
}

/// Uniform `p` and strongly mixing (primitive) `A` imply tvwB.
pub fn sufficient_mixing_uniform(a: &StochasticMatrix) -> Sufficiency {
    match end_p_check(a) {
        EndCheck::Endomorphism(p) if p.is_uniform() => Sufficiency::Holds(a.is_primitive()),
        _ => Sufficiency::Inapplicable,
    }
}

/// Every pair of rows shares a column holding equal nonzero entries.
pub fn sufficient_shared_entries(a: &StochasticMatrix) -> Result<bool> {
    if let EndCheck::Rejected { reason, .. } = end_p_check(a) {
        return Err(Error::NotEndomorphism(reason));
    }
    if !a.is_irreducible() {
        return Err(Error::Reducible);
    }
    let n = a.dim();
    let rows = a.rows();
    Ok((0..n).all(|i| {
        (i + 1..n).all(|j| (0..n).any(|k| !rows[i][k].is_zero() && rows[i][k] == rows[j][k]))
    }))
}

/// A finite-state preimage graph: every state has exactly one out-edge per
/// branch symbol, the edge for symbol `j` carrying weight `p_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreimageGraph {
    p: ProbVector,
    /// `targets[state][symbol]`.
    targets: Vec<Vec<usize>>,
    names: Vec<String>,
}

impl PreimageGraph {
    pub fn new(p: ProbVector, targets: Vec<Vec<usize>>, names: Vec<String>) -> Result<Self> {
        let n = targets.len();
        if n == 0 {
            return Err(Error::InvalidGraph("no states".into()));
        }
        if names.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} names for {n} states",
                names.len()
            )));
        }
        for (i, row) in targets.iter().enumerate() {
            if row.len() != p.len() {
                return Err(Error::InvalidGraph(format!(
                    "state {} has {} out-edges, expected {}",
                    i + 1,
                    row.len(),
                    p.len()
                )));
            }
            if let Some(bad) = row.iter().find(|&&t| t >= n) {
                return Err(Error::InvalidGraph(format!(
                    "state {} points at missing state {}",
                    i + 1,
                    bad + 1
                )));
            }
        }
        Ok(PreimageGraph { p, targets, names })
    }

    /// `B⁺(p)` as a graph on its zero-coordinate symbols: branch `j` leads
    /// to state `j` from everywhere.
    pub fn bernoulli(p: &ProbVector) -> Self {
        let s = p.len();
        PreimageGraph {
            p: p.clone(),
            targets: vec![(0..s).collect(); s],
            names: (1..=s).map(|j| j.to_string()).collect(),
        }
    }

    pub fn p(&self) -> &ProbVector {
        &self.p
    }

    pub fn state_count(&self) -> usize {
        self.targets.len()
    }

    pub fn target(&self, state: usize, symbol: usize) -> usize {
        self.targets[state][symbol]
    }

    pub fn targets(&self) -> &[Vec<usize>] {
        &self.targets
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn edge_count(&self) -> usize {
        self.targets.iter().map(Vec::len).sum()
    }

    /// Distribution over states after one preimage step from `dist`.
    pub fn propagate(&self, dist: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; self.state_count()];
        for (i, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (j, &t) in self.targets[i].iter().enumerate() {
                next[t] += mass * self.p.component(j);
            }
        }
        next
    }
}

/// `G(A)` with the canonical tree partition: within a weight class, branch
/// symbols go to the class's target states in ascending order.
pub fn preimage_graph_from_markov(
    a: &StochasticMatrix,
    labels: Option<Vec<String>>,
) -> Result<PreimageGraph> {
    let p = match end_p_check(a) {
        EndCheck::Endomorphism(p) => p,
        EndCheck::Rejected { reason, .. } => return Err(Error::NotEndomorphism(reason)),
    };
    if !a.is_irreducible() {
        return Err(Error::Reducible);
    }
    let exact = p.exact().expect("End(p) vectors are exact").to_vec();
    let n = a.dim();
    let targets = (0..n)
        .map(|i| {
            let mut row = vec![0usize; p.len()];
            for class in p.classes() {
                let w = &exact[class[0]];
                let states = (0..n).filter(|&j| a.entry(i, j) == w);
                for (&symbol, state) in class.iter().zip(states) {
                    row[symbol] = state;
                }
            }
            row
        })
        .collect();
    let names = match labels {
        Some(l) if l.len() == n => l,
        Some(l) => {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {n} states",
                l.len()
            )))
        }
        None => (1..=n).map(|i| i.to_string()).collect(),
    };
    PreimageGraph::new(p, targets, names)
}

/// `ℤ/n₁ × … × ℤ/n_r`, elements encoded in mixed radix (first factor most
/// significant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteAbelianGroup {
    orders: Vec<u32>,
}

impl FiniteAbelianGroup {
    pub fn new(orders: Vec<u32>) -> Result<Self> {
        if orders.is_empty() || orders.contains(&0) {
            return Err(Error::InvalidDescriptor(format!(
                "invalid group orders {orders:?}"
            )));
        }
        Ok(FiniteAbelianGroup { orders })
    }

    pub fn cyclic(n: u32) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn order(&self) -> usize {
        self.orders.iter().map(|&o| o as usize).product()
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn encode(&self, coords: &[u32]) -> Result<usize> {
        if coords.len() != self.orders.len() {
            return Err(Error::InvalidDescriptor(format!(
                "group element {coords:?} needs {} coordinates",
                self.orders.len()
            )));
        }
        let mut idx = 0usize;
        for (&c, &o) in coords.iter().zip(&self.orders) {
            if c >= o {
                return Err(Error::InvalidDescriptor(format!(
                    "coordinate {c} out of range for ℤ/{o}"
                )));
            }
            idx = idx * o as usize + c as usize;
        }
        Ok(idx)
    }

    pub fn decode(&self, mut idx: usize) -> Vec<u32> {
        let mut coords = vec![0u32; self.orders.len()];
        for (slot, &o) in coords.iter_mut().zip(&self.orders).rev() {
            *slot = (idx % o as usize) as u32;
            idx /= o as usize;
        }
        coords
    }

    /// `g − h`.
    pub fn sub(&self, g: usize, h: usize) -> usize {
        let (a, b) = (self.decode(g), self.decode(h));
        let diff: Vec<u32> = a
            .iter()
            .zip(&b)
            .zip(&self.orders)
            .map(|((&x, &y), &o)| (x + o - y) % o)
            .collect();
        self.encode(&diff).expect("in range")
    }

    pub fn display(&self, g: usize) -> String {
        let c = self.decode(g);
        if c.len() == 1 {
            c[0].to_string()
        } else {
            format!(
                "({})",
                c.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
            )
        }
    }
}

/// State index of `(symbol, g)` in an extension graph.
pub fn extension_state(group: &FiniteAbelianGroup, symbol: usize, g: usize) -> usize {
    symbol * group.order() + g
}

/// Preimage graph of a memory-1 `(G, φ)`-extension of `B⁺(p)`.
///
/// States are `(x₀, g)`; the preimage of `(x, g)` along branch `j` is
/// `(j·x, φ_j⁻¹·g)`, so the edge from `(i, g)` via `j` targets
/// `(j, g − φ_j)` whatever `i` is. `cocycle[j]` is `φ_j`.
pub fn preimage_graph_from_extension(
    p: &ProbVector,
    group: &FiniteAbelianGroup,
    cocycle: &[usize],
) -> Result<PreimageGraph> {
    let s = p.len();
    if cocycle.len() != s {
        return Err(Error::InvalidDescriptor(format!(
            "a memory-1 cocycle has one group element per symbol: got {} for {s} symbols",
            cocycle.len()
        )));
    }
    let order = group.order();
    if let Some(bad) = cocycle.iter().find(|&&g| g >= order) {
        return Err(Error::InvalidDescriptor(format!(
            "cocycle value {bad} outside a group of order {order}"
        )));
    }
    let mut targets = Vec::with_capacity(s * order);
    let mut names = Vec::with_capacity(s * order);
    for i in 0..s {
        for g in 0..order {
            targets.push(
                (0..s)
                    .map(|j| extension_state(group, j, group.sub(g, cocycle[j])))
                    .collect(),
            );
            names.push(format!("({},{})", i + 1, group.display(g)));
        }
    }
    PreimageGraph::new(p.clone(), targets, names)
}

/// `N^{3N}`.
pub fn sync_bound(n_states: usize) -> Result<BigUint> {
    if n_states == 0 {
        return Err(Error::Domain("need at least one state".into()));
    }
    Ok(BigUint::from(n_states).pow(3 * n_states as u32))
}

/// One step of a witness path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub symbol: usize,
    pub to: usize,
}

/// A synchronising weight sequence with the per-state paths realising it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncWitness {
    /// Weight class taken at each step.
    pub classes: Vec<usize>,
    pub weights: Vec<f64>,
    /// `paths[state]` for every start state.
    pub paths: Vec<Vec<PathStep>>,
    pub end_state: usize,
}

impl SyncWitness {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Weight of every witness path (all see the same weights).
    pub fn path_weight(&self) -> f64 {
        self.weights.iter().product()
    }
}

/// Output of [`decide_tvwb`].
#[derive(Debug, Clone, PartialEq)]
pub struct TvwbVerdict {
    pub decision: bool,
    pub witness: Option<SyncWitness>,
    /// On `false`: every endpoint set reachable from the full set, sorted.
    pub certificate: Option<Vec<Vec<usize>>>,
    /// Witness length, or the deepest BFS level on `false`.
    pub depth: usize,
    pub sets_explored: usize,
    /// `N^{3N}`.
    pub path_bound: BigUint,
    /// `2^N`, the subset-search depth bound.
    pub subset_bound: BigUint,
}

type Choice = Vec<(usize, PathStep)>;

fn bits(set: u128) -> impl Iterator<Item = usize> {
    (0..128).filter(move |i| set & (1u128 << i) != 0)
}

fn to_vec(set: u128) -> Vec<usize> {
    bits(set).collect()
}

/// All endpoint sets obtainable from `set` by choosing, for every member,
/// one out-edge of weight class `class`.
fn successors(
    g: &PreimageGraph,
    set: u128,
    class: usize,
    caps: &Caps,
) -> Result<Vec<(u128, Choice)>> {
    let symbols = &g.p().classes()[class];
    let mut partial: Vec<(u128, Choice)> = vec![(0, Vec::new())];
    for u in bits(set) {
        let mut options: Vec<PathStep> = Vec::new();
        for &j in symbols {
            let to = g.target(u, j);
            if !options.iter().any(|o| o.to == to) {
                options.push(PathStep { symbol: j, to });
            }
        }
        let mut seen: HashMap<u128, usize> = HashMap::new();
        let mut next: Vec<(u128, Choice)> = Vec::new();
        for (acc, choice) in &partial {
            for step in &options {
                let union = acc | (1u128 << step.to);
                if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(union) {
                    e.insert(next.len());
                    let mut c = choice.clone();
                    c.push((u, *step));
                    next.push((union, c));
                }
            }
        }
        if next.len() as u64 > caps.successors {
            return Err(Error::too_large(
                "successor sets per (set, weight)",
                next.len(),
                caps.successors,
            ));
        }
        partial = next;
    }
    Ok(partial)
}

/// Breadth-first search over endpoint sets from the full state set.
pub fn decide_tvwb(g: &PreimageGraph, caps: &Caps) -> Result<TvwbVerdict> {
    let n = g.state_count();
    if n > 128 {
        return Err(Error::too_large("preimage graph states", n, 128));
    }
    let path_bound = sync_bound(n)?;
    let subset_bound = BigUint::one() << n;
    let full: u128 = if n == 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    };
    let classes = g.p().classes_by_weight();

    struct Entry {
        set: u128,
        depth: usize,
        parent: Option<(usize, usize, Choice)>,
    }
    let mut entries = vec![Entry {
        set: full,
        depth: 0,
        parent: None,
    }];
    let mut index: HashMap<u128, usize> = HashMap::from([(full, 0)]);
    let mut queue = VecDeque::from([0usize]);
    let mut found = if full.count_ones() == 1 {
        Some(0)
    } else {
        None
    };
    'bfs: while let (None, Some(at)) = (found, queue.pop_front()) {
        let (set, depth) = (entries[at].set, entries[at].depth);
        for &class in &classes {
            for (next, choice) in successors(g, set, class, caps)? {
                if index.contains_key(&next) {
                    continue;
                }
                index.insert(next, entries.len());
                entries.push(Entry {
                    set: next,
                    depth: depth + 1,
                    parent: Some((at, class, choice)),
                });
                queue.push_back(entries.len() - 1);
                if next.count_ones() == 1 {
                    found = Some(entries.len() - 1);
                    break 'bfs;
                }
            }
        }
    }

    let explored = entries.len();
    match found {
        Some(end) => {
            let mut chain = Vec::new();
            let mut at = end;
            while let Some((parent, class, choice)) = &entries[at].parent {
                chain.push((*class, choice.clone()));
                at = *parent;
            }
            chain.reverse();
            let paths = (0..n)
                .map(|start| {
                    let mut cur = start;
                    chain
                        .iter()
                        .map(|(_, choice)| {
                            let step = choice
                                .iter()
                                .find(|(u, _)| *u == cur)
                                .map(|(_, s)| *s)
                                .expect("choice covers the whole set");
                            cur = step.to;
                            step
                        })
                        .collect()
                })
                .collect();
            let classes: Vec<usize> = chain.iter().map(|(c, _)| *c).collect();
            let weights = classes.iter().map(|&c| g.p().class_weight(c)).collect();
            let end_state = to_vec(entries[end].set)[0];
            Ok(TvwbVerdict {
                decision: true,
                depth: classes.len(),
                witness: Some(SyncWitness {
                    classes,
                    weights,
                    paths,
                    end_state,
                }),
                certificate: None,
                sets_explored: explored,
                path_bound,
                subset_bound,
            })
        }
        None => {
            let mut family: Vec<Vec<usize>> = entries.iter().map(|e| to_vec(e.set)).collect();
            family.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
            Ok(TvwbVerdict {
                decision: false,
                witness: None,
                certificate: Some(family),
                depth: entries.iter().map(|e| e.depth).max().unwrap_or(0),
                sets_explored: explored,
                path_bound,
                subset_bound,
            })
        }
    }
}

/// Replays a witness: every path follows real edges of the recorded
/// classes and all paths end in `end_state`.
pub fn verify_witness(g: &PreimageGraph, w: &SyncWitness) -> bool {
    w.paths.len() == g.state_count()
        && w.paths.iter().enumerate().all(|(start, path)| {
            path.len() == w.classes.len()
                && path
                    .iter()
                    .zip(&w.classes)
                    .try_fold(start, |cur, (step, &class)| {
                        (g.p().class_of(step.symbol) == class
                            && g.target(cur, step.symbol) == step.to)
                            .then_some(step.to)
                    })
                    == Some(w.end_state)
        })
}

/// A certificate is valid when it contains the full set, no singleton, and
/// every one-step successor of every member.
pub fn verify_certificate(g: &PreimageGraph, family: &[Vec<usize>], caps: &Caps) -> Result<bool> {
    let n = g.state_count();
    let as_bits = |set: &Vec<usize>| set.iter().fold(0u128, |acc, &i| acc | (1u128 << i));
    let members: std::collections::HashSet<u128> = family.iter().map(as_bits).collect();
    let full: u128 = if n == 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    };
    if !members.contains(&full) || members.iter().any(|m| m.count_ones() <= 1) {
        return Ok(false);
    }
    for &set in &members {
        for class in 0..g.p().classes().len() {
            for (next, _) in successors(g, set, class, caps)? {
                if !members.contains(&next) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[&str]]) -> StochasticMatrix {
        let rows: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
        StochasticMatrix::parse(&rows).unwrap()
    }

    fn counterexample() -> StochasticMatrix {
        matrix(&[&["2/3", "1/3"], &["1/3", "2/3"]])
    }

    fn circulant() -> StochasticMatrix {
        matrix(&[
            &["1/2", "1/4", "1/4"],
            &["1/4", "1/2", "1/4"],
            &["1/4", "1/4", "1/2"],
        ])
    }

    #[test]
    fn stationary_examples() {
        let q = stationary(&counterexample()).unwrap();
        assert!((q[0] - 0.5).abs() < 1e-15 && (q[1] - 0.5).abs() < 1e-15);
        let q = stationary(&circulant()).unwrap();
        for x in &q {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let id = matrix(&[&["1", "0"], &["0", "1"]]);
        assert_eq!(stationary(&id), Err(Error::Reducible));
    }

    #[test]
    fn stochastic_validation() {
        assert!(StochasticMatrix::parse(&[vec!["1/2", "1/3"], vec!["1/2", "1/2"]]).is_err());
        assert!(StochasticMatrix::parse(&[vec!["3/2", "-1/2"], vec!["1/2", "1/2"]]).is_err());
        assert!(StochasticMatrix::parse(&[vec!["1"], vec!["1"]]).is_err());
    }

    #[test]
    fn end_p_examples() {
        let p = end_p_check(&counterexample());
        let p = p.vector().unwrap();
        assert_eq!(p.to_string(), "(1/3, 2/3)");
        let id = matrix(&[&["1", "0"], &["0", "1"]]);
        assert!(matches!(
            end_p_check(&id),
            EndCheck::Rejected { row: None, .. }
        ));
        let bad = matrix(&[
            &["1/2", "1/2", "0"],
            &["0", "1/3", "2/3"],
            &["1/2", "0", "1/2"],
        ]);
        assert!(matches!(
            end_p_check(&bad),
            EndCheck::Rejected { row: Some(1), .. }
        ));
    }

    #[test]
    fn counterexample_graph_edges() {
        let g = preimage_graph_from_markov(&counterexample(), None).unwrap();
        // symbol 0 has weight 1/3, symbol 1 weight 2/3
        assert_eq!(g.targets(), &[vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn bernoulli_and_circulant_graphs() {
        let rows = matrix(&[
            &["1/6", "1/3", "1/2"],
            &["1/6", "1/3", "1/2"],
            &["1/6", "1/3", "1/2"],
        ]);
        let g = preimage_graph_from_markov(&rows, None).unwrap();
        assert!(g.targets().iter().all(|row| row == &vec![0, 1, 2]));
        let g = preimage_graph_from_markov(&circulant(), None).unwrap();
        assert_eq!(g.edge_count(), 9);
        for i in 0..3 {
            assert_eq!(g.target(i, 2), i, "weight-1/2 edge is a self-loop");
        }
        assert_eq!(g.targets()[0], vec![1, 2, 0]);
    }

    #[test]
    fn decide_examples() {
        let caps = Caps::default();
        let g = preimage_graph_from_markov(&counterexample(), None).unwrap();
        let v = decide_tvwb(&g, &caps).unwrap();
        assert!(!v.decision);
        assert_eq!(v.certificate, Some(vec![vec![0, 1]]));
        assert!(verify_certificate(&g, v.certificate.as_ref().unwrap(), &caps).unwrap());

        let g = preimage_graph_from_markov(&circulant(), None).unwrap();
        let v = decide_tvwb(&g, &caps).unwrap();
        assert!(v.decision);
        let w = v.witness.unwrap();
        assert_eq!(w.weights, vec![0.25, 0.25]);
        assert!(verify_witness(&g, &w));

        let p = ProbVector::parse(&["1/6", "1/3", "1/2"]).unwrap();
        let v = decide_tvwb(&PreimageGraph::bernoulli(&p), &caps).unwrap();
        assert!(v.decision);
        assert_eq!(v.depth, 1);
        assert_eq!(v.witness.unwrap().end_state, 0);
    }

    #[test]
    fn sufficient_conditions() {
        assert_eq!(sufficient_shared_entries(&circulant()), Ok(true));
        assert_eq!(sufficient_shared_entries(&counterexample()), Ok(false));
        let uniform = matrix(&[
            &["1/2", "1/2", "0"],
            &["0", "1/2", "1/2"],
            &["1/2", "0", "1/2"],
        ]);
        assert_eq!(
            sufficient_mixing_uniform(&uniform),
            Sufficiency::Holds(true)
        );
        let perm = matrix(&[&["0", "1"], &["1", "0"]]);
        // p = (1): inapplicable because End(p) needs s >= 2.
        assert_eq!(sufficient_mixing_uniform(&perm), Sufficiency::Inapplicable);
        let block_perm = matrix(&[
            &["0", "0", "1/2", "1/2"],
            &["0", "0", "1/2", "1/2"],
            &["1/2", "1/2", "0", "0"],
            &["1/2", "1/2", "0", "0"],
        ]);
        assert_eq!(
            sufficient_mixing_uniform(&block_perm),
            Sufficiency::Holds(false)
        );
        assert_eq!(
            sufficient_mixing_uniform(&counterexample()),
            Sufficiency::Inapplicable
        );
    }

    #[test]
    fn sync_bounds() {
        assert_eq!(sync_bound(1).unwrap(), BigUint::from(1u32));
        assert_eq!(sync_bound(2).unwrap(), BigUint::from(64u32));
        assert_eq!(sync_bound(3).unwrap(), BigUint::from(19683u32));
        assert!(sync_bound(0).is_err());
    }

    #[test]
    fn extension_graphs() {
        let caps = Caps::default();
        let p = ProbVector::parse(&["0.3", "0.3", "0.4"]).unwrap();
        let z3 = FiniteAbelianGroup::cyclic(3).unwrap();
        let g = preimage_graph_from_extension(&p, &z3, &[0, 1, 0]).unwrap();
        assert_eq!(g.state_count(), 9);
        // (1,h) via symbols (2,1) and (1,e) via (1,1) both reach (1,e).
        let (one_e, one_h) = (extension_state(&z3, 0, 0), extension_state(&z3, 0, 1));
        assert_eq!(g.target(g.target(one_e, 0), 0), one_e);
        assert_eq!(g.target(g.target(one_h, 1), 0), one_e);
        let v = decide_tvwb(&g, &caps).unwrap();
        assert!(v.decision);
        assert!(verify_witness(&g, v.witness.as_ref().unwrap()));

        let trivial = preimage_graph_from_extension(&p, &z3, &[0, 0, 0]).unwrap();
        let v = decide_tvwb(&trivial, &caps).unwrap();
        assert!(!v.decision);
        assert!(verify_certificate(&trivial, v.certificate.as_ref().unwrap(), &caps).unwrap());

        let z1 = FiniteAbelianGroup::cyclic(1).unwrap();
        let g1 = preimage_graph_from_extension(&p, &z1, &[0, 0, 0]).unwrap();
        assert_eq!(g1.targets(), PreimageGraph::bernoulli(&p).targets());
        assert!(preimage_graph_from_extension(&p, &z3, &[0, 1]).is_err());
    }

    #[test]
    fn product_groups() {
        let g = FiniteAbelianGroup::new(vec![2, 3]).unwrap();
        assert_eq!(g.order(), 6);
        for x in 0..6 {
            assert_eq!(g.encode(&g.decode(x)).unwrap(), x);
            assert_eq!(g.sub(x, x), 0);
        }
        assert_eq!(
            g.decode(g.sub(g.encode(&[0, 0]).unwrap(), g.encode(&[1, 1]).unwrap())),
            vec![1, 2]
        );
    }
}
