//! Example systems: samplers, preimage trees, p-names, genericity and the
//! empirical tvwB profile.
//!
//! A sampled point stores its coordinates as a stream with `stream[t]` the
//! current symbol (or state) of `T^t x`, so `stream[0]` alone determines the
//! preimage tree. Markov streams are generated forward from the stationary
//! vector and then reversed, because `stream[t]` is a preimage step from
//! `stream[t + 1]` with conditional probability `A[stream[t+1]][stream[t]]`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::markov::{
    extension_state, preimage_graph_from_extension, preimage_graph_from_markov, stationary,
    FiniteAbelianGroup, PreimageGraph, StochasticMatrix,
};
use crate::prob::{child_index, ProbVector};
use crate::seed::derive_seed;
use crate::tbar::{tbar_value_dags, Dag};
use crate::tree::{Label, LabelSpace, TreeName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemKind {
    Bernoulli,
    Markov,
    FiniteGroupExtension,
    CircleExtension,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Bernoulli => "bernoulli",
            SystemKind::Markov => "markov",
            SystemKind::FiniteGroupExtension => "finite-group-extension",
            SystemKind::CircleExtension => "circle-extension",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemParams {
    Bernoulli,
    Markov {
        matrix: StochasticMatrix,
        stationary: Vec<f64>,
        graph: PreimageGraph,
    },
    GroupExtension {
        group: FiniteAbelianGroup,
        /// `φ_j` per symbol, encoded group elements.
        cocycle: Vec<usize>,
        graph: PreimageGraph,
    },
    CircleExtension {
        /// Rotation amount `α_j ∈ [0, 1)` per symbol.
        alphas: Vec<f64>,
    },
}

/// One of the supported example systems, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDescriptor {
    p: ProbVector,
    params: SystemParams,
}

impl SystemDescriptor {
    pub fn bernoulli(p: ProbVector) -> Self {
        SystemDescriptor {
            p,
            params: SystemParams::Bernoulli,
        }
    }

    /// `X_A⁻`; requires End(p) rows and irreducibility.
    pub fn markov(matrix: StochasticMatrix) -> Result<Self> {
        let graph = preimage_graph_from_markov(&matrix, None)?;
        let stationary = stationary(&matrix)?;
        Ok(SystemDescriptor {
            p: graph.p().clone(),
            params: SystemParams::Markov {
                matrix,
                stationary,
                graph,
            },
        })
    }

    pub fn group_extension(
        p: ProbVector,
        group: FiniteAbelianGroup,
        cocycle: Vec<usize>,
    ) -> Result<Self> {
        let graph = preimage_graph_from_extension(&p, &group, &cocycle)?;
        Ok(SystemDescriptor {
            p,
            params: SystemParams::GroupExtension {
                group,
                cocycle,
                graph,
            },
        })
    }

    pub fn circle_extension(p: ProbVector, alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() != p.len() {
            return Err(Error::InvalidDescriptor(format!(
                "{} rotation amounts for {} symbols",
                alphas.len(),
                p.len()
            )));
        }
        if let Some(bad) = alphas.iter().find(|a| !(0.0..1.0).contains(*a)) {
            return Err(Error::InvalidDescriptor(format!(
                "rotation amount {bad} outside [0, 1)"
            )));
        }
        Ok(SystemDescriptor {
            p,
            params: SystemParams::CircleExtension { alphas },
        })
    }

    pub fn p(&self) -> &ProbVector {
        &self.p
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn kind(&self) -> SystemKind {
        match self.params {
            SystemParams::Bernoulli => SystemKind::Bernoulli,
            SystemParams::Markov { .. } => SystemKind::Markov,
            SystemParams::GroupExtension { .. } => SystemKind::FiniteGroupExtension,
            SystemParams::CircleExtension { .. } => SystemKind::CircleExtension,
        }
    }

    /// The finite-state preimage graph, when the system has one. Bernoulli
    /// systems use the graph whose states are the symbols.
    pub fn graph(&self) -> Option<PreimageGraph> {
        match &self.params {
            SystemParams::Bernoulli => Some(PreimageGraph::bernoulli(&self.p)),
            SystemParams::Markov { graph, .. } | SystemParams::GroupExtension { graph, .. } => {
                Some(graph.clone())
            }
            SystemParams::CircleExtension { .. } => None,
        }
    }
}

/// Fiber coordinate of an extension point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fiber {
    Group(usize),
    Circle(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    /// `stream[t]` is the current symbol (state for Markov) of `T^t x`.
    pub stream: Vec<usize>,
    /// Present iff the system is an extension.
    pub fiber: Option<Fiber>,
    pub seed_trace: Vec<u64>,
}

fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w / total;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// A finite realisation of a `μ`-distributed point, deterministic in `seed`.
pub fn sample_point(d: &SystemDescriptor, length: usize, seed: u64) -> Result<PointSample> {
    if length == 0 {
        return Err(Error::Domain("sample length must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = d.p().components();
    let iid = |rng: &mut ChaCha8Rng| (0..length).map(|_| draw(rng, p)).collect::<Vec<_>>();
    let (stream, fiber) = match d.params() {
        SystemParams::Bernoulli => (iid(&mut rng), None),
        SystemParams::Markov {
            matrix, stationary, ..
        } => {
            let rows = matrix.to_f64();
            let mut forward = Vec::with_capacity(length);
            let mut state = draw(&mut rng, stationary);
            forward.push(state);
            for _ in 1..length {
                state = draw(&mut rng, &rows[state]);
                forward.push(state);
            }
            forward.reverse();
            (forward, None)
        }
        SystemParams::GroupExtension { group, .. } => {
            let stream = iid(&mut rng);
            let g = rng.random_range(0..group.order());
            (stream, Some(Fiber::Group(g)))
        }
        SystemParams::CircleExtension { .. } => {
            let stream = iid(&mut rng);
            let g: f64 = rng.random();
            (stream, Some(Fiber::Circle(g)))
        }
    };
    Ok(PointSample {
        stream,
        fiber,
        seed_trace: vec![seed],
    })
}

/// Which labels a preimage tree carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// Leading symbol (the state, for Markov shifts).
    Symbol,
    /// Leading symbol together with the fiber coordinate. Circle fibers give
    /// [`Label::SymbolFiber`]; finite-group fibers give the discrete label
    /// of the pair `(symbol, g)`, numbered as the extension graph's states.
    SymbolAndFiber,
}

impl LabelMode {
    pub fn name(self) -> &'static str {
        match self {
            LabelMode::Symbol => "symbol",
            LabelMode::SymbolAndFiber => "symbol-and-fiber",
        }
    }

    /// Fiber labels for extensions, symbols otherwise.
    pub fn natural(d: &SystemDescriptor) -> LabelMode {
        match d.kind() {
            SystemKind::Bernoulli | SystemKind::Markov => LabelMode::Symbol,
            SystemKind::FiniteGroupExtension | SystemKind::CircleExtension => {
                LabelMode::SymbolAndFiber
            }
        }
    }
}

fn check_mode(d: &SystemDescriptor, mode: LabelMode) -> Result<()> {
    let ok = matches!(
        (d.kind(), mode),
        (
            SystemKind::Bernoulli | SystemKind::Markov,
            LabelMode::Symbol
        ) | (SystemKind::FiniteGroupExtension, _)
            | (SystemKind::CircleExtension, LabelMode::SymbolAndFiber)
    );
    if ok {
        Ok(())
    } else {
        Err(Error::LabelKindMismatch {
            mode: mode.name(),
            kind: d.kind().name(),
        })
    }
}

fn check_point(d: &SystemDescriptor, x: &PointSample) -> Result<()> {
    if x.stream.is_empty() {
        return Err(Error::InvalidDescriptor("empty point stream".into()));
    }
    let range = match d.params() {
        SystemParams::Markov { matrix, .. } => matrix.dim(),
        _ => d.p().len(),
    };
    if let Some(bad) = x.stream.iter().find(|&&a| a >= range) {
        return Err(Error::InvalidDescriptor(format!(
            "coordinate {bad} out of range for {range} symbols"
        )));
    }
    let fiber_ok = match (d.params(), x.fiber) {
        (SystemParams::GroupExtension { group, .. }, Some(Fiber::Group(g))) => g < group.order(),
        (SystemParams::CircleExtension { .. }, Some(Fiber::Circle(g))) => (0.0..1.0).contains(&g),
        (SystemParams::Bernoulli | SystemParams::Markov { .. }, None) => true,
        _ => false,
    };
    if fiber_ok {
        Ok(())
    } else {
        Err(Error::InvalidDescriptor(format!(
            "point fiber {:?} does not fit a {} system",
            x.fiber,
            d.kind().name()
        )))
    }
}

/// Labelled nodes of a height-`n` tree over `s` symbols.
pub fn tree_node_count(s: usize, height: usize) -> u128 {
    (1..=height)
        .map(|k| (s as u128).saturating_pow(k as u32))
        .fold(0, u128::saturating_add)
}

/// `g − Σ_j c_j α_j mod 1`, computed from the symbol counts in a fixed
/// order so equal count vectors give bitwise-equal fibers.
fn circle_fiber(g: f64, counts: &[u32], alphas: &[f64]) -> f64 {
    let shift: f64 = counts.iter().zip(alphas).map(|(&c, a)| c as f64 * a).sum();
    let r = (g - shift).rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// States (or count vectors) of every node, level by level.
fn graph_levels(g: &PreimageGraph, start: usize, height: usize) -> Vec<Vec<usize>> {
    let s = g.p().len();
    let mut levels: Vec<Vec<usize>> = Vec::with_capacity(height);
    let mut prev = vec![start];
    for _ in 0..height {
        let size = prev.len();
        let mut level = vec![0usize; size * s];
        for (u, &state) in prev.iter().enumerate() {
            for j in 0..s {
                level[child_index(j, u, size)] = g.target(state, j);
            }
        }
        levels.push(level.clone());
        prev = level;
    }
    levels
}

/// The tree name `v ↦ label(T_v x)` of height `height`.
pub fn preimage_tree(
    d: &SystemDescriptor,
    x: &PointSample,
    height: usize,
    mode: LabelMode,
    caps: &Caps,
) -> Result<TreeName> {
    if height == 0 {
        return Err(Error::Domain("height must be positive".into()));
    }
    check_mode(d, mode)?;
    check_point(d, x)?;
    let s = d.p().len();
    let nodes = tree_node_count(s, height);
    if nodes > caps.tree_nodes as u128 {
        return Err(Error::too_large("tree nodes", nodes, caps.tree_nodes));
    }
    let p = d.p().clone();
    match (d.params(), x.fiber) {
        (SystemParams::Bernoulli, _) | (SystemParams::GroupExtension { .. }, _)
            if mode == LabelMode::Symbol =>
        {
            TreeName::from_fn(p, height, LabelSpace::Discrete, |v| {
                Label::Symbol(v.symbols()[0] as u32)
            })
        }
        (SystemParams::Markov { graph, .. }, _) => {
            let levels = graph_levels(graph, x.stream[0], height)
                .into_iter()
                .map(|l| l.into_iter().map(|st| Label::Symbol(st as u32)).collect())
                .collect();
            TreeName::new(p, LabelSpace::Discrete, levels)
        }
        (SystemParams::GroupExtension { graph, group, .. }, Some(Fiber::Group(g))) => {
            let start = extension_state(group, x.stream[0], g);
            let levels = graph_levels(graph, start, height)
                .into_iter()
                .map(|l| l.into_iter().map(|st| Label::Symbol(st as u32)).collect())
                .collect();
            TreeName::new(p, LabelSpace::Discrete, levels)
        }
        (SystemParams::CircleExtension { alphas }, Some(Fiber::Circle(g))) => {
            let mut levels: Vec<Vec<Label>> = Vec::with_capacity(height);
            let mut prev: Vec<Vec<u32>> = vec![vec![0; s]];
            for _ in 0..height {
                let size = prev.len();
                let mut counts = vec![Vec::new(); size * s];
                let mut labels = vec![Label::Symbol(0); size * s];
                for (u, c) in prev.iter().enumerate() {
                    for j in 0..s {
                        let idx = child_index(j, u, size);
                        let mut next = c.clone();
                        next[j] += 1;
                        labels[idx] = Label::SymbolFiber {
                            symbol: j as u32,
                            fiber: circle_fiber(g, &next, alphas),
                        };
                        counts[idx] = next;
                    }
                }
                levels.push(labels);
                prev = counts;
            }
            TreeName::new(p, LabelSpace::SymbolCircle, levels)
        }
        _ => unreachable!("checked by check_mode and check_point"),
    }
}

/// `(p_X(x), p_X(Tx), …)`. Markov p-names need the coordinate after the
/// last one, so at most `stream.len() − 1` values are available there.
pub fn p_name(d: &SystemDescriptor, x: &PointSample, length: usize) -> Result<Vec<f64>> {
    check_point(d, x)?;
    match d.params() {
        SystemParams::Markov { matrix, .. } => {
            let available = x.stream.len() - 1;
            if length > available {
                return Err(Error::Domain(format!(
                    "p-name of length {length} needs {} coordinates, the point has {}",
                    length + 1,
                    x.stream.len()
                )));
            }
            let rows = matrix.to_f64();
            Ok((0..length)
                .map(|t| rows[x.stream[t + 1]][x.stream[t]])
                .collect())
        }
        _ => {
            if length > x.stream.len() {
                return Err(Error::Domain(format!(
                    "p-name of length {length} exceeds the {} sampled coordinates",
                    x.stream.len()
                )));
            }
            Ok(x.stream[..length]
                .iter()
                .map(|&a| d.p().component(a))
                .collect())
        }
    }
}

/// Dyadic midpoint `(2t+1)/2^{N+1}` of the interval `[t/2^N, (t+1)/2^N)`
/// containing `x`.
pub fn discretize(x: f64, n: u32) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("{x} is not in [0, 1)")));
    }
    if n == 0 || n > 52 {
        return Err(Error::Domain(format!("resolution {n} outside 1..=52")));
    }
    let scale = (1u64 << n) as f64;
    let t = (x * scale).floor();
    Ok((2.0 * t + 1.0) / (2.0 * scale))
}

/// A finite partition of the phase space.
#[derive(Debug, Clone, PartialEq)]
pub enum Partition {
    /// By the natural discrete label: symbol (Bernoulli, circle), state
    /// (Markov), or `(symbol, g)` pair (finite-group extension).
    Label,
    /// `cells[label]` for the natural discrete label.
    Map(Vec<usize>),
    /// Circle extensions: `(symbol, t)` with the fiber in `[t/2^N, (t+1)/2^N)`.
    Dyadic(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenericityReport {
    pub m: usize,
    /// `θ_{x,M,P}` per cell.
    pub theta: Vec<f64>,
    /// `dist(P)` per cell.
    pub reference: Vec<f64>,
    /// `Σ_c |θ(c) − dist(P)(c)|`.
    pub deviation: f64,
}

fn label_count(d: &SystemDescriptor) -> usize {
    match d.params() {
        SystemParams::Markov { matrix, .. } => matrix.dim(),
        SystemParams::GroupExtension { group, .. } => d.p().len() * group.order(),
        _ => d.p().len(),
    }
}

fn label_mass(d: &SystemDescriptor) -> Vec<f64> {
    match d.params() {
        SystemParams::Markov { stationary, .. } => stationary.clone(),
        SystemParams::GroupExtension { group, .. } => {
            let n = group.order() as f64;
            d.p()
                .components()
                .iter()
                .flat_map(|&w| std::iter::repeat_n(w / n, group.order()))
                .collect()
        }
        _ => d.p().components().to_vec(),
    }
}

fn cell_map(d: &SystemDescriptor, partition: &Partition) -> Result<(Vec<usize>, usize)> {
    let n = label_count(d);
    match partition {
        Partition::Label => Ok(((0..n).collect(), n)),
        Partition::Map(cells) => {
            if cells.len() != n {
                return Err(Error::InvalidDescriptor(format!(
                    "partition maps {} labels, the system has {n}",
                    cells.len()
                )));
            }
            let count = cells.iter().max().map_or(0, |&c| c + 1);
            Ok((cells.clone(), count))
        }
        Partition::Dyadic(_) => Err(Error::InvalidDescriptor(
            "dyadic partitions need a circle extension".into(),
        )),
    }
}

/// `θ_{x,M,P}(c) = (1/M) Σ_{0<|v|≤M, P(T_v x) = c} w_v` against `dist(P)`.
///
/// Finite-state systems propagate the level distribution over the preimage
/// graph; circle extensions propagate over symbol-count vectors. No tree is
/// expanded.
pub fn genericity(
    d: &SystemDescriptor,
    x: &PointSample,
    m: usize,
    partition: &Partition,
    caps: &Caps,
) -> Result<GenericityReport> {
    check_point(d, x)?;
    if m == 0 {
        return Err(Error::Domain("M must be positive".into()));
    }
    let p = d.p();
    let s = p.len();
    let (theta, reference) = match (d.params(), partition, x.fiber) {
        (SystemParams::CircleExtension { alphas }, _, Some(Fiber::Circle(g))) => {
            circle_theta(p, alphas, g, m, partition, caps)?
        }
        (SystemParams::Bernoulli, _, _) => {
            let (cells, count) = cell_map(d, partition)?;
            let mut theta = vec![0.0; count];
            for j in 0..s {
                theta[cells[j]] += p.component(j);
            }
            let reference = theta.clone();
            (theta, reference)
        }
        _ => {
            let (cells, count) = cell_map(d, partition)?;
            let graph = d.graph().expect("finite-state system");
            let work = (m as u128) * graph.edge_count() as u128;
            if work > caps.tree_nodes as u128 {
                return Err(Error::too_large(
                    "genericity propagation work",
                    work,
                    caps.tree_nodes,
                ));
            }
            let start = match x.fiber {
                Some(Fiber::Group(g)) => match d.params() {
                    SystemParams::GroupExtension { group, .. } => {
                        extension_state(group, x.stream[0], g)
                    }
                    _ => unreachable!(),
                },
                _ => x.stream[0],
            };
            let mut dist = vec![0.0; graph.state_count()];
            dist[start] = 1.0;
            let mut acc = vec![0.0; graph.state_count()];
            for _ in 0..m {
                dist = graph.propagate(&dist);
                for (a, x) in acc.iter_mut().zip(&dist) {
                    *a += x;
                }
            }
            let mut theta = vec![0.0; count];
            let mut reference = vec![0.0; count];
            for (label, mass) in label_mass(d).into_iter().enumerate() {
                theta[cells[label]] += acc[label] / m as f64;
                reference[cells[label]] += mass;
            }
            (theta, reference)
        }
    };
    let deviation = theta
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(GenericityReport {
        m,
        theta,
        reference,
        deviation,
    })
}

fn circle_theta(
    p: &ProbVector,
    alphas: &[f64],
    g: f64,
    m: usize,
    partition: &Partition,
    caps: &Caps,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = p.len();
    let (bits, cells, count): (u32, Vec<usize>, usize) = match partition {
        Partition::Label => (0, (0..s).collect(), s),
        Partition::Map(cells) => {
            if cells.len() != s {
                return Err(Error::InvalidDescriptor(format!(
                    "partition maps {} labels, the system has {s}",
                    cells.len()
                )));
            }
            (0, cells.clone(), cells.iter().max().map_or(0, |&c| c + 1))
        }
        Partition::Dyadic(n) => {
            if *n == 0 || *n > 20 {
                return Err(Error::Domain(format!(
                    "dyadic resolution {n} outside 1..=20"
                )));
            }
            (*n, (0..s).collect(), s << n)
        }
    };
    let intervals = 1usize << bits;
    let cell_of = |symbol: usize, fiber: f64| -> usize {
        let t = ((fiber * intervals as f64).floor() as usize).min(intervals - 1);
        cells[symbol] * intervals + t
    };
    let mut theta = vec![0.0; count.max(cells.iter().max().map_or(0, |&c| c + 1) * intervals)];
    // Probability of each symbol-count vector at the current depth.
    let mut level: HashMap<Vec<u32>, f64> = HashMap::from([(vec![0u32; s], 1.0)]);
    let mut work: u128 = 0;
    for k in 1..=m {
        let mut next: HashMap<Vec<u32>, f64> = HashMap::with_capacity(level.len() * 2);
        for (c, mass) in &level {
            for j in 0..s {
                let mut d = c.clone();
                d[j] += 1;
                *next.entry(d).or_insert(0.0) += mass * p.component(j);
            }
        }
        work += next.len() as u128;
        if work > caps.tree_nodes as u128 {
            return Err(Error::too_large(
                "genericity count vectors",
                work,
                caps.tree_nodes,
            ));
        }
        // Given the counts, every arrangement is equally likely, so the
        // leading symbol is j with probability c_j / k.
        for (c, mass) in &next {
            let fiber = circle_fiber(g, c, alphas);
            for j in 0..s {
                if c[j] > 0 {
                    theta[cell_of(j, fiber)] += mass * c[j] as f64 / k as f64 / m as f64;
                }
            }
        }
        level = next;
    }
    let mut reference = vec![0.0; theta.len()];
    for j in 0..s {
        for t in 0..intervals {
            reference[cells[j] * intervals + t] += p.component(j) / intervals as f64;
        }
    }
    Ok((theta, reference))
}

/// Grid used by the ε̂ estimator: `0.01, 0.02, …, 1.00`.
pub const EPS_GRID_STEPS: u32 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub height: usize,
    /// `min{ε on the grid : #{t̄_n < ε}/pairs ≥ (1−ε)²}`.
    pub eps_hat: f64,
    pub mean: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvwbProfile {
    pub samples: usize,
    pub pairs: usize,
    pub seed: u64,
    pub rows: Vec<ProfileRow>,
}

/// ε̂ for a batch of pair distances.
pub fn eps_hat(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    (1..=EPS_GRID_STEPS)
        .map(|k| k as f64 / EPS_GRID_STEPS as f64)
        .find(|&eps| {
            let below = values.iter().filter(|&&v| v < eps).count() as f64;
            below / n >= (1.0 - eps) * (1.0 - eps)
        })
        .unwrap_or(1.0)
}

/// Seed stream for pair selection, kept apart from the point seeds.
const PAIR_STREAM: u64 = u64::MAX;

/// The (i, j) sample indices of every pair, `i ≠ j`.
pub fn profile_pairs(samples: usize, pairs: usize, seed: u64) -> Vec<(usize, usize)> {
    let base = derive_seed(seed, PAIR_STREAM);
    (0..pairs)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, k as u64));
            let i = rng.random_range(0..samples);
            let mut j = rng.random_range(0..samples - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect()
}

/// Empirical ε̂(n) over sampled points: point `i` uses `derive_seed(seed,
/// i)`, the pairs come from [`profile_pairs`].
pub fn estimate_tvwb_profile(
    d: &SystemDescriptor,
    heights: &[usize],
    samples: usize,
    pairs: usize,
    seed: u64,
    caps: &Caps,
    exec: Exec,
) -> Result<TvwbProfile> {
    if samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    if pairs == 0 {
        return Err(Error::Domain("need at least one pair".into()));
    }
    if heights.is_empty() || heights.contains(&0) {
        return Err(Error::Domain("heights must be positive".into()));
    }
    let top = *heights.iter().max().expect("non-empty");
    let s = d.p().len();
    let total = tree_node_count(s, top).saturating_mul(samples as u128);
    if total > caps.tree_nodes as u128 {
        return Err(Error::too_large(
            "sampled tree nodes",
            total,
            caps.tree_nodes,
        ));
    }
    let mode = LabelMode::natural(d);
    let dags: Vec<Vec<Dag>> = exec.try_map_indexed(samples, |i| {
        let x = sample_point(d, 1, derive_seed(seed, i as u64))?;
        let t = preimage_tree(d, &x, top, mode, caps)?;
        heights
            .iter()
            .map(|&n| Ok(Dag::from_name(&t.truncate(n)?)))
            .collect()
    })?;
    let chosen = profile_pairs(samples, pairs, seed);
    let mut rows = Vec::with_capacity(heights.len());
    for (h, &n) in heights.iter().enumerate() {
        let values = exec.try_map_indexed(pairs, |k| {
            let (i, j) = chosen[k];
            tbar_value_dags(d.p(), &dags[i][h], &dags[j][h], caps)
        })?;
        rows.push(ProfileRow {
            height: n,
            eps_hat: eps_hat(&values),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            values,
        });
    }
    Ok(TvwbProfile {
        samples,
        pairs,
        seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Node;
    use crate::rational::to_f64;
    use crate::tbar::tbar_exact;

    fn pv(xs: &[&str]) -> ProbVector {
        ProbVector::parse(xs).unwrap()
    }

    fn counterexample() -> SystemDescriptor {
        SystemDescriptor::markov(
            StochasticMatrix::parse(&[vec!["2/3", "1/3"], vec!["1/3", "2/3"]]).unwrap(),
        )
        .unwrap()
    }

    fn example_521() -> SystemDescriptor {
        SystemDescriptor::group_extension(
            pv(&["0.3", "0.3", "0.4"]),
            FiniteAbelianGroup::cyclic(3).unwrap(),
            vec![0, 1, 0],
        )
        .unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = example_521();
        assert_eq!(
            sample_point(&d, 50, 9).unwrap(),
            sample_point(&d, 50, 9).unwrap()
        );
        assert_ne!(
            sample_point(&d, 50, 9).unwrap(),
            sample_point(&d, 50, 10).unwrap()
        );
        assert!(sample_point(&d, 0, 9).is_err());
    }

    #[test]
    fn bernoulli_frequency() {
        let d = SystemDescriptor::bernoulli(pv(&["1/2", "1/2"]));
        let x = sample_point(&d, 10_000, 2024).unwrap();
        let f = x.stream.iter().filter(|&&a| a == 0).count() as f64 / 1e4;
        assert!((f - 0.5).abs() < 0.02, "{f}");
    }

    #[test]
    fn markov_frequency() {
        let x = sample_point(&counterexample(), 10_000, 2024).unwrap();
        let f = x.stream.iter().filter(|&&a| a == 0).count() as f64 / 1e4;
        assert!((f - 0.5).abs() < 0.02, "{f}");
    }

    #[test]
    fn bernoulli_tree_is_leading_symbol() {
        let d = SystemDescriptor::bernoulli(pv(&["1/4", "3/4"]));
        let x = sample_point(&d, 3, 1).unwrap();
        let t = preimage_tree(&d, &x, 4, LabelMode::Symbol, &Caps::default()).unwrap();
        for k in 1..=4 {
            for i in 0..(1 << k) {
                let v = Node::from_index(k, i, 2);
                assert_eq!(t.label(&v).unwrap(), Label::Symbol(v.symbols()[0] as u32));
            }
        }
    }

    #[test]
    fn counterexample_tree_parity() {
        let d = counterexample();
        let x = PointSample {
            stream: vec![0],
            fiber: None,
            seed_trace: vec![],
        };
        let t = preimage_tree(&d, &x, 6, LabelMode::Symbol, &Caps::default()).unwrap();
        for k in 1..=6 {
            for i in 0..(1 << k) {
                let v = Node::from_index(k, i, 2);
                let ones = v.symbols().iter().filter(|&&a| a == 0).count();
                let expected = if ones % 2 == 0 { 0 } else { 1 };
                assert_eq!(t.label(&v).unwrap(), Label::Symbol(expected));
            }
        }
        let y = PointSample {
            stream: vec![1],
            ..x
        };
        let u = preimage_tree(&d, &y, 6, LabelMode::Symbol, &Caps::default()).unwrap();
        assert_eq!(tbar_exact(&t, &u).unwrap().value, 1.0);
    }

    #[test]
    fn markov_edges_carry_branch_weights() {
        let m = StochasticMatrix::parse(&[
            vec!["1/2", "1/4", "1/4"],
            vec!["1/4", "1/2", "1/4"],
            vec!["1/4", "1/4", "1/2"],
        ])
        .unwrap();
        let d = SystemDescriptor::markov(m.clone()).unwrap();
        let x = sample_point(&d, 1, 3).unwrap();
        let t = preimage_tree(&d, &x, 5, LabelMode::Symbol, &Caps::default()).unwrap();
        let state = |v: &Node| -> usize {
            if v.is_root() {
                x.stream[0]
            } else {
                match t.label(v).unwrap() {
                    Label::Symbol(a) => a as usize,
                    _ => unreachable!(),
                }
            }
        };
        for k in 1..=5 {
            for i in 0..3usize.pow(k as u32) {
                let v = Node::from_index(k, i, 3);
                let w = to_f64(m.entry(state(&v.sigma()), state(&v)));
                assert_eq!(w, d.p().component(v.symbols()[0]));
            }
        }
    }

    #[test]
    fn circle_fiber_telescopes() {
        let alphas = vec![0.1, 0.7];
        let d = SystemDescriptor::circle_extension(pv(&["1/2", "1/2"]), alphas.clone()).unwrap();
        let x = sample_point(&d, 1, 5).unwrap();
        let Some(Fiber::Circle(g)) = x.fiber else {
            panic!()
        };
        let t = preimage_tree(&d, &x, 6, LabelMode::SymbolAndFiber, &Caps::default()).unwrap();
        for k in 1..=6 {
            for i in 0..(1 << k) {
                let v = Node::from_index(k, i, 2);
                let shift: f64 = v.symbols().iter().map(|&a| alphas[a]).sum();
                let expected = (g - shift).rem_euclid(1.0);
                match t.label(&v).unwrap() {
                    Label::SymbolFiber { symbol, fiber } => {
                        assert_eq!(symbol as usize, v.symbols()[0]);
                        assert!(crate::tree::arc_distance(fiber, expected) < 1e-15);
                    }
                    _ => panic!(),
                }
            }
        }
        assert!(matches!(
            preimage_tree(&d, &x, 3, LabelMode::Symbol, &Caps::default()),
            Err(Error::LabelKindMismatch { .. })
        ));
    }

    #[test]
    fn group_extension_projects_to_bernoulli() {
        let d = example_521();
        let b = SystemDescriptor::bernoulli(d.p().clone());
        let x = sample_point(&d, 4, 8).unwrap();
        let caps = Caps::default();
        let t = preimage_tree(&d, &x, 4, LabelMode::Symbol, &caps).unwrap();
        let xb = PointSample {
            fiber: None,
            ..x.clone()
        };
        assert_eq!(
            t,
            preimage_tree(&b, &xb, 4, LabelMode::Symbol, &caps).unwrap()
        );
        let full = preimage_tree(&d, &x, 4, LabelMode::SymbolAndFiber, &caps).unwrap();
        for (la, lb) in full
            .levels()
            .iter()
            .flatten()
            .zip(t.levels().iter().flatten())
        {
            match (la, lb) {
                (Label::Symbol(pair), Label::Symbol(sym)) => assert_eq!(pair / 3, *sym),
                _ => panic!(),
            }
        }
        assert_eq!(p_name(&d, &x, 4).unwrap(), p_name(&b, &xb, 4).unwrap());
    }

    #[test]
    fn p_names() {
        let d = SystemDescriptor::bernoulli(pv(&["1/3", "2/3"]));
        let x = PointSample {
            stream: vec![1, 0, 1],
            fiber: None,
            seed_trace: vec![],
        };
        assert_eq!(
            p_name(&d, &x, 3).unwrap(),
            vec![2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]
        );
        assert!(p_name(&d, &x, 4).is_err());
        let d = counterexample();
        let x = sample_point(&d, 200, 4).unwrap();
        for w in p_name(&d, &x, 199).unwrap() {
            assert!(w == 1.0 / 3.0 || w == 2.0 / 3.0);
        }
        assert!(p_name(&d, &x, 200).is_err());
    }

    #[test]
    fn discretize_examples() {
        assert_eq!(discretize(0.3, 2).unwrap(), 0.375);
        assert_eq!(discretize(0.0, 5).unwrap(), 1.0 / 64.0);
        assert_eq!(discretize(0.99, 1).unwrap(), 0.75);
        assert!(discretize(1.0, 3).is_err());
        assert!(discretize(-0.1, 3).is_err());
        assert!(discretize(0.5, 0).is_err());
    }

    #[test]
    fn genericity_examples() {
        let caps = Caps::default();
        let p = pv(&["1/6", "1/3", "1/2"]);
        let d = SystemDescriptor::bernoulli(p.clone());
        let x = sample_point(&d, 1, 0).unwrap();
        for m in [1, 7, 100] {
            let r = genericity(&d, &x, m, &Partition::Label, &caps).unwrap();
            assert_eq!(r.theta, p.components());
            assert_eq!(r.deviation, 0.0);
        }
        let d = counterexample();
        let x = sample_point(&d, 1, 0).unwrap();
        let r = genericity(&d, &x, 2000, &Partition::Label, &caps).unwrap();
        assert!(r.deviation <= 0.05);
        assert!((r.theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let one = genericity(&d, &x, 1, &Partition::Label, &caps).unwrap();
        let row = if x.stream[0] == 0 {
            [2.0 / 3.0, 1.0 / 3.0]
        } else {
            [1.0 / 3.0, 2.0 / 3.0]
        };
        assert_eq!(one.theta, row);
    }

    #[test]
    fn circle_genericity_sums_to_one() {
        let caps = Caps::default();
        let d = SystemDescriptor::circle_extension(
            pv(&["1/2", "1/2"]),
            vec![0.0, 0.618_033_988_749_895],
        )
        .unwrap();
        let x = sample_point(&d, 1, 3).unwrap();
        for part in [Partition::Label, Partition::Dyadic(3)] {
            let r = genericity(&d, &x, 300, &part, &caps).unwrap();
            assert!((r.theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((r.reference.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eps_hat_grid() {
        assert_eq!(eps_hat(&[0.0; 10]), 0.01);
        assert_eq!(eps_hat(&[1.0; 10]), 1.0);
        let half: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 0.0 } else { 1.0 })
            .collect();
        // smallest ε with 1/2 ≥ (1−ε)²
        assert_eq!(eps_hat(&half), 0.3);
    }

    #[test]
    fn profile_modes_agree() {
        let d = counterexample();
        let caps = Caps::default();
        let a = estimate_tvwb_profile(&d, &[2, 4], 20, 30, 7, &caps, Exec::Sequential).unwrap();
        let b = estimate_tvwb_profile(&d, &[2, 4], 20, 30, 7, &caps, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        for row in &a.rows {
            assert!(row.values.iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }
}
