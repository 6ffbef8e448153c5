//! Cross-checks of the fast paths against independent oracles.

use tvwb_core::dynsim::{preimage_tree, LabelMode, PointSample, SystemDescriptor};
use tvwb_core::markov::{
    preimage_graph_from_extension, preimage_graph_from_markov, FiniteAbelianGroup, PreimageGraph,
    StochasticMatrix,
};
use tvwb_core::rational::Rational;
use tvwb_core::tbar::{tbar_bruteforce, tbar_exact, tbar_states};
use tvwb_core::tree::random_tree_name;
use tvwb_core::{Caps, Label, LabelSpace, Node, ProbVector, TreeName};

fn pv(xs: &[&str]) -> ProbVector {
    ProbVector::parse(xs).unwrap()
}

fn matrix(rows: &[&[&str]]) -> StochasticMatrix {
    let rows: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
    StochasticMatrix::parse(&rows).unwrap()
}

fn circulant() -> StochasticMatrix {
    matrix(&[
        &["1/2", "1/4", "1/4"],
        &["1/4", "1/2", "1/4"],
        &["1/4", "1/4", "1/2"],
    ])
}

/// Explicit state tree name of `state`, read level by level off the graph.
fn expanded(g: &PreimageGraph, state: usize, height: usize) -> TreeName {
    let s = g.p().len();
    TreeName::from_fn(g.p().clone(), height, LabelSpace::Discrete, |v| {
        let mut cur = state;
        for &a in v.symbols().iter().rev() {
            cur = g.target(cur, a);
        }
        Label::Symbol(cur as u32)
    })
    .inspect(|t| assert_eq!(t.level(1).len(), s))
    .unwrap()
}

#[test]
fn exact_matches_bruteforce_on_random_pairs() {
    let caps = Caps::default();
    let cases: [(&[&str], usize, u32); 7] = [
        (&["1/2", "1/2"], 2, 2),
        (&["1/2", "1/2"], 3, 3),
        (&["1/3", "2/3"], 3, 2),
        (&["1/3", "1/3", "1/3"], 2, 2),
        (&["1/4", "1/4", "1/2"], 2, 3),
        (&["1/4", "1/4", "1/2"], 3, 2),
        (&["1/6", "1/3", "1/2"], 3, 3),
    ];
    let mut checked = 0;
    for seed in 0..200u64 {
        let (p, n, alphabet) = cases[seed as usize % cases.len()];
        let p = pv(p);
        let t1 = random_tree_name(&p, n, alphabet, 2 * seed).unwrap();
        let t2 = random_tree_name(&p, n, alphabet, 2 * seed + 1).unwrap();
        let fast = tbar_exact(&t1, &t2).unwrap();
        let slow = tbar_bruteforce(&t1, &t2, &caps).unwrap();
        assert!(
            (fast.value - slow.value).abs() <= 1e-12,
            "seed {seed}: {} vs {}",
            fast.value,
            slow.value
        );
        checked += 1;
    }
    assert_eq!(checked, 200);
}

#[test]
fn state_distances_match_expanded_names() {
    let caps = Caps::default();
    let z3 = FiniteAbelianGroup::cyclic(3).unwrap();
    let graphs = [
        preimage_graph_from_markov(&circulant(), None).unwrap(),
        preimage_graph_from_markov(&matrix(&[&["2/3", "1/3"], &["1/3", "2/3"]]), None).unwrap(),
        preimage_graph_from_extension(&pv(&["0.3", "0.3", "0.4"]), &z3, &[0, 1, 0]).unwrap(),
    ];
    for g in &graphs {
        let heights: Vec<usize> = (1..=5).collect();
        let table = tbar_states(g, &heights, &caps).unwrap();
        let n = g.state_count();
        for (h, &m) in heights.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let direct = tbar_exact(&expanded(g, i, m), &expanded(g, j, m))
                        .unwrap()
                        .value;
                    assert!((table.matrices[h][i][j] - direct).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn state_distances_match_bruteforce() {
    let caps = Caps::default();
    let circ = preimage_graph_from_markov(&circulant(), None).unwrap();
    let table = tbar_states(&circ, &[1, 2, 3], &caps).unwrap();
    for (h, m) in [1usize, 2, 3].into_iter().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                let slow = tbar_bruteforce(&expanded(&circ, i, m), &expanded(&circ, j, m), &caps)
                    .unwrap()
                    .value;
                assert!((table.matrices[h][i][j] - slow).abs() <= 1e-12);
            }
        }
    }
}

/// Canonical partition re-derived from the matrix alone: the symbol of
/// rank `r` inside its weight class goes to the `r`-th state (ascending)
/// whose entry equals that weight.
fn direct_state(a: &StochasticMatrix, p: &ProbVector, start: usize, v: &Node) -> usize {
    let exact = p.exact().unwrap();
    let mut cur = start;
    for &sym in v.symbols().iter().rev() {
        let w: &Rational = &exact[sym];
        let rank = p.classes()[p.class_of(sym)]
            .iter()
            .position(|&x| x == sym)
            .unwrap();
        cur = (0..a.dim())
            .filter(|&j| a.entry(cur, j) == w)
            .nth(rank)
            .unwrap();
    }
    cur
}

#[test]
fn graph_trees_match_direct_preimage_enumeration() {
    let caps = Caps::default();
    let matrices = [
        circulant(),
        matrix(&[&["2/3", "1/3"], &["1/3", "2/3"]]),
        matrix(&[
            &["1/4", "0", "1/4", "1/2"],
            &["1/2", "1/4", "0", "1/4"],
            &["0", "1/2", "1/4", "1/4"],
            &["1/4", "1/4", "1/2", "0"],
        ]),
    ];
    for a in &matrices {
        let d = SystemDescriptor::markov(a.clone()).unwrap();
        let p = d.p().clone();
        let s = p.len();
        for start in 0..a.dim() {
            let x = PointSample {
                stream: vec![start],
                fiber: None,
                seed_trace: vec![],
            };
            let t = preimage_tree(&d, &x, 6, LabelMode::Symbol, &caps).unwrap();
            for k in 1..=6 {
                for i in 0..s.pow(k as u32) {
                    let v = Node::from_index(k, i, s);
                    let expected = direct_state(a, &p, start, &v);
                    assert_eq!(t.label(&v).unwrap(), Label::Symbol(expected as u32));
                }
            }
        }
    }
}
