use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use tvwb_core::birkhoff::{birkhoff_decompose, block_decompose, max_abs_diff};
use tvwb_core::dynsim::{
    estimate_tvwb_profile, genericity, sample_point, Fiber, Partition, SystemDescriptor,
    SystemKind, SystemParams,
};
use tvwb_core::markov::{
    decide_tvwb, end_p_check, preimage_graph_from_markov, stationary, sufficient_mixing_uniform,
    sufficient_shared_entries, sync_bound, EndCheck, PreimageGraph, Sufficiency,
};
use tvwb_core::seed::derive_seed;
use tvwb_core::tbar::{nearest_rank, tbar_bruteforce, tbar_exact_with, tbar_states};
use tvwb_core::{entropy, Caps, Exec, Node, ProbVector, TreeName};

use crate::error::CliError;
use crate::input::{self, Document};
use crate::report::{digest, Outcome};

pub struct Ran {
    pub digest: String,
    pub outcome: Outcome,
}

fn one(doc: &Document, outcome: Outcome) -> Ran {
    Ran {
        digest: digest(&[&doc.bytes]),
        outcome,
    }
}

fn p_strings(p: &ProbVector) -> Vec<String> {
    (0..p.len()).map(|j| p.display_component(j)).collect()
}

fn one_based(xs: &[usize]) -> Vec<usize> {
    xs.iter().map(|x| x + 1).collect()
}

fn fmt_vec(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn fmt_matrix(names: &[String], m: &[Vec<f64>]) -> String {
    let width = names.iter().map(String::len).max().unwrap_or(1).max(8);
    let mut out = format!("{:>width$}", "");
    for n in names {
        let _ = write!(out, " {n:>width$}");
    }
    out.push('\n');
    for (n, row) in names.iter().zip(m) {
        let _ = write!(out, "{n:>width$}");
        for x in row {
            let _ = write!(out, " {x:>width$.6}");
        }
        out.push('\n');
    }
    out
}

pub fn check_endo(path: &Path) -> Result<Ran, CliError> {
    let doc = input::read_document(path)?;
    let (m, labels) = input::matrix(&doc.root)?;
    let names = labels.unwrap_or_else(|| (1..=m.dim()).map(|i| i.to_string()).collect());
    let irreducible = m.is_irreducible();
    let primitive = m.is_primitive();
    let end = end_p_check(&m);
    let stationary = if irreducible {
        Some(stationary(&m)?)
    } else {
        None
    };
    let mut human = String::new();
    let (end_json, p) = match &end {
        EndCheck::Endomorphism(p) => {
            let _ = writeln!(human, "End(p): yes, p = {p}");
            (
                json!({ "accepted": true, "p": p_strings(p), "row": null, "reason": null }),
                Some(p.clone()),
            )
        }
        EndCheck::Rejected { row, reason } => {
            let _ = writeln!(human, "End(p): no, {reason}");
            (
                json!({ "accepted": false, "p": null, "row": row.map(|r| r + 1), "reason": reason }),
                None,
            )
        }
    };
    let h = p.as_ref().map(entropy);
    if let Some(h) = h {
        let _ = writeln!(human, "entropy h(p) = {h:.12} bits");
    }
    if let Some(q) = &stationary {
        let _ = writeln!(human, "stationary vector: {}", fmt_vec(q));
    }
    let _ = writeln!(
        human,
        "irreducible: {}, primitive: {}",
        yes_no(irreducible),
        yes_no(primitive)
    );
    let rejected = if !irreducible {
        Some("reducible".to_string())
    } else if let EndCheck::Rejected { reason, .. } = &end {
        Some(reason.clone())
    } else {
        None
    };
    if let Some(r) = &rejected {
        let _ = writeln!(human, "rejected: {r}");
    }
    let results = json!({
        "states": names,
        "end_p": end_json,
        "entropy_bits": h,
        "stationary": stationary,
        "irreducible": irreducible,
        "primitive": primitive,
        "verdict": if rejected.is_some() { "rejected" } else { "accepted" },
        "reason": rejected,
    });
    Ok(one(
        &doc,
        Outcome {
            results,
            human,
            seed: None,
            rejected,
        },
    ))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Graph and display names of a finite-state system document.
fn finite_graph(
    doc: &Document,
    d: &SystemDescriptor,
) -> Result<(PreimageGraph, Vec<String>), CliError> {
    if d.kind() == SystemKind::CircleExtension {
        return Err(CliError::Semantic(
            "undecidable kind; use estimate-tvwb for circle extensions".into(),
        ));
    }
    let graph = match d.params() {
        SystemParams::Markov { matrix, .. } => {
            preimage_graph_from_markov(matrix, input::state_labels(&doc.root)?)?
        }
        _ => d.graph().expect("finite-state kind"),
    };
    let names = graph.names().to_vec();
    Ok((graph, names))
}

pub fn decide(path: &Path, caps: &Caps) -> Result<Ran, CliError> {
    let doc = input::read_document(path)?;
    let d = input::system(&doc.root)?;
    let (graph, names) = finite_graph(&doc, &d)?;
    let mut human = String::new();
    let sufficient = match d.params() {
        SystemParams::Markov { matrix, .. } => {
            let mixing = match sufficient_mixing_uniform(matrix) {
                Sufficiency::Holds(b) => json!(b),
                Sufficiency::Inapplicable => json!("inapplicable"),
            };
            let shared = sufficient_shared_entries(matrix)?;
            let _ = writeln!(
                human,
                "sufficient conditions: uniform+mixing = {mixing}, shared column entries = {shared}"
            );
            json!({ "mixing_uniform": mixing, "shared_entries": shared })
        }
        _ => Value::Null,
    };
    let v = decide_tvwb(&graph, caps)?;
    let p = graph.p();
    let _ = writeln!(
        human,
        "tvwB: {} ({} states, subset-BFS depth {}, {} sets explored)",
        yes_no(v.decision),
        graph.state_count(),
        v.depth,
        v.sets_explored
    );
    let _ = writeln!(
        human,
        "bounds: N^(3N) = {}, 2^N = {}",
        v.path_bound, v.subset_bound
    );
    let witness = v.witness.as_ref().map(|w| {
        let weights: Vec<String> = w
            .classes
            .iter()
            .map(|&c| p.display_component(p.classes()[c][0]))
            .collect();
        let _ = writeln!(
            human,
            "witness weights: ({}) ending at state {}",
            weights.join(", "),
            names[w.end_state]
        );
        let paths: Vec<Value> = w
            .paths
            .iter()
            .enumerate()
            .map(|(start, steps)| {
                let symbols: Vec<usize> = steps.iter().map(|s| s.symbol + 1).collect();
                let states: Vec<usize> = steps.iter().map(|s| s.to + 1).collect();
                let route: Vec<&str> = steps.iter().map(|s| names[s.to].as_str()).collect();
                let _ = writeln!(
                    human,
                    "  from {}: symbols {:?} via {}",
                    names[start],
                    symbols,
                    route.join(" -> ")
                );
                json!({ "start": start + 1, "symbols": symbols, "states": states })
            })
            .collect();
        json!({
            "length": w.len(),
            "weights": weights,
            "weight_values": w.weights,
            "path_weight": w.path_weight(),
            "end_state": w.end_state + 1,
            "paths": paths,
        })
    });
    let certificate = v.certificate.as_ref().map(|family| {
        let sets: Vec<Vec<usize>> = family.iter().map(|s| one_based(s)).collect();
        let shown: Vec<String> = family
            .iter()
            .map(|s| {
                let members: Vec<&str> = s.iter().map(|&i| names[i].as_str()).collect();
                format!("{{{}}}", members.join(","))
            })
            .collect();
        let _ = writeln!(human, "closed certificate: {{{}}}", shown.join(", "));
        sets
    });
    let results = json!({
        "kind": d.kind().name(),
        "p": p_strings(p),
        "states": names,
        "decision": v.decision,
        "depth": v.depth,
        "sets_explored": v.sets_explored,
        "path_bound": v.path_bound.to_string(),
        "subset_bound": v.subset_bound.to_string(),
        "witness": witness,
        "certificate": certificate,
        "sufficient": sufficient,
    });
    Ok(one(&doc, Outcome::ok(results, human)))
}

fn witness_listing(a: &tvwb_core::TreeAutomorphism) -> Vec<Value> {
    let s = a.alphabet();
    let mut out = Vec::new();
    for (k, level) in a.perms().iter().enumerate() {
        for (idx, perm) in level.iter().enumerate() {
            if perm.iter().enumerate().any(|(j, &x)| j != x) {
                let node = Node::from_index(k, idx, s);
                out.push(json!({
                    "node": one_based(node.symbols()),
                    "permutation": one_based(perm),
                }));
            }
        }
    }
    out
}

pub fn tbar_names(
    first: &Path,
    second: &Path,
    height: Option<usize>,
    brute_force: bool,
    caps: &Caps,
) -> Result<Ran, CliError> {
    let (d1, d2) = (input::read_document(first)?, input::read_document(second)?);
    let (mut t1, mut t2): (TreeName, TreeName) =
        (input::tree_name(&d1.root)?, input::tree_name(&d2.root)?);
    if let Some(h) = height {
        t1 = t1.truncate(h)?;
        t2 = t2.truncate(h)?;
    }
    let r = tbar_exact_with(&t1, &t2, caps)?;
    let mut human = format!("t-bar_{} = {:.12}\n", r.height, r.value);
    let witness = witness_listing(&r.witness);
    let _ = writeln!(
        human,
        "witness: {} node(s) with a non-identity permutation",
        witness.len()
    );
    for w in &witness {
        let _ = writeln!(human, "  node {} -> {}", w["node"], w["permutation"]);
    }
    let brute = if brute_force {
        let b = tbar_bruteforce(&t1, &t2, caps)?;
        let agree = (b.value - r.value).abs() <= 1e-12;
        let _ = writeln!(
            human,
            "brute force: {:.12} ({})",
            b.value,
            if agree { "agrees" } else { "DISAGREES" }
        );
        json!({ "value": b.value, "agree": agree })
    } else {
        Value::Null
    };
    let results = json!({
        "height": r.height,
        "value": r.value,
        "witness": witness,
        "bruteforce": brute,
    });
    Ok(Ran {
        digest: digest(&[&d1.bytes, &d2.bytes]),
        outcome: Outcome::ok(results, human),
    })
}

pub fn state_distance(path: &Path, heights: &[usize], caps: &Caps) -> Result<Ran, CliError> {
    let doc = input::read_document(path)?;
    let d = input::system(&doc.root)?;
    let (graph, names) = finite_graph(&doc, &d)?;
    let table = tbar_states(&graph, heights, caps)?;
    let mut human = String::new();
    let mut max_off = Vec::with_capacity(heights.len());
    for (h, &m) in heights.iter().enumerate() {
        let x = table.max_off_diagonal(h);
        max_off.push(x);
        let _ = writeln!(human, "m = {m}: max off-diagonal {x:.12}");
        human.push_str(&fmt_matrix(&names, &table.matrices[h]));
    }
    let results = json!({
        "states": names,
        "heights": heights,
        "matrices": table.matrices,
        "max_off_diagonal": max_off,
    });
    Ok(one(&doc, Outcome::ok(results, human)))
}

pub fn birkhoff(path: &Path, block: bool) -> Result<Ran, CliError> {
    let doc = input::read_document(path)?;
    if block {
        let c = input::block_coupling(&doc.root)?;
        let m = block_decompose(&c)?;
        let residual = max_abs_diff(&m.pushforward(c.p()), c.entries());
        let mut human = format!("{} class-preserving permutation(s)\n", m.support.len());
        let support: Vec<Value> = m
            .support
            .iter()
            .map(|(perm, mass)| {
                let _ = writeln!(human, "  {mass:.12}  {:?}", one_based(perm));
                json!({ "permutation": one_based(perm), "mass": mass })
            })
            .collect();
        let _ = writeln!(human, "reconstruction residual: {residual:.3e}");
        let results = json!({ "support": support, "residual": residual });
        return Ok(one(&doc, Outcome::ok(results, human)));
    }
    let matrix = input::f64_grid(
        doc.root
            .get("matrix")
            .ok_or_else(|| CliError::Parse("missing field \"matrix\"".into()))?,
        "matrix",
    )?;
    let dec = birkhoff_decompose(&matrix)?;
    let residual = max_abs_diff(&dec.reconstruct(), &matrix);
    let mut human = format!(
        "alpha = {:.12}, {} term(s) (bound {})\n",
        dec.alpha,
        dec.terms.len(),
        (dec.n - 1) * (dec.n - 1) + 1
    );
    let terms: Vec<Value> = dec
        .terms
        .iter()
        .map(|t| {
            let _ = writeln!(
                human,
                "  {:.12}  {:?}",
                t.coefficient,
                one_based(&t.permutation)
            );
            json!({ "coefficient": t.coefficient, "permutation": one_based(&t.permutation) })
        })
        .collect();
    let _ = writeln!(human, "reconstruction residual: {residual:.3e}");
    let results = json!({
        "n": dec.n,
        "alpha": dec.alpha,
        "terms": terms,
        "coefficient_sum": dec.coefficient_sum(),
        "residual": residual,
    });
    Ok(one(&doc, Outcome::ok(results, human)))
}

pub struct EstimateArgs<'a> {
    pub heights: &'a [usize],
    pub samples: usize,
    pub pairs: usize,
    pub seed: u64,
}

pub fn estimate(
    path: &Path,
    args: EstimateArgs<'_>,
    caps: &Caps,
    exec: Exec,
) -> Result<Ran, CliError> {
    let doc = input::read_document(path)?;
    let d = input::system(&doc.root)?;
    let profile = estimate_tvwb_profile(
        &d,
        args.heights,
        args.samples,
        args.pairs,
        args.seed,
        caps,
        exec,
    )?;
    let mut human = format!(
        "{} system, {} samples, {} pairs, seed {}\n{:>6} {:>8} {:>10} {:>10} {:>10}\n",
        d.kind().name(),
        args.samples,
        args.pairs,
        args.seed,
        "n",
        "eps_hat",
        "mean",
        "median",
        "q90"
    );
    let rows: Vec<Value> = profile
        .rows
        .iter()
        .map(|r| {
            let mut sorted = r.values.clone();
            sorted.sort_by(f64::total_cmp);
            let (median, q90) = (nearest_rank(&sorted, 0.5), nearest_rank(&sorted, 0.9));
            let _ = writeln!(
                human,
                "{:>6} {:>8.2} {:>10.6} {:>10.6} {:>10.6}",
                r.height, r.eps_hat, r.mean, median, q90
            );
            json!({
                "height": r.height,
                "eps_hat": r.eps_hat,
                "mean": r.mean,
                "median": median,
                "q90": q90,
            })
        })
        .collect();
    let results = json!({
        "kind": d.kind().name(),
        "samples": args.samples,
        "pairs": args.pairs,
        "rows": rows,
    });
    let mut outcome = Outcome::ok(results, human);
    outcome.seed = Some(args.seed);
    Ok(one(&doc, outcome))
}

pub fn parse_partition(text: &str) -> Result<Partition, CliError> {
    if text == "label" {
        return Ok(Partition::Label);
    }
    if let Some(n) = text.strip_prefix("dyadic:") {
        let n = n
            .parse::<u32>()
            .map_err(|_| CliError::Parse(format!("bad dyadic resolution \"{n}\"")))?;
        return Ok(Partition::Dyadic(n));
    }
    if let Some(list) = text.strip_prefix("map:") {
        let cells = list
            .split(',')
            .map(|c| match c.trim().parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(CliError::Parse(format!("bad partition cell \"{c}\""))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Partition::Map(cells));
    }
    Err(CliError::Parse(format!(
        "unknown partition \"{text}\" (label, dyadic:N or map:c1,c2,...)"
    )))
}

pub struct GenericArgs<'a> {
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    pub partition: &'a str,
    pub eps: Option<f64>,
}

pub fn generic(
    path: &Path,
    args: GenericArgs<'_>,
    caps: &Caps,
    exec: Exec,
) -> Result<Ran, CliError> {
    let doc = input::read_document(path)?;
    let d = input::system(&doc.root)?;
    let partition = parse_partition(args.partition)?;
    if args.samples == 0 {
        return Err(CliError::Semantic("need at least one sample".into()));
    }
    let reports = exec.try_map_indexed(args.samples, |i| {
        let x = sample_point(&d, 1, derive_seed(args.seed, i as u64))?;
        let r = genericity(&d, &x, args.m, &partition, caps)?;
        Ok((x, r))
    })?;
    let reference = reports[0].1.reference.clone();
    let mut human = format!(
        "M = {}, partition {}, reference {}\n{:>6} {:>14} {:>12}\n",
        args.m,
        args.partition,
        fmt_vec(&reference),
        "point",
        "start",
        "deviation"
    );
    let points: Vec<Value> = reports
        .iter()
        .enumerate()
        .map(|(i, (x, r))| {
            let start = match x.fiber {
                Some(Fiber::Group(g)) => json!({ "symbol": x.stream[0] + 1, "fiber": g }),
                Some(Fiber::Circle(g)) => json!({ "symbol": x.stream[0] + 1, "fiber": g }),
                None => json!({ "symbol": x.stream[0] + 1 }),
            };
            let _ = writeln!(
                human,
                "{:>6} {:>14} {:>12.6}",
                i + 1,
                x.stream[0] + 1,
                r.deviation
            );
            json!({ "index": i + 1, "start": start, "theta": r.theta, "deviation": r.deviation })
        })
        .collect();
    let deviations: Vec<f64> = reports.iter().map(|(_, r)| r.deviation).collect();
    let max = deviations.iter().copied().fold(0.0, f64::max);
    let mean = deviations.iter().sum::<f64>() / deviations.len() as f64;
    let _ = writeln!(human, "max deviation {max:.6}, mean {mean:.6}");
    let fraction = args.eps.map(|eps| {
        let f = deviations.iter().filter(|&&x| x < eps).count() as f64 / deviations.len() as f64;
        let _ = writeln!(human, "fraction {eps}-generic: {f:.4}");
        f
    });
    let results = json!({
        "kind": d.kind().name(),
        "m": args.m,
        "partition": args.partition,
        "reference": reference,
        "points": points,
        "max_deviation": max,
        "mean_deviation": mean,
        "eps": args.eps,
        "fraction_generic": fraction,
    });
    let mut outcome = Outcome::ok(results, human);
    outcome.seed = Some(args.seed);
    Ok(one(&doc, outcome))
}

pub fn sync_bound_cmd(n: usize) -> Result<Ran, CliError> {
    let bound = sync_bound(n)?;
    let subset = num_bigint::BigUint::from(1u32) << n;
    let human = format!("N = {n}: N^(3N) = {bound}, 2^N = {subset}\n");
    let results = json!({
        "n_states": n,
        "path_bound": bound.to_string(),
        "subset_bound": subset.to_string(),
    });
    Ok(Ran {
        digest: digest(&[n.to_string().as_bytes()]),
        outcome: Outcome::ok(results, human),
    })
}
