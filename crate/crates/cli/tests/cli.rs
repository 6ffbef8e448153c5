mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use common::{data, json as run_json, schema_validator, scratch, tvwb, write};

fn assert_schema(report: &Value) {
    let validator = schema_validator();
    let errors: Vec<String> = validator
        .iter_errors(report)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "schema errors: {errors:?}\n{report:#}");
}

#[test]
fn every_command_emits_a_valid_report() {
    let runs: Vec<Vec<String>> = vec![
        vec!["check-endo".into(), data("counterexample.json")],
        vec!["check-endo".into(), data("circulant.json")],
        vec!["decide-tvwb".into(), data("counterexample.json")],
        vec!["decide-tvwb".into(), data("extension-z4.json")],
        vec![
            "tbar".into(),
            data("tree-a.json"),
            data("tree-b.json"),
            "--brute-force".into(),
        ],
        vec![
            "tbar".into(),
            "--states".into(),
            "--height".into(),
            "3".into(),
            data("circulant.json"),
        ],
        vec![
            "state-distance".into(),
            "--heights".into(),
            "1,4".into(),
            data("bernoulli-rows.json"),
        ],
        vec!["birkhoff".into(), data("doubly-stochastic.json")],
        vec![
            "birkhoff".into(),
            "--block".into(),
            data("block-coupling.json"),
        ],
        vec![
            "estimate-tvwb".into(),
            "--heights".into(),
            "2,3".into(),
            "--samples".into(),
            "6".into(),
            "--pairs".into(),
            "5".into(),
            data("circle-rational.json"),
        ],
        vec![
            "generic-check".into(),
            "--m".into(),
            "50".into(),
            "--samples".into(),
            "3".into(),
            data("extension-z3.json"),
        ],
        vec!["sync-bound".into(), "3".into()],
    ];
    for args in &runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let report = run_json(&args, 0);
        assert_schema(&report);
        assert_eq!(report["command"], args[0]);
    }
}

#[test]
fn exit_codes() {
    let dir = scratch("cli-exit-codes");
    let malformed = dir.join("malformed.json");
    std::fs::write(&malformed, "{ not json").unwrap();
    let malformed = malformed.to_string_lossy().into_owned();
    let no_schema = write(&dir, "no-schema.json", &json!({"matrix": [["1"]]}));
    let bad_schema = write(
        &dir,
        "bad-schema.json",
        &json!({"schema": 7, "matrix": [["1"]]}),
    );
    let not_stochastic = write(
        &dir,
        "rows.json",
        &json!({"schema": 1, "matrix": [["1/2", "1/3"], ["1/2", "1/2"]]}),
    );

    assert_eq!(tvwb(&["check-endo", &data("counterexample.json")]).code, 0);
    assert_eq!(tvwb(&["check-endo", &data("identity.json")]).code, 1);
    assert_eq!(tvwb(&["decide-tvwb", &data("circle-golden.json")]).code, 1);
    assert_eq!(tvwb(&["check-endo", &not_stochastic]).code, 1);
    assert_eq!(tvwb(&["check-endo", &malformed]).code, 2);
    assert_eq!(tvwb(&["check-endo", &no_schema]).code, 2);
    assert_eq!(tvwb(&["check-endo", &bad_schema]).code, 2);
    assert_eq!(tvwb(&["check-endo", "/nonexistent/system.json"]).code, 2);
}

#[test]
fn error_reports_follow_the_schema() {
    let report = run_json(&["decide-tvwb", &data("circle-golden.json")], 1);
    assert_schema(&report);
    assert_eq!(report["error"]["class"], "semantic");
    assert_eq!(report["error"]["exit_code"], 1);

    let report = run_json(&["check-endo", "/nonexistent/system.json"], 2);
    assert_schema(&report);
    assert_eq!(report["error"]["class"], "io");
}

#[test]
fn rejected_end_p_is_reported_as_a_value() {
    let report = run_json(&["check-endo", &data("identity.json")], 1);
    assert_schema(&report);
    assert_eq!(report["results"]["verdict"], "rejected");
    assert_eq!(report["results"]["reason"], "reducible");
}

#[test]
fn json_flag_moves_human_text_to_stderr() {
    let plain = tvwb(&["check-endo", &data("counterexample.json")]);
    assert!(serde_json::from_str::<Value>(&plain.stdout).is_err());
    assert!(plain.stdout.contains("1/3"));

    let with_json = tvwb(&["--json", "check-endo", &data("counterexample.json")]);
    assert!(with_json.stderr.contains("1/3"));
    with_json.report();
}

#[test]
fn out_writes_the_same_report() {
    let dir = scratch("cli-out");
    let path = dir.join("report.json");
    let path_str = path.to_string_lossy().into_owned();
    let run = tvwb(&[
        "--json",
        "--out",
        &path_str,
        "decide-tvwb",
        &data("circulant.json"),
    ]);
    assert_eq!(run.code, 0);
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(written, run.stdout);

    let quiet = tvwb(&["--out", &path_str, "sync-bound", "2"]);
    assert_eq!(quiet.code, 0);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["results"]["path_bound"], "64");
}

#[test]
fn inputs_digest_tracks_input_bytes() {
    let a = run_json(&["check-endo", &data("counterexample.json")], 0);
    let b = run_json(&["check-endo", &data("counterexample.json")], 0);
    let c = run_json(&["check-endo", &data("circulant.json")], 0);
    assert_eq!(a["inputs_digest"], b["inputs_digest"]);
    assert_ne!(a["inputs_digest"], c["inputs_digest"]);
}

#[test]
fn seeded_commands_are_byte_identical() {
    let args = [
        "estimate-tvwb",
        "--heights",
        "2,4",
        "--samples",
        "8",
        "--pairs",
        "12",
        "--seed",
        "99",
        &data("circle-golden.json"),
    ];
    let first = tvwb(&[&["--json"], &args[..]].concat());
    let second = tvwb(&[&["--json"], &args[..]].concat());
    let sequential = tvwb(&[&["--json", "--sequential"], &args[..]].concat());
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first.report()["results"], sequential.report()["results"]);
    assert_eq!(first.report()["seed"], 99);
}

/// Random tree-name documents, checked with the binary's exhaustive oracle.
#[test]
fn brute_force_agrees_on_random_documents() {
    let dir = scratch("cli-brute");
    let cases: [(&[&str], usize); 4] = [
        (&["1/2", "1/2"], 3),
        (&["1/3", "2/3"], 3),
        (&["1/4", "1/4", "1/2"], 2),
        (&["1/3", "1/3", "1/3"], 2),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..12 {
        let (p, height) = cases[i % cases.len()];
        let s = p.len();
        let mut doc = |name: &str| {
            let levels: Vec<Vec<usize>> = (1..=height)
                .map(|k| {
                    (0..s.pow(k as u32))
                        .map(|_| rng.random_range(1..=3usize))
                        .collect()
                })
                .collect();
            write(
                &dir,
                &format!("{name}-{i}.json"),
                &json!({"schema": 1, "p": p, "label_space": "discrete", "levels": levels}),
            )
        };
        let (a, b) = (doc("a"), doc("b"));
        let report = run_json(&["tbar", "--brute-force", &a, &b], 0);
        assert_eq!(report["results"]["bruteforce"]["agree"], true, "case {i}");
    }
}

#[test]
fn circle_tree_names_are_accepted() {
    let dir = scratch("cli-circle");
    let doc = |name: &str, shift: f64| {
        let levels: Vec<Vec<Value>> = (1..=2)
            .map(|k| {
                (0..2usize.pow(k))
                    .map(|i| json!([i % 2 + 1, (0.1 * i as f64 + shift).fract()]))
                    .collect()
            })
            .collect();
        write(
            &dir,
            name,
            &json!({"schema": 1, "p": ["1/2", "1/2"], "label_space": "symbol-circle", "levels": levels}),
        )
    };
    let a = doc("a.json", 0.0);
    let b = doc("b.json", 0.0);
    let c = doc("c.json", 0.25);
    let same = run_json(&["tbar", &a, &b], 0);
    assert_eq!(same["results"]["value"], 0.0);
    let shifted = run_json(&["tbar", "--brute-force", &a, &c], 0);
    let value = shifted["results"]["value"].as_f64().unwrap();
    assert!((value - 0.125).abs() < 1e-12, "{value}");
    assert_eq!(shifted["results"]["bruteforce"]["agree"], true);
}

#[test]
fn mixed_label_spaces_are_rejected() {
    let a = data("tree-a.json");
    let dir = scratch("cli-mixed");
    let circle = write(
        &dir,
        "c.json",
        &json!({"schema": 1, "p": ["1/2", "1/2"], "label_space": "symbol-circle",
                "levels": [[[1, 0.0], [2, 0.5]], [[1, 0.0], [1, 0.0], [2, 0.5], [2, 0.5]]]}),
    );
    assert_eq!(tvwb(&["tbar", &a, &circle]).code, 1);
}
