use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybrid-lingam"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "stderr should be one JSON line: {text}");
    serde_json::from_str(lines[0]).unwrap()
}

fn simulate(dir: &Path, p: &str, c: &str, n: &str, seed: &str) {
    let out = run(&["simulate", "--p", p, "--c", c, "--n", n, "--seed", seed, "--out", path(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    simulate(&dir, "4", "2", "1000", "11");
    for f in ["data.csv", "schema.json", "truth.json", "manifest.json"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let data = fs::read_to_string(dir.join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 1001);
    assert_eq!(data.lines().next().unwrap(), "X1,X2,X3,X4");

    let manifest = read_json(&dir.join("manifest.json"));
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["p"], 4);
    assert_eq!(manifest["c"], 2);
    assert_eq!(manifest["n"], 1000);
    assert_eq!(manifest["edge_prob"], 0.5);
    assert_eq!(manifest["noise"], "laplace");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["invocation"].as_array().unwrap().iter().any(|a| a == "--seed"));
    assert_eq!(manifest["continuous"].as_array().unwrap().len(), 2);

    let schema = read_json(&dir.join("schema.json"));
    let kinds: Vec<&str> = schema["columns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds.iter().filter(|k| **k == "continuous").count(), 2);
    assert_eq!(kinds.iter().filter(|k| **k == "binary").count(), 2);
}

#[test]
fn simulate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    simulate(&a, "4", "2", "500", "3");
    simulate(&b, "4", "2", "500", "3");
    for f in ["data.csv", "schema.json", "truth.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let c = tmp.path().join("c");
    simulate(&c, "4", "2", "500", "4");
    assert_ne!(fs::read(a.join("data.csv")).unwrap(), fs::read(c.join("data.csv")).unwrap());
}

#[test]
fn too_many_variables_is_capability_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("big");
    simulate(&dir, "10", "5", "50", "1");
    let out = run(&[
        "discover",
        "--data",
        path(&dir.join("data.csv")),
        "--schema",
        path(&dir.join("schema.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["code"], "capability");
    assert!(err["message"].as_str().unwrap().contains("at most 6"));
    assert_eq!(err["context"]["subcommand"], "discover");
}

// Pinned strong-signal fixture: all-continuous chain-plus-shortcut at seed 11.
#[test]
fn discover_recovers_simulated_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "3", "3", "20000", "11");
    let (data, schema) = (sim.join("data.csv"), sim.join("schema.json"));

    let found = tmp.path().join("found");
    let out = run(&["discover", "--data", path(&data), "--schema", path(&schema), "--out", path(&found)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth = read_json(&sim.join("truth.json"));
    assert_eq!(truth["edges"].as_array().unwrap().len(), 3);
    assert_eq!(read_json(&found.join("graph.json")), truth);

    let report = read_json(&found.join("report.json"));
    assert_eq!(report["mode"], "exhaustive");
    assert_eq!(report["candidates_scored"], 25);
    assert_eq!(report["rows"], 20000);
    assert!(report["runner_up_margin"].as_f64().unwrap() > 0.0);

    // scoring the truth reproduces the reported optimum
    let out = run(&[
        "score",
        "--data",
        path(&data),
        "--schema",
        path(&schema),
        "--graph",
        path(&sim.join("truth.json")),
    ]);
    assert!(out.status.success());
    let scored: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(scored["bic"], report["bic"]);
    assert_eq!(scored["dim"], 6);
    assert_eq!(scored["nodes"].as_array().unwrap().len(), 3);

    // oracle mode over the true skeleton agrees
    let oracle = tmp.path().join("oracle");
    let out = run(&[
        "discover",
        "--data",
        path(&data),
        "--schema",
        path(&schema),
        "--skeleton",
        path(&sim.join("truth.json")),
        "--out",
        path(&oracle),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&oracle.join("graph.json")), truth);
    let report = read_json(&oracle.join("report.json"));
    assert_eq!(report["mode"], "oracle");
    assert_eq!(report["candidates_scored"], 6);
}

#[test]
fn discover_is_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "4", "2", "800", "5");
    let mut outputs = Vec::new();
    for w in ["1", "3"] {
        let out = run(&[
            "discover",
            "--data",
            path(&sim.join("data.csv")),
            "--schema",
            path(&sim.join("schema.json")),
            "--workers",
            w,
        ]);
        assert!(out.status.success());
        let mut v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v["report"]["wall_time_ms"] = Value::Null;
        outputs.push(v);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn baseline_writes_skeleton() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "3", "1", "2000", "8");
    let dir = tmp.path().join("pc");
    let out = run(&[
        "baseline",
        "--data",
        path(&sim.join("data.csv")),
        "--schema",
        path(&sim.join("schema.json")),
        "--alpha",
        "0.01",
        "--out",
        path(&dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sk = read_json(&dir.join("skeleton.json"));
    assert_eq!(sk["nodes"].as_array().unwrap().len(), 3);
    for e in sk["edges"].as_array().unwrap() {
        assert!(e[0].as_str().unwrap() < e[1].as_str().unwrap());
    }
}

#[test]
fn evaluate_emits_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{"p": 2, "c": 1, "sample_sizes": [200, 400], "replicates": 3, "seed": 4, "methods": ["hybrid", "pc_baseline"]}"#,
    )
    .unwrap();
    let dir = tmp.path().join("res");
    let out = run(&["evaluate", "--config", path(&cfg), "--out", path(&dir), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,c,n,metric,value"));
    // hybrid: 2 metrics x 2 sizes; pc: 1 metric x 2 sizes
    assert_eq!(lines.count(), 6);
    let json = read_json(&dir.join("results.json"));
    assert_eq!(json["records"].as_array().unwrap().len(), 3);
}

#[test]
fn evaluate_rejects_unknown_config_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.json");
    fs::write(&cfg, r#"{"p": 2, "replicate": 3}"#).unwrap();
    let out = run(&["evaluate", "--config", path(&cfg), "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["code"], "usage");
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["discover", "--data", "d.csv"],
        vec!["simulate", "--p", "3", "--c", "1", "--n", "10", "--seed", "1", "--out", "x", "--bogus"],
        vec!["frobnicate"],
        vec!["simulate", "--p", "2", "--c", "3", "--n", "10", "--seed", "1", "--out", "x"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert_eq!(stderr_json(&out)["code"], "usage");
    }
}

#[test]
fn data_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "2", "1", "20", "2");
    let text = fs::read_to_string(sim.join("data.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[3] = "abc,1".into();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, lines.join("\n")).unwrap();
    let out = run(&["discover", "--data", path(&bad), "--schema", path(&sim.join("schema.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["code"], "data");
    assert!(err["context"]["row"].is_number());

    let out = run(&[
        "discover",
        "--data",
        path(&tmp.path().join("missing.csv")),
        "--schema",
        path(&sim.join("schema.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["code"], "io");
}

#[test]
fn help_lists_every_flag() {
    let expected: [(&str, &[&str]); 5] = [
        (
            "simulate",
            &["--p", "--c", "--n", "--seed", "--edge-prob", "--noise", "--noise-scale", "--intercepts", "--out"],
        ),
        ("discover", &["--data", "--schema", "--skeleton", "--workers", "--out"]),
        ("score", &["--data", "--schema", "--graph"]),
        ("baseline", &["--data", "--schema", "--alpha", "--out"]),
        ("evaluate", &["--config", "--out", "--workers"]),
    ];
    for (sub, flags) in expected {
        let out = run(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8(out.stdout).unwrap();
        for f in flags {
            assert!(text.contains(&format!("{f} ")), "{sub} --help lacks {f}");
        }
    }
}
