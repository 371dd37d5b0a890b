use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pvaug"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tecator_args<'a>(train: &'a str, schema: &'a str) -> Vec<&'a str> {
    vec!["--data", train, "--schema", schema]
}

#[test]
fn generate_tecator_pls_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("aug.csv");
    let (train, schema) = (data("tecator_train.csv"), data("tecator.schema.json"));
    let mut args = vec!["generate"];
    args.extend(tecator_args(s(&train), s(&schema)));
    args.extend(["--method", "pls", "--nlv", "10", "--nseg", "4", "--nsets", "20", "--seed", "1", "--out", s(&out)]);
    let res = run(&args);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 101);
    assert_eq!(*header.last().unwrap(), "fat");
    assert_eq!(lines.count(), 3570);

    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("aug.csv.json")).unwrap()).unwrap();
    assert_eq!(meta["rows"], 3570);
    assert_eq!(meta["original_rows"], 170);
    assert_eq!(meta["method"], "pls");
    assert_eq!(meta["ncomp"], 10);
    assert_eq!(meta["segments"], 4);
    assert_eq!(meta["set_seeds"].as_array().unwrap().len(), 20);
    assert_eq!(meta["cratio_max"].as_array().unwrap().len(), 20);
}

#[test]
fn sidecar_command_replays_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let heart = data("heart.csv");
    let schema = data("heart.schema.json");
    let res = run(&[
        "generate", "--data", s(&heart), "--schema", s(&schema), "--method", "svd", "--per-class", "--nlv", "5",
        "--nsets", "2", "--seed", "9", "--out", s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let first = std::fs::read(&out).unwrap();
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.json")).unwrap()).unwrap();
    let command: Vec<String> = meta["command"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    std::fs::remove_file(&out).unwrap();
    let res = bin().args(&command).output().unwrap();
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn class_column_is_written_as_levels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.csv");
    let res = run(&[
        "generate", "--data", s(&data("heart.csv")), "--schema", s(&data("heart.schema.json")), "--nlv", "4",
        "--nsets", "1", "--out", s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = std::fs::read_to_string(&out).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 18);
    assert!(header.ends_with(",class"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",healthy") || l.ends_with(",sick")));
    assert_eq!(text.lines().count(), 1 + 2 * 292);
}

#[test]
fn inferred_schema_uses_last_column_as_response() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    let mut csv = String::from("a,b,c,y\n");
    for i in 0..12 {
        let x = i as f64;
        csv += &format!("{},{},{},{}\n", x, (x * 0.7).sin(), x * x / 10.0, 2.0 * x - (x * 0.7).sin());
    }
    std::fs::write(&input, csv).unwrap();
    let out = dir.path().join("out.csv");
    let res = run(&["generate", "--data", s(&input), "--method", "pls", "--nlv", "2", "--nseg", "3", "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("a,b,c,y\n"));
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.csv.json")).unwrap()).unwrap();
    assert_eq!(meta["schema"], Value::Null);
}

#[test]
fn validation_errors_name_the_argument() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let train = data("tecator_train.csv");
    let heart = data("heart.csv");
    let schema = data("heart.schema.json");
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["--data", s(&train), "--nlv", "3", "--nseg", "1"], "--nseg"),
        (vec!["--data", s(&train), "--nlv", "3", "--nseg", "171"], "--nseg"),
        (vec!["--data", s(&train), "--nlv", "0"], "--nlv"),
        (vec!["--data", s(&train), "--nlv", "500"], "--nlv"),
        (
            vec!["--data", s(&heart), "--schema", s(&schema), "--method", "pls", "--per-class", "--nlv", "3"],
            "--per-class",
        ),
        (
            vec!["--data", s(&heart), "--schema", s(&schema), "--per-class", "--nlv", "3", "--nseg", "140"],
            "--nseg",
        ),
    ];
    for (extra, arg) in cases {
        let mut args = vec!["generate", "--out", s(&out)];
        args.extend(&extra);
        let res = run(&args);
        assert_eq!(code(&res), 2, "{extra:?}: {}", stderr(&res));
        assert!(stderr(&res).contains(arg), "{extra:?}: {}", stderr(&res));
    }
    assert!(!out.exists());
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&[
        "generate",
        "--data",
        s(&dir.path().join("nope.csv")),
        "--nlv",
        "2",
        "--out",
        s(&dir.path().join("o.csv")),
    ]);
    assert_eq!(code(&res), 1);
}

fn generate_svd(dir: &Path, nsets: &str) -> PathBuf {
    let out = dir.join("svd.csv");
    let res = run(&[
        "generate", "--data", s(&data("tecator_train.csv")), "--schema", s(&data("tecator.schema.json")), "--nlv", "6",
        "--nseg", "5", "--nsets", nsets, "--seed", "3", "--scale-scores", "false", "--out", s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    out
}

fn diagnose(pvset: &Path, extra: &[&str]) -> Output {
    let (train, schema) = (data("tecator_train.csv"), data("tecator.schema.json"));
    let mut args = vec!["diagnose", "--data", s(&train), "--schema", s(&schema), "--pvset", s(pvset)];
    args.extend(["--nlv", "6", "--nseg", "5", "--scale-scores", "false"]);
    args.extend(extra);
    run(&args)
}

#[test]
fn diagnose_engine_output_passes() {
    let dir = tempfile::tempdir().unwrap();
    let pv = generate_svd(dir.path(), "2");
    let report = dir.path().join("report.json");
    let res = diagnose(&pv, &["--seed", "3", "--report", s(&report)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["pass"], true);
    let rules = rep["rules"].as_array().unwrap();
    assert_eq!(rules.len(), 6);
    for r in rules {
        assert_eq!(r["rule"], "q");
        assert!(r["max_rel_dev"].as_f64().unwrap() <= 1e-8);
    }
    assert_eq!(rep["sets"].as_array().unwrap().len(), 2);
    assert!(rep["sets"][0]["covariance"]["frobenius_rel_distance"].as_f64().unwrap() >= 0.0);
}

#[test]
fn diagnose_perturbed_set_fails() {
    let dir = tempfile::tempdir().unwrap();
    let pv = generate_svd(dir.path(), "1");
    let text = std::fs::read_to_string(&pv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // nudge one generated value
    let target = 170 + 40;
    let mut cells: Vec<String> = lines[target].split(',').map(String::from).collect();
    let v: f64 = cells[20].parse().unwrap();
    cells[20] = (v * 1.001 + 1e-3).to_string();
    lines[target] = cells.join(",");
    std::fs::write(&pv, lines.join("\n") + "\n").unwrap();
    let res = diagnose(&pv, &["--seed", "3"]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
    assert!(String::from_utf8_lossy(&res.stdout).contains("FAIL"));
}

#[test]
fn diagnose_wrong_seed_fails() {
    let dir = tempfile::tempdir().unwrap();
    let pv = generate_svd(dir.path(), "1");
    assert_eq!(code(&diagnose(&pv, &["--seed", "4"])), 3);
}

#[test]
fn diagnose_needs_seed_or_plan() {
    let dir = tempfile::tempdir().unwrap();
    let pv = generate_svd(dir.path(), "1");
    let res = diagnose(&pv, &[]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("--seed"));
}

#[test]
fn diagnose_rejects_mismatched_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let pv = generate_svd(dir.path(), "1");
    let text = std::fs::read_to_string(&pv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    std::fs::write(&pv, lines[..lines.len() - 3].join("\n") + "\n").unwrap();
    let res = diagnose(&pv, &["--seed", "3"]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("--pvset"));
}

#[test]
fn diagnose_accepts_explicit_plans() {
    let dir = tempfile::tempdir().unwrap();
    let pv = generate_svd(dir.path(), "2");
    let plans: Vec<pvaug::SegmentPlan> = pvaug::derive_seeds(3, 2)
        .into_iter()
        .map(|s| pvaug::make_splits(170, 5, s, pvaug::Scheme::Random).unwrap())
        .collect();
    let plan = dir.path().join("plan.json");
    std::fs::write(&plan, serde_json::to_string(&plans).unwrap()).unwrap();
    let res = diagnose(&pv, &["--plan", s(&plan)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    std::fs::write(&plan, serde_json::to_string(&plans[0]).unwrap()).unwrap();
    let res = diagnose(&pv, &["--plan", s(&plan)]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("--plan"));
}

#[test]
fn diagnose_pls_and_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let (heart, schema) = (data("heart.csv"), data("heart.schema.json"));
    for method in [["--method", "pls"], ["--method", "svd"]] {
        let out = dir.path().join("h.csv");
        let mode = if method[1] == "svd" { "--per-class" } else { "--scale-scores" };
        let mut args = vec!["generate", "--data", s(&heart), "--schema", s(&schema), "--nlv", "5", "--nsets", "2"];
        args.extend(method);
        args.extend([mode, "--standardize", "--seed", "5", "--out", s(&out)]);
        let res = run(&args);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        let mut args = vec!["diagnose", "--data", s(&heart), "--schema", s(&schema), "--pvset", s(&out), "--nlv", "5"];
        args.extend(method);
        args.extend([mode, "--standardize", "--seed", "5"]);
        let res = run(&args);
        assert_eq!(code(&res), 0, "{method:?}: {}{}", stderr(&res), String::from_utf8_lossy(&res.stdout));
    }
}

fn tiny_config(dir: &Path, extra: &str) -> PathBuf {
    let cfg = dir.join("cfg.json");
    let text = format!(
        r#"{{
  "dataset": "tecator",
  "task": "regression",
  "data": "{}",
  "schema": "{}",
  "test_data": "{}",
  "method": "pls",
  "n_sets": [1],
  "ncomp": [3],
  "segments": [4],
  "repeats": 2,
  "epochs": 2,
  "hidden": [8],
  "seed": 1{extra}
}}"#,
        s(&data("tecator_train.csv")),
        s(&data("tecator.schema.json")),
        s(&data("tecator_test.csv")),
    );
    std::fs::write(&cfg, text).unwrap();
    cfg
}

#[test]
fn benchmark_writes_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), r#", "learning_rate": 1e-3"#);
    let (out, summary) = (dir.path().join("runs.csv"), dir.path().join("summary.txt"));
    let res = run(&["benchmark", "--config", s(&cfg), "--out", s(&out), "--summary", s(&summary)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "dataset,method,n_sets,A,K,lr,repeat,metric,value");
    // two cells, two repeats, rmsep + r2 + train_loss
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 3);
    let table = std::fs::read_to_string(&summary).unwrap();
    assert!(table.lines().any(|l| l.contains("none") && l.contains("rmsep")));
    assert!(table.lines().any(|l| l.contains("pls") && l.contains("rmsep")));
    assert_eq!(String::from_utf8_lossy(&res.stdout), table);
}

#[test]
fn benchmark_malformed_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{ \"dataset\": ").unwrap();
    let out = dir.path().join("o.csv");
    let res = run(&["benchmark", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("--config"));

    let cfg = tiny_config(dir.path(), r#", "learning_rate": -1.0"#);
    assert_eq!(code(&run(&["benchmark", "--config", s(&cfg), "--out", s(&out)])), 2);
}

#[test]
fn benchmark_divergence_names_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), r#", "learning_rate": 1e300"#);
    let out = dir.path().join("o.csv");
    let res = run(&["benchmark", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&res), 1, "{}", stderr(&res));
    let err = stderr(&res);
    assert!(err.contains("n_sets=0") && err.contains("repeat="), "{err}");
    assert!(err.contains("diverged"), "{err}");
}
