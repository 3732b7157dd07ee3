use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kernel-tree"))
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn records(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn cluster_matches_golden_labels() {
    let dir = tempfile::tempdir().unwrap();
    let iris = repo_file("data/iris.csv");
    ok(&[
        "cluster",
        "--data",
        s(&iris),
        "--label-column",
        "label",
        "--kernel",
        "laplace",
        "--gamma",
        "0.5",
        "--k",
        "3",
        "--seed",
        "1",
        "--out-dir",
        s(dir.path()),
    ]);
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/iris_laplace_k3_seed1_labels.csv")).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("labels.csv")).unwrap(), golden);
    let rec = &records(&dir.path().join("metrics.jsonl"))[0];
    // cost of the golden partition recomputed independently with numpy
    let cost = rec["cost"].as_f64().unwrap();
    assert!((cost - 73.49037921667528).abs() < 1e-9 * cost);
    assert_eq!(rec["seed"], 1);
    assert_eq!(rec["method"], "kernel_kmeans");
    for key in ["dataset", "kernel", "gamma", "method", "leaves", "cost", "price", "ari", "seed", "runtime_ms"] {
        assert!(rec.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn zero_clusters_is_a_usage_error() {
    let iris = repo_file("data/iris.csv");
    let out = run(&["cluster", "--data", s(&iris), "--kernel", "laplace", "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn chi2_on_negative_data_names_coordinate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("neg.csv");
    fs::write(&data, "0.5,0.2\n0.1,-0.3\n0.4,0.4\n").unwrap();
    let out = run(&["cluster", "--data", s(&data), "--kernel", "chi2", "--k", "2", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("coordinate 1"), "{err}");
    assert!(!dir.path().join("labels.csv").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    let iris = repo_file("data/iris.csv");
    fs::write(&cfg, format!("data = {}\nlabel-column = label\nkernel = laplace\ngamma = 9\nk = 3\nseed = 1\n", iris.display())).unwrap();
    let out = ok(&["--config", s(&cfg), "cluster", "--gamma", "0.5", "--out-dir", s(dir.path())]);
    let rec: Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(rec["gamma"], 0.5);
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/iris_laplace_k3_seed1_labels.csv")).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("labels.csv")).unwrap(), golden);
}

#[test]
fn explain_then_refine_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let iris = repo_file("data/iris.csv");
    let common = ["--data", s(&iris), "--label-column", "label", "--kernel", "laplace", "--gamma", "4", "--normalize", "true"];
    let mut args = vec!["explain"];
    args.extend(common);
    args.extend(["--k", "3", "--restarts", "5", "--out-dir", s(d)]);
    ok(&args);
    let recs = records(&d.join("metrics.jsonl"));
    assert_eq!(recs[1]["method"], "kernel_imm");
    assert!(recs[1]["price"].as_f64().unwrap() >= 1.0);
    assert!(fs::read_to_string(d.join("tree.dot")).unwrap().starts_with("digraph"));

    // refining to the current leaf count leaves the tree unchanged
    let same = d.join("same");
    let mut args = vec!["refine"];
    args.extend(common);
    let tree = d.join("tree.json");
    let reference = d.join("reference_labels.csv");
    args.extend(["--tree", s(&tree), "--reference", s(&reference), "--leaves", "3", "--out-dir", s(&same)]);
    ok(&args);
    assert_eq!(fs::read_to_string(same.join("tree.json")).unwrap(), fs::read_to_string(&tree).unwrap());

    let grown = d.join("grown");
    let mut args = vec!["refine"];
    args.extend(common);
    args.extend(["--tree", s(&tree), "--reference", s(&reference), "--leaves", "6", "--objective", "expand"]);
    args.extend(["--out-dir", s(&grown)]);
    ok(&args);
    let rec = &records(&grown.join("metrics.jsonl"))[0];
    assert_eq!(rec["leaves"], 6);
    assert_eq!(rec["method"], "kernel_expand");

    let mut args = vec!["evaluate"];
    args.extend(common);
    let grown_tree = grown.join("tree.json");
    args.extend(["--tree", s(&grown_tree), "--reference", s(&reference)]);
    let out = ok(&args);
    let eval: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(eval["cost"], rec["cost"]);
    assert_eq!(eval["price"], rec["price"]);
}

#[test]
fn explain_without_labels_omits_ari() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("moons.csv");
    ok(&["generate", "--kind", "halfmoons", "--n", "60", "--seed", "3", "--out", s(&data)]);
    let text = fs::read_to_string(&data).unwrap();
    let unlabeled: String = text.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n").collect();
    let plain = dir.path().join("plain.csv");
    fs::write(&plain, unlabeled).unwrap();
    ok(&["explain", "--data", s(&plain), "--kernel", "gaussian", "--gamma", "2", "--k", "2", "--out-dir", s(dir.path())]);
    for rec in records(&dir.path().join("metrics.jsonl")) {
        assert!(rec["ari"].is_null());
    }
}

#[test]
fn empty_refinement_on_counterexample_has_large_price() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ex.csv");
    ok(&["generate", "--kind", "exkmc", "--eps", "0.01", "--per-side", "10", "--out", s(&data)]);
    let out = ok(&[
        "refine",
        "--data",
        s(&data),
        "--label-column",
        "label",
        "--kernel",
        "linear",
        "--empty",
        "--k",
        "3",
        "--restarts",
        "5",
        "--cuts",
        "one_sided",
        "--leaves",
        "3",
        "--out-dir",
        s(dir.path()),
    ]);
    let rec: Value = serde_json::from_str(out.trim()).unwrap();
    let eps: f64 = 0.01;
    let bound = 0.5 + (1.0 - 2.0 * eps).powi(2) / (9.0 * eps * eps);
    assert!(rec["price"].as_f64().unwrap() >= bound);
}

#[test]
fn refine_needs_a_start() {
    let iris = repo_file("data/iris.csv");
    let out = run(&["refine", "--data", s(&iris), "--kernel", "linear", "--leaves", "4", "--k", "3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn generators_write_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.csv");
    ok(&["generate", "--kind", "quadratic", "--out", s(&q)]);
    assert_eq!(fs::read_to_string(&q).unwrap().lines().count(), 5);
    let ex = dir.path().join("ex.csv");
    ok(&["generate", "--kind", "exkmc", "--eps", "0.01", "--out", s(&ex)]);
    let text = fs::read_to_string(&ex).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x0,label");
    assert_eq!(text.lines().count(), 61);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["generate", "--kind", "halfmoons", "--n", "200", "--seed", "7", "--out", s(&a)]);
    ok(&["generate", "--kind", "halfmoons", "--n", "200", "--seed", "7", "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let w = dir.path().join("w.csv");
    ok(&["generate", "--kind", "witnesses", "--out", s(&w)]);
    assert!(dir.path().join("w_separable.csv").exists());
    assert!(dir.path().join("w_monotone.csv").exists());
    assert_eq!(run(&["generate", "--kind", "nope", "--out", s(&w)]).status.code(), Some(1));
}

#[test]
fn benchmark_is_deterministic_and_reports_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = repo_file("data");
    let run_once = |tag: &str| {
        let m = dir.path().join(format!("{tag}.jsonl"));
        let t = dir.path().join(format!("{tag}.txt"));
        ok(&[
            "--threads",
            "2",
            "benchmark",
            "--data-dir",
            s(&data_dir),
            "--datasets",
            "iris",
            "--gamma-count",
            "4",
            "--chi2-draws",
            "3",
            "--metrics",
            s(&m),
            "--table",
            s(&t),
        ]);
        records(&m)
            .into_iter()
            .map(|mut r| {
                r["runtime_ms"] = Value::from(0);
                r
            })
            .collect::<Vec<_>>()
    };
    let a = run_once("a");
    assert_eq!(a, run_once("b"));
    let methods: Vec<&str> = a.iter().map(|r| r["method"].as_str().unwrap()).collect();
    assert_eq!(methods.iter().filter(|m| **m == "kernel_kmeans_grid").count(), 4);
    for m in ["kernel_imm", "kernel_exkmc", "kernel_expand", "imm", "kmeans"] {
        assert!(methods.contains(&m), "{m}");
    }
    assert!(fs::read_to_string(dir.path().join("a.txt")).unwrap().contains("chi2 mixture"));

    let empty = tempfile::tempdir().unwrap();
    let base = ["benchmark", "--data-dir", s(empty.path()), "--datasets", "flame", "--chi2-draws", "0", "--out-dir", s(dir.path())];
    assert_eq!(run(&base).status.code(), Some(1));
    let mut skip = base.to_vec();
    skip.push("--skip-missing");
    ok(&skip);
}
