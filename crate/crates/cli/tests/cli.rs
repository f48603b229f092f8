use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn idim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idim"))
        .args(args)
        .env_remove("IDIM_THREADS")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn swissroll(dir: &Path) -> String {
    let p = path(dir, "swiss.csv");
    let out = idim(&["generate", "--kind", "swissroll", "--n", "300", "--seed", "4", "--out", &p, "--quiet"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    p
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(idim(&["--help"]).status.code(), Some(0));
    assert_eq!(idim(&["--version"]).status.code(), Some(0));
    assert_eq!(idim(&["twonn", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let s = swissroll(dir.path());
    let cases: Vec<Vec<&str>> = vec![
        vec!["twonn", "--input", &s, "--method", "bayes", "--alpha", "1.5"],
        vec!["twonn", "--input", &s, "--no-such-flag"],
        vec!["twonn", "--input", &s, "--method", "ols"],
        vec!["twonn", "--input", &s, "--dist", &s],
        vec!["twonn", "--input", &s, "--c-trimmed", "1"],
        vec!["twonn", "--input", &s, "--plot-data", "x.csv"],
        vec!["hidalgo", "--input", &s, "--prior", "truncated", "--out-dir", "unused"],
        vec!["hidalgo", "--input", &s, "--xi", "0.4", "--out-dir", "unused"],
        vec!["hidalgo", "--input", &s, "--nsim", "7", "--thinning", "5", "--out-dir", "unused"],
        vec!["hidalgo", "--out-dir", "unused"],
        vec!["generate", "--kind", "pareto", "--n", "10", "--out", "unused.csv"],
        vec!["generate", "--kind", "swissroll", "--n", "2", "--out", "unused.csv"],
        vec!["mus", "--input", &s, "--n1", "2", "--n2", "2", "--out-dir", "unused"],
        vec![],
    ];
    for args in cases {
        let out = idim(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", text(&out.stderr));
        assert!(out.stdout.is_empty(), "{args:?} wrote to stdout");
    }
    assert!(!Path::new("unused").exists());
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.csv");
    fs::write(&bad, "a,b\n1,x\n2,3\n").unwrap();
    let dup = path(dir.path(), "dup.csv");
    fs::write(&dup, "a\n1\n1\n1\n2\n").unwrap();
    let asym = path(dir.path(), "asym.csv");
    fs::write(&asym, "0,1,2\n1,0,3\n2,4,0\n").unwrap();
    let missing = path(dir.path(), "missing.csv");
    let cases: Vec<Vec<&str>> = vec![
        vec!["twonn", "--input", &missing],
        vec!["twonn", "--input", &bad],
        vec!["twonn", "--input", &dup],
        vec!["twonn", "--dist", &asym, "--header", "false"],
        vec!["summarize", "--run-dir", dir.path().to_str().unwrap()],
    ];
    for args in cases {
        let out = idim(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", text(&out.stderr));
        assert!(text(&out.stderr).starts_with("error: "));
    }
}

#[test]
fn duplicate_warning_goes_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let dup = path(dir.path(), "dup.csv");
    fs::write(&dup, "x,y\n1,1\n1,1\n2,2\n2,2\n3,5\n").unwrap();
    let out_dir = path(dir.path(), "mus");
    let out = idim(&["mus", "--input", &dup, "--out-dir", &out_dir]);
    assert!(out.status.success());
    let err = text(&out.stderr);
    assert!(err.contains("Duplicates are present and will be removed."), "{err}");
    assert!(err.contains("Original sample size: 5. New sample size: 3."), "{err}");
    assert!(out.stdout.is_empty());
    let mus = fs::read_to_string(dir.path().join("mus/mus.csv")).unwrap();
    assert_eq!(mus.lines().next(), Some("index,mu"));
    assert_eq!(mus.lines().count(), 4);

    // Warnings survive --quiet; progress does not.
    let quiet = idim(&["mus", "--input", &dup, "--out-dir", &out_dir, "--quiet"]);
    let err = text(&quiet.stderr);
    assert!(err.contains("New sample size: 3."));
    assert!(!err.contains("info:"));
}

#[test]
fn twonn_text_report_layout() {
    let dir = tempfile::tempdir().unwrap();
    let s = swissroll(dir.path());
    let out = idim(&["twonn", "--input", &s, "--method", "mle", "--c-trimmed", "0.001"]);
    assert!(out.status.success());
    let report = text(&out.stdout);
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "Model: TWO-NN");
    assert_eq!(lines[1], "Method: MLE");
    assert_eq!(lines[2], "Sample size: 300, Obs. used: 300. Trimming proportion: 0.1%");
    assert_eq!(lines[3], "ID estimates (confidence level: 0.95)");
    assert_eq!(lines[4], "");
    assert_eq!(lines[5], "| Lower Bound| Estimate| Upper Bound|");
    assert_eq!(lines[6], "|-----------:|--------:|-----------:|");
    assert!(!text(&out.stderr).contains("Model:"));

    let bayes = idim(&["twonn", "--input", &s, "--method", "bayes", "--a-d", "10", "--b-d", "10", "--alpha", "0.99"]);
    let report = text(&bayes.stdout);
    assert!(report.contains("Method: Bayesian Estimation\n"));
    assert!(report.contains("Prior d ~ Gamma(10, 10)\n"));
    assert!(report.contains("Credible interval quantiles: 0.5%, 99.5%\n"));
    let header = report.lines().find(|l| l.starts_with("| Lower Bound|")).unwrap();
    let cells: Vec<&str> = header.trim_matches('|').split('|').map(str::trim).collect();
    assert_eq!(cells, ["Lower Bound", "Mean", "Median", "Mode", "Upper Bound"]);
}

#[test]
fn twonn_json_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let s = swissroll(dir.path());
    let out = idim(&["twonn", "--input", &s, "--output", "json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is one JSON object");
    let est = v["estimate"].as_f64().unwrap();
    let (lo, hi) = (v["interval"]["lower"].as_f64().unwrap(), v["interval"]["upper"].as_f64().unwrap());
    assert!(lo < est && est < hi);
    assert_eq!(v["config"]["method"], "mle");
    assert_eq!(v["n_original"], 300);

    let json = path(dir.path(), "fit.json");
    let plot = path(dir.path(), "grid.csv");
    let out = idim(&[
        "twonn", "--input", &s, "--method", "bayes", "--output", "json", "--out", &json, "--plot-data", &plot,
        "--plot-low", "1", "--plot-upp", "3", "--plot-by", "0.5",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("Model: TWO-NN"));
    let grid = fs::read_to_string(&plot).unwrap();
    assert_eq!(grid.lines().next(), Some("x,prior,posterior"));
    assert_eq!(grid.lines().count(), 6);

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(format!("{json}.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "twonn");
    assert_eq!(manifest["flags"]["method"], "bayes");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert!(manifest["elapsed_secs"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn distance_matrix_input_matches_points() {
    let dir = tempfile::tempdir().unwrap();
    let pts = path(dir.path(), "pts.csv");
    let dist = path(dir.path(), "dist.csv");
    fs::write(&pts, "0\n1\n3\n7\n12\n").unwrap();
    let x = [0.0f64, 1.0, 3.0, 7.0, 12.0];
    let rows: Vec<String> = x
        .iter()
        .map(|a| x.iter().map(|b| (a - b).abs().to_string()).collect::<Vec<_>>().join(","))
        .collect();
    fs::write(&dist, rows.join("\n") + "\n").unwrap();
    let a = idim(&["twonn", "--input", &pts, "--header", "false", "--output", "csv", "--c-trimmed", "0"]);
    let b = idim(&["twonn", "--dist", &dist, "--header", "false", "--output", "csv", "--c-trimmed", "0"]);
    assert!(a.status.success() && b.status.success(), "{}", text(&b.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn hidalgo_and_summarize_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let g = path(dir.path(), "g.csv");
    assert!(idim(&["generate", "--kind", "gaussmix", "--n", "30", "--seed", "2", "--out", &g]).status.success());
    let run = path(dir.path(), "run");
    let out = idim(&[
        "hidalgo", "--input", &g, "--drop-col", "class", "--k", "4", "--nsim", "60", "--burn-in", "20",
        "--thinning", "3", "--seed", "9", "--out-dir", &run,
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let summary = text(&out.stdout);
    assert!(summary.starts_with("Model: Hidalgo\nMethod: Bayesian Estimation\n"));
    assert!(summary.contains("Prior d ~ Gamma(1, 1), type = Conjugate\n"));
    assert!(summary.contains("Prior on mixture weights: Dirichlet(0.05) with 4 mixture components\n"));
    assert!(summary.contains("Total iterations: 80, Burn in: 20, Elapsed time: "));

    let labels = fs::read_to_string(dir.path().join("run/membership_labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 21);
    assert_eq!(labels.lines().nth(1).unwrap().split(',').count(), 90);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);

    let out = idim(&["summarize", "--run-dir", &run, "--k-clusters", "2", "--class", &format!("{g}:class")]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report = text(&out.stdout);
    assert!(report.contains("Retrieved clusters: 2.\n"));
    assert!(report.contains("| class|"));
    for f in ["id_summary.csv", "psm.csv", "clusters.csv", "id_by_class.csv", "nn_profile.csv"] {
        assert!(dir.path().join("run").join(f).exists(), "{f} missing");
    }
    let by_class = fs::read_to_string(dir.path().join("run/id_by_class.csv")).unwrap();
    assert_eq!(by_class.lines().next(), Some("class,n,mean,median,sd"));
    assert_eq!(by_class.lines().count(), 4);
    let profile = fs::read_to_string(dir.path().join("run/nn_profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 90);
}

#[test]
fn identical_seeds_give_identical_chains() {
    let dir = tempfile::tempdir().unwrap();
    let s = swissroll(dir.path());
    let run = |name: &str, threads: &str| {
        let out_dir = path(dir.path(), name);
        let out = Command::new(env!("CARGO_BIN_EXE_idim"))
            .args(["hidalgo", "--input", &s, "--nsim", "40", "--burn-in", "10", "--thinning", "1", "--quiet"])
            .args(["--seed", "3", "--out-dir", &out_dir])
            .env("IDIM_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        ["cluster_prob.csv", "membership_labels.csv", "id_raw.csv", "config.json"]
            .map(|f| fs::read(dir.path().join(name).join(f)).unwrap())
    };
    assert_eq!(run("a", "1"), run("b", "3"));
}

#[test]
fn invalid_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_idim"))
        .args(["generate", "--kind", "swissroll", "--n", "10", "--out", "never.csv"])
        .env("IDIM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!Path::new("never.csv").exists());
}
