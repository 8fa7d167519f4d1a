use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sr1tr"))
}

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn data(name: &str) -> String {
    manifest().join("../../data/mnist-desk").join(name).display().to_string()
}

/// Writes a config for the desk data with `extra` JSON members appended.
fn write_config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let subset = if extra.contains("subset_size") { "" } else { r#", "subset_size": 200"# };
    let text = format!(
        r#"{{
  "network": [784, 4, 10],
  "train_images": "{}",
  "train_labels": "{}",
  "test_images": "{}",
  "test_labels": "{}",
  "seed": 3{subset}{extra}
}}"#,
        data("train-images-idx3-ubyte.gz"),
        data("train-labels-idx1-ubyte.gz"),
        data("t10k-images-idx3-ubyte.gz"),
        data("t10k-labels-idx1-ubyte.gz"),
    );
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn field(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
}

fn fixture(name: &str) -> String {
    manifest().join("fixtures").join(name).display().to_string()
}

#[test]
fn spherical_fixture() {
    let out = run(&["solve-subproblem", &fixture("spherical.txt")]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let sigma: f64 = field(&stdout, "sigma_star").parse().unwrap();
    assert!((sigma - 2.0).abs() <= 1e-10, "{stdout}");
}

#[test]
fn hard_case_fixture() {
    let out = run(&["solve-subproblem", &fixture("hard_case.txt")]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(field(&stdout, "hard_case"), "true");
    let p_norm: f64 = field(&stdout, "p_norm").parse().unwrap();
    assert!((p_norm - 2.0).abs() <= 1e-10, "{stdout}");
}

#[test]
fn interior_fixture() {
    let out = run(&["solve-subproblem", &fixture("interior.txt")]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(field(&stdout, "sigma_star"), "0");
}

#[test]
fn malformed_fixture_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "gamma 1\ng 1\n").unwrap();
    let out = run(&["solve-subproblem", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["iter", "wall_seconds", "train_loss", "test_loss", "grad_norm", "delta", "rho", "alpha", "batch_size", "full_loss"]
    );
    r.records().map(Result::unwrap).collect()
}

#[test]
fn minimal_train_writes_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.json", r#", "method": "lsr1-tr", "max_iter": 10"#);
    let out_dir = dir.path().join("out");
    let out = run(&["train", cfg.to_str().unwrap(), "--output", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_rows(&out_dir.join("tiny-lsr1-tr.csv"));
    assert_eq!(rows.len(), 10);
    // Checkpoint at iteration 10 carries the held-out loss.
    assert!(!rows[9][3].is_empty());
    assert!(rows[0][3].is_empty());
}

#[test]
fn stochastic_batch_sizes_start_at_100_and_grow() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sto.json",
        r#", "method": "lssr1-tr", "subset_size": 1000, "batch_size": 100, "overlap": 0.33, "momentum": 0.9, "max_iter": 40"#,
    );
    let out = run(&["train", cfg.to_str().unwrap(), "--output", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_rows(&dir.path().join("sto-lssr1-tr.csv"));
    let sizes: Vec<usize> = rows.iter().map(|r| r[8].parse().unwrap()).collect();
    assert_eq!(sizes[0], 100);
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
    assert!(rows.iter().filter(|r| !r[9].is_empty()).count() >= 4);
}

#[test]
fn identical_configs_give_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rep.json", r#", "method": "lssr1-tr", "batch_size": 50, "max_iter": 15"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out_dir in [&a, &b] {
        let out = run(&["train", cfg.to_str().unwrap(), "--output", out_dir.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let strip = |p: PathBuf| -> Vec<Vec<String>> {
        read_rows(&p)
            .iter()
            .map(|r| r.iter().enumerate().filter(|(i, _)| *i != 1).map(|(_, v)| v.to_string()).collect())
            .collect()
    };
    assert_eq!(strip(a.join("rep-lssr1-tr.csv")), strip(b.join("rep-lssr1-tr.csv")));
}

#[test]
fn bench_writes_three_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bench.json", r#", "max_iter": 5"#);
    let out = run(&["bench", cfg.to_str().unwrap(), "--output", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    for m in ["lsr1-tr", "lssr1-tr", "lbfgs"] {
        assert!(dir.path().join(format!("bench-{m}.csv")).exists());
        assert!(stdout.contains(m));
    }
}

#[test]
fn unknown_method_lists_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#", "method": "sgd""#);
    let out = run(&["train", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    for m in ["lsr1-tr", "lssr1-tr", "lbfgs"] {
        assert!(stderr.contains(m), "{stderr}");
    }
}

#[test]
fn unknown_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#", "learning_rate": 0.1"#);
    let out = run(&["train", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("learning_rate"));
}

#[test]
fn missing_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nodata.json");
    std::fs::write(
        &path,
        r#"{"network": [784, 10], "train_images": "nope.gz", "train_labels": "nope.gz"}"#,
    )
    .unwrap();
    let out = run(&["train", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn time_budget_stops_early() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "budget.json", r#", "max_iter": 100000"#);
    let out = run(&["train", cfg.to_str().unwrap(), "--output", dir.path().to_str().unwrap(), "--time-budget", "0.5"]);
    assert!(out.status.success());
    let rows = read_rows(&dir.path().join("budget-lsr1-tr.csv"));
    assert!(rows.len() < 100000);
}
