use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dynetforge::io::{checkpoint_to_bytes, read_dataset, read_report, REPORT_HEADER};
use dynetforge::{ModelKind, TrainConfig, TrainedModel};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynetforge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn dynetforge")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small gene dataset on a 4x4 grid.
fn small_dataset(dir: &TempDir, name: &str, protocol: &str) -> PathBuf {
    let out = path(dir, name);
    ok(&[
        "generate", "--dynamics", "gene", "--graph", "grid", "--n", "16", "--protocol", protocol, "--train-frac",
        "0.3", "--seed", "2", "--out", s(&out),
    ]);
    out
}

fn train(dir: &TempDir, data: &Path, model: &str, epochs: &str, name: &str) -> PathBuf {
    let out = path(dir, name);
    ok(&[
        "train", "--model", model, "--data", s(data), "--epochs", epochs, "--hidden", "4", "--augment", "2", "--seed",
        "1", "--log-every", "0", "--out", s(&out),
    ]);
    out
}

#[test]
fn generate_reports_split_counts() {
    let dir = TempDir::new().unwrap();
    let irregular = path(&dir, "i.dset");
    let text = ok(&[
        "generate", "--dynamics", "gene", "--graph", "grid", "--n", "400", "--protocol", "irregular", "--train-frac",
        "0.1", "--seed", "1", "--out", s(&irregular),
    ]);
    assert!(text.contains("120 snapshots (train 10, interp_test 90, extrap_test 20)"), "{text}");

    let regular = path(&dir, "r.dset");
    let text = ok(&[
        "generate", "--dynamics", "kuramoto", "--graph", "er", "--n", "400", "--protocol", "regular", "--seed", "1",
        "--out", s(&regular),
    ]);
    assert!(text.contains("80 snapshots (train 64, interp_test 0, extrap_test 16)"), "{text}");
    assert_eq!(read_dataset(&regular).unwrap().len(), 80);
}

#[test]
fn generate_is_reproducible_and_refuses_to_overwrite() {
    let dir = TempDir::new().unwrap();
    let a = small_dataset(&dir, "a.dset", "irregular");
    let b = small_dataset(&dir, "b.dset", "irregular");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let again = run(&["generate", "--dynamics", "gene", "--graph", "grid", "--n", "16", "--out", s(&a)]);
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    ok(&["generate", "--dynamics", "gene", "--graph", "grid", "--n", "16", "--out", s(&a), "--force"]);
}

#[test]
fn interp_on_a_regular_dataset_is_rejected() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, "r.dset", "regular");
    let ckpt = train(&dir, &data, "agog", "2", "m.ckpt");
    let out = run(&["eval", "--checkpoint", s(&ckpt), "--data", s(&data), "--task", "interp", "--out", s(&path(&dir, "r.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no interp_test split"));
}

#[test]
fn oracle_scores_zero_and_eval_appends() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, "d.dset", "irregular");
    let ckpt = train(&dir, &data, "oracle", "0", "o.ckpt");
    let report = path(&dir, "report.csv");
    for _ in 0..2 {
        ok(&["eval", "--checkpoint", s(&ckpt), "--data", s(&data), "--task", "extrap", "--out", s(&report)]);
    }
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().next(), Some(REPORT_HEADER));
    assert_eq!(text.lines().filter(|l| *l == REPORT_HEADER).count(), 1);
    let rows = read_report(&report).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[..2], rows[2..]);
    assert!(rows.iter().all(|r| r.value == Some(0.0) && r.method == "Oracle"));
    let series = std::fs::read_to_string(path(&dir, "report.series.csv")).unwrap();
    assert_eq!(series.lines().count(), 1 + 2 * 20);
}

#[test]
fn zero_epochs_writes_the_initialization() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(&dir, "d.dset", "irregular");
    let ckpt = train(&dir, &data, "agog", "0", "m.ckpt");
    let dataset = read_dataset(&data).unwrap();
    let mut config = TrainConfig::new(ModelKind::Agog).with_epochs(0).with_seed(1);
    config.hidden = 4;
    config.augment = 2;
    let init = TrainedModel::initialize(&dataset, &config).unwrap();
    assert_eq!(std::fs::read(&ckpt).unwrap(), checkpoint_to_bytes(&init).unwrap());
}

#[test]
fn viz_warns_about_non_square_node_counts() {
    let dir = TempDir::new().unwrap();
    let data = path(&dir, "ten.dset");
    ok(&["generate", "--dynamics", "gene", "--graph", "er", "--n", "10", "--train-frac", "0.3", "--seed", "3", "--out", s(&data)]);
    let ckpt = train(&dir, &data, "agog", "2", "m.ckpt");
    let grids = path(&dir, "grids.txt");
    let out = run(&["viz", "--checkpoint", s(&ckpt), "--data", s(&data), "--times", "0.5,4.9", "--out", s(&grids)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not a perfect square"));
    let text = std::fs::read_to_string(&grids).unwrap();
    assert!(text.contains("layout 1 10"));
    assert_eq!(text.matches("\ntime ").count(), 2);
}

fn matrix_spec(dir: &TempDir, body: &str) -> PathBuf {
    let p = path(dir, "spec.toml");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn matrix_output_is_independent_of_jobs() {
    let dir = TempDir::new().unwrap();
    let spec = matrix_spec(
        &dir,
        r#"
dynamics = ["gene"]
graphs = ["grid", "community"]
methods = ["agog", "ndcn"]
seeds = [1, 2]
tasks = ["interp", "extrap"]
n = 16
epochs = 3
hidden = 4
augment = 1
"#,
    );
    let one = path(&dir, "one");
    let two = path(&dir, "two");
    ok(&["matrix", "--spec", s(&spec), "--jobs", "1", "--out-dir", s(&one)]);
    ok(&["matrix", "--spec", s(&spec), "--jobs", "2", "--out-dir", s(&two)]);
    for f in ["report.csv", "report.series.csv", "aggregate.csv"] {
        let a = std::fs::read(one.join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, std::fs::read(two.join(f)).unwrap(), "{f}");
    }
    assert_eq!(std::fs::read_dir(one.join("datasets")).unwrap().count(), 4);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["eval", "--checkpoint", "/nonexistent", "--data", "/nonexistent", "--task", "extrap", "--out", "/tmp/x.csv"]).status.code(), Some(1));

    // This draw traps a node at the singular mutualistic denominator.
    let bad = path(&dir, "m.dset");
    let out = run(&[
        "generate", "--dynamics", "mutualistic", "--graph", "grid", "--n", "16", "--seed", "109", "--out", s(&bad),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let spec = matrix_spec(
        &dir,
        r#"
dynamics = ["gene", "mutualistic"]
graphs = ["grid"]
methods = ["agog"]
seeds = [109]
tasks = ["interp"]
n = 16
epochs = 2
hidden = 3
augment = 1
"#,
    );
    let out_dir = path(&dir, "partial");
    let out = run(&["matrix", "--spec", s(&spec), "--out-dir", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_report(&out_dir.join("report.csv")).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.dynamics.as_str() == "gene"));
}

#[test]
fn thread_override_must_be_positive() {
    let out = bin().env("DYNETFORGE_THREADS", "0").args(["matrix", "--spec", "x", "--out-dir", "y"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
