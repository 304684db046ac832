use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use trvqc_cli::commands::{cmd_sweep, parse_params, SweepAxis};
use trvqc_cli::config::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trvqc"))
}

fn iris_csv() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.csv").canonicalize().unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn iris_config(dir: &Path, epochs: usize, qubits: usize) -> PathBuf {
    let body = format!(
        "seed = 3\nout_dir = \"{out}\"\n\n[dataset]\nkind = \"iris\"\npath = \"{csv}\"\nfeature_dim = 4\n\n\
         [circuit]\nnum_qubits = {qubits}\nnum_layers = 1\nrank = 4\n\n\
         [train]\nlearning_rate = 0.01\nbatch_size = 4\nepochs = {epochs}\n",
        out = dir.join("out").display(),
        csv = iris_csv().display()
    );
    let path = dir.join("iris.toml");
    fs::write(&path, body).unwrap();
    path
}

/// Forty rows of eight features; label 1 when the row sum exceeds 12 and on every seventh row.
fn feature_config(dir: &Path) -> ExperimentConfig {
    let mut csv = String::from("f0,f1,f2,f3,f4,f5,f6,f7,label\n");
    let mut x = 0.37f64;
    for i in 0..40 {
        let row: Vec<f64> = (0..8).map(|_| { x = (x * 3.71 + 0.13).fract(); x * 3.0 }).collect();
        let label = usize::from(row.iter().sum::<f64>() > 12.0 || i % 7 == 0);
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        csv.push_str(&format!("{},{label}\n", cells.join(",")));
    }
    let path = dir.join("feat.csv");
    fs::write(&path, csv).unwrap();
    let body = format!(
        "out_dir = \"{}\"\n[dataset]\nkind = \"features\"\npath = \"{}\"\nfeature_dim = 8\n\n\
         [circuit]\nnum_qubits = 8\nnum_layers = 1\nrank = 2\n\n[train]\nlearning_rate = 0.01\nbatch_size = 8\nepochs = 1\n",
        dir.join("sweep").display(),
        path.display()
    );
    ExperimentConfig::parse(&body).unwrap()
}

fn without_seconds(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0).collect::<Vec<_>>().join("\n")
}

#[test]
fn train_writes_outputs_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = iris_config(dir.path(), 50, 4);
    let first = run(&["--config", cfg.to_str().unwrap(), "--deterministic", "train"]);
    assert!(first.status.success(), "{}", text(&first));
    assert!(text(&first).contains("test_acc="));
    let out = dir.path().join("out");
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next().unwrap(), "epoch,loss,train_acc,test_acc,seconds");
    assert_eq!(metrics.lines().count(), 51);
    let params = parse_params(&fs::read_to_string(out.join("params.txt")).unwrap()).unwrap();
    assert_eq!(params.len(), 12);

    fs::rename(&out, dir.path().join("first")).unwrap();
    let second = run(&["--config", cfg.to_str().unwrap(), "--deterministic", "train"]);
    assert!(second.status.success());
    let again = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(without_seconds(&metrics), without_seconds(&again));
    assert_eq!(
        fs::read_to_string(out.join("params.txt")).unwrap(),
        fs::read_to_string(dir.path().join("first/params.txt")).unwrap()
    );
}

#[test]
fn seed_flag_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = iris_config(dir.path(), 2, 4);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (seed, out) in [("1", &a), ("2", &b)] {
        let o = run(&["--config", cfg.to_str().unwrap(), "--seed", seed, "--out-dir", out.to_str().unwrap(), "train"]);
        assert!(o.status.success(), "{}", text(&o));
    }
    assert_ne!(fs::read_to_string(a.join("params.txt")).unwrap(), fs::read_to_string(b.join("params.txt")).unwrap());
}

#[test]
fn qubit_feature_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = iris_config(dir.path(), 1, 5);
    let o = run(&["--config", cfg.to_str().unwrap(), "train"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("circuit.num_qubits"), "{}", text(&o));
}

#[test]
fn missing_files_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = iris_config(dir.path(), 1, 4);
    let body = fs::read_to_string(&cfg).unwrap().replace(iris_csv().to_str().unwrap(), "/nonexistent/iris.csv");
    fs::write(&cfg, body).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "train"]);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o));
    assert!(text(&o).contains("/nonexistent/iris.csv"));
    assert_eq!(run(&["--config", "/nonexistent.toml", "train"]).status.code(), Some(3));
}

#[test]
fn verify_modes() {
    let o = run(&["verify", "--max-qubits", "8", "--depth", "3", "--trials", "20", "--seed", "42"]);
    assert!(o.status.success(), "{}", text(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().filter(|l| l.ends_with(" ok")).count(), 20);

    let o = run(&["verify", "--max-qubits", "2", "--depth", "0", "--trials", "1", "--seed", "0"]);
    assert!(o.status.success());
    assert!(text(&o).contains("max_amp_err=0.000e0"), "{}", text(&o));

    assert_eq!(run(&["verify", "--max-qubits", "17"]).status.code(), Some(2));
}

#[test]
fn verify_failure_exit_code() {
    // With the wrap-around CNOT a 4-qubit ring of rank 4 truncates at depth 3.
    let o = run(&["verify", "--max-qubits", "4", "--depth", "3", "--trials", "5", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(4), "{}", text(&o));
}

#[test]
fn bench_rows() {
    let o = run(&["bench", "--qubits", "4", "--rank", "2", "--depth", "1", "--reps", "100"]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout).to_string();
    let rows: Vec<&str> = stdout.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("4,2,1,"));
    assert!(stdout.contains("# t(4)/t(4) = 1.000"));
}

#[test]
fn sweep_ranks_reports_ring_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = feature_config(dir.path());
    let csv = cmd_sweep(&cfg, SweepAxis::Ranks, &[2, 4, 8, 16], false).unwrap();
    let counts: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(counts, ["64", "256", "1024", "4096"]);
    assert_eq!(fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap(), csv);
    assert_eq!(cmd_sweep(&cfg, SweepAxis::Ranks, &[2, 4, 8, 16], false).unwrap(), csv);
}

#[test]
fn sweep_layers_and_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = feature_config(dir.path());
    let csv = cmd_sweep(&cfg, SweepAxis::Layers, &[1, 2, 3], false).unwrap();
    let layers: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(layers, ["1", "2", "3"]);
    let err = cmd_sweep(&cfg, SweepAxis::Layers, &[], false).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
