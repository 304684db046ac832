use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trvqc::circuit::{default_readout, forward, CircuitSpec, FeatureVector, ParamVector};
use trvqc::data::{self, Dataset, Split};
use trvqc::oracle::sv_forward;
use trvqc::train::{self, LossKind, Metrics};
use trvqc::{backward, finite_diff_grad, Tape, TensorRing};

use crate::config::{DatasetKind, ExperimentConfig, Reduction};
use crate::AppError;

pub const PARAMS_HEADER: &str = "# trvqc params v1";

fn core_err(e: trvqc::Error) -> AppError {
    match e {
        trvqc::Error::Data(_) | trvqc::Error::Io { .. } => AppError::Data(e.to_string()),
        other => AppError::Other(other.to_string()),
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), AppError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| AppError::Other(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, body).map_err(|e| AppError::Other(format!("cannot write {}: {e}", path.display())))
}

fn seeded_subset(data: &Dataset<f64>, limit: Option<usize>, seed: u64) -> Dataset<f64> {
    match limit {
        Some(n) if n < data.len() => {
            let mut idx: Vec<usize> = (0..data.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            idx.truncate(n);
            idx.sort_unstable();
            data.subset(&idx)
        }
        _ => data.clone(),
    }
}

/// Loads, splits, reduces and scales the configured dataset.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<Split<f64>, AppError> {
    let d = &cfg.dataset;
    let seed = cfg.seed;
    let raw_split = match d.kind {
        DatasetKind::Iris | DatasetKind::Features => {
            let path = d.path.as_ref().expect("validated");
            let all = if d.kind == DatasetKind::Iris { data::load_iris(path) } else { data::load_feature_csv(path) }
                .map_err(core_err)?;
            let mut s = data::split(&all, d.split_ratio, seed).map_err(core_err)?;
            s.train = seeded_subset(&s.train, d.train_limit, seed);
            s.test = seeded_subset(&s.test, d.test_limit, seed.wrapping_add(1));
            s
        }
        DatasetKind::Mnist => {
            let (images, labels) = (d.images.as_ref().expect("validated"), d.labels.as_ref().expect("validated"));
            let all = data::load_mnist_idx(images, labels, &d.classes).map_err(core_err)?;
            match (&d.test_images, &d.test_labels) {
                (Some(ti), Some(tl)) => {
                    let test = data::load_mnist_idx(ti, tl, &d.classes).map_err(core_err)?;
                    Split {
                        train: seeded_subset(&all, d.train_limit, seed),
                        test: seeded_subset(&test, d.test_limit, seed.wrapping_add(1)),
                        ratio: d.split_ratio,
                        seed,
                    }
                }
                _ => {
                    let mut s = data::split(&all, d.split_ratio, seed).map_err(core_err)?;
                    s.train = seeded_subset(&s.train, d.train_limit, seed);
                    s.test = seeded_subset(&s.test, d.test_limit, seed.wrapping_add(1));
                    s
                }
            }
        }
    };
    let reduced = match cfg.reduction() {
        Reduction::Pca => data::reduce_features(&raw_split, d.feature_dim).map_err(core_err)?.0,
        Reduction::None => raw_split,
    };
    if reduced.train.num_features() != d.feature_dim {
        return Err(AppError::Data(format!(
            "dataset has {} features but dataset.feature_dim is {}",
            reduced.train.num_features(),
            d.feature_dim
        )));
    }
    if d.normalize {
        data::normalize_minmax(&reduced, 0.0, std::f64::consts::PI).map_err(core_err)
    } else {
        Ok(reduced)
    }
}

pub fn format_params(spec: &CircuitSpec, rank: usize, params: &ParamVector<f64>) -> String {
    let mut out = format!(
        "{PARAMS_HEADER}\n# num_qubits={} num_layers={} rank={} count={}\n",
        spec.num_qubits(),
        spec.num_layers(),
        rank,
        params.len()
    );
    for v in params.values() {
        let _ = writeln!(out, "{v:.17e}");
    }
    out
}

pub fn parse_params(text: &str) -> Result<Vec<f64>, AppError> {
    let mut lines = text.lines();
    if lines.next() != Some(PARAMS_HEADER) {
        return Err(AppError::Data(format!("params file must start with '{PARAMS_HEADER}'")));
    }
    lines
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.trim().parse().map_err(|_| AppError::Data(format!("bad angle '{l}'"))))
        .collect()
}

pub struct TrainOutcome {
    pub spec: CircuitSpec,
    pub params: ParamVector<f64>,
    pub metrics: Metrics,
}

pub fn run_training(cfg: &ExperimentConfig, split: &Split<f64>, parallel: bool) -> Result<TrainOutcome, AppError> {
    let classes = split.train.class_count().max(split.test.class_count());
    if let Some(k) = cfg.class_count() {
        if k != classes {
            return Err(AppError::Data(format!("config implies {k} classes, data has {classes}")));
        }
    }
    let spec = cfg.circuit_spec(classes)?;
    let (params, metrics) =
        train::train(&spec, &split.train, &split.test, &cfg.train_config(parallel), cfg.circuit.rank).map_err(core_err)?;
    Ok(TrainOutcome { spec, params, metrics })
}

/// `train`: writes `metrics.csv`, `params.txt` and `config.toml` to the output
/// directory and prints the final accuracies.
pub fn cmd_train(cfg: &ExperimentConfig, parallel: bool) -> Result<TrainOutcome, AppError> {
    let split = prepare_data(cfg)?;
    let out = run_training(cfg, &split, parallel)?;
    let dir = &cfg.out_dir;
    write_file(&dir.join("metrics.csv"), &out.metrics.to_csv(true))?;
    write_file(&dir.join("params.txt"), &format_params(&out.spec, cfg.circuit.rank, &out.params))?;
    write_file(&dir.join("config.toml"), &cfg.to_toml())?;
    let last = out.metrics.epochs.last().expect("at least one epoch");
    println!(
        "epochs={} train_acc={:.4} test_acc={:.4} train_samples={} test_samples={} out_dir={}",
        last.epoch,
        last.train_acc,
        last.test_acc,
        split.train.len(),
        split.test.len(),
        dir.display()
    );
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialReport {
    pub trial: usize,
    pub num_qubits: usize,
    pub depth: usize,
    pub rank: usize,
    pub max_amplitude_error: f64,
    /// Largest `|backward − fd| / |fd|` over components with `|fd| ≥ 1e-2`.
    pub max_gradient_rel_error: f64,
    /// Largest `|backward − fd|` over components with `|fd| < 1e-2`.
    pub max_gradient_abs_error: f64,
}

impl TrialReport {
    pub fn passed(&self) -> bool {
        self.max_amplitude_error < 1e-8 && self.max_gradient_rel_error < 1e-4 && self.max_gradient_abs_error < 1e-6
    }
}

pub fn full_rank(num_qubits: usize) -> usize {
    1 << num_qubits.div_ceil(2)
}

pub fn random_instance(spec: &CircuitSpec, rng: &mut ChaCha8Rng) -> (ParamVector<f64>, FeatureVector<f64>) {
    let params = ParamVector::random(spec.num_params(), rng);
    let feats = ParamVector::<f64>::random(spec.num_qubits(), rng).into_vec().into_iter().map(f64::abs).collect();
    (params, FeatureVector::new(feats).expect("finite"))
}

/// Max per-amplitude distance between the rank-χ ring and the oracle.
pub fn amplitude_error(spec: &CircuitSpec, params: &ParamVector<f64>, feats: &FeatureVector<f64>, rank: usize) -> Result<f64, AppError> {
    let ring = forward(spec, params, feats, rank).map_err(core_err)?;
    let sv = sv_forward(spec, params, feats).map_err(core_err)?;
    let amps = ring.to_statevector().map_err(core_err)?;
    Ok(amps.iter().zip(sv.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

/// `(max relative error, max absolute error on small components)` between
/// backward and central differences (ε = 1e-5) for `loss` with label 0.
pub fn gradient_error(
    spec: &CircuitSpec,
    params: &ParamVector<f64>,
    feats: &FeatureVector<f64>,
    rank: usize,
    loss: LossKind,
    label: usize,
) -> Result<(f64, f64), AppError> {
    let tape = Tape::record(spec, params, feats, rank).map_err(core_err)?;
    let p = tape.readout().map_err(core_err)?;
    let (_, dp) = loss.eval(&p, label).map_err(core_err)?;
    let bw = backward(&tape, &dp).map_err(core_err)?;
    let fd = finite_diff_grad(spec, params, feats, rank, |_, r| loss.eval(r, label).map(|x| x.0).unwrap_or(f64::NAN), 1e-5)
        .map_err(core_err)?;
    let (mut rel, mut abs) = (0.0f64, 0.0f64);
    for (b, f) in bw.values().iter().zip(fd.values()) {
        let diff = (b - f).abs();
        if f.abs() >= 1e-2 {
            rel = rel.max(diff / f.abs());
        } else {
            abs = abs.max(diff);
        }
    }
    Ok((rel, abs))
}

/// `verify`: random circuits at `max_qubits` qubits and full rank, compared
/// with the statevector oracle and with finite-difference gradients.
pub fn cmd_verify(max_qubits: usize, depth: usize, trials: usize, seed: u64, wrap: bool) -> Result<Vec<TrialReport>, AppError> {
    if !(2..=trvqc::oracle::MAX_QUBITS).contains(&max_qubits) {
        return Err(AppError::Config(crate::config::ConfigError::Field {
            field: "--max-qubits",
            message: format!("must lie in 2..={}, got {max_qubits}", trvqc::oracle::MAX_QUBITS),
        }));
    }
    let n = max_qubits;
    let rank = full_rank(n);
    let spec = CircuitSpec::new(n, depth, default_readout(n, 2).map_err(core_err)?)
        .and_then(|s| s.with_wrap(wrap))
        .map_err(core_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(trials);
    for trial in 0..trials {
        let (params, feats) = random_instance(&spec, &mut rng);
        let amp = amplitude_error(&spec, &params, &feats, rank)?;
        let (rel, abs) = gradient_error(&spec, &params, &feats, rank, LossKind::SigmoidCrossEntropy, 0)?;
        let r = TrialReport {
            trial,
            num_qubits: n,
            depth,
            rank,
            max_amplitude_error: amp,
            max_gradient_rel_error: rel,
            max_gradient_abs_error: abs,
        };
        println!(
            "trial={trial} num_qubits={n} depth={depth} rank={rank} max_amp_err={amp:.3e} max_grad_rel_err={rel:.3e} max_grad_abs_err={abs:.3e} {}",
            if r.passed() { "ok" } else { "FAIL" }
        );
        reports.push(r);
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(AppError::Verification(format!("{failed} of {trials} trials over tolerance")));
    }
    Ok(reports)
}

/// Mean wall time of one forward pass in microseconds.
pub fn bench_forward(num_qubits: usize, rank: usize, depth: usize, reps: usize, seed: u64) -> Result<f64, AppError> {
    let spec = CircuitSpec::new(num_qubits, depth, default_readout(num_qubits, 2).map_err(core_err)?).map_err(core_err)?;
    let (params, feats) = random_instance(&spec, &mut ChaCha8Rng::seed_from_u64(seed));
    let mut sink = 0.0;
    for _ in 0..reps.div_ceil(10) {
        sink += forward(&spec, &params, &feats, rank).map_err(core_err)?.core(0).frobenius_norm_sq();
    }
    let start = Instant::now();
    for _ in 0..reps {
        sink += forward(&spec, &params, &feats, rank).map_err(core_err)?.core(0).frobenius_norm_sq();
    }
    let us = start.elapsed().as_secs_f64() * 1e6 / reps.max(1) as f64;
    std::hint::black_box(sink);
    Ok(us)
}

/// `bench`: CSV of `num_qubits,rank,depth,mean_forward_us`.
pub fn cmd_bench(qubits: &[usize], rank: usize, depth: usize, reps: usize, seed: u64, out_dir: Option<&Path>) -> Result<String, AppError> {
    if qubits.is_empty() {
        return Err(AppError::Config(crate::config::ConfigError::Field { field: "--qubits", message: "empty list".into() }));
    }
    if reps < 1 {
        return Err(AppError::Config(crate::config::ConfigError::Field { field: "--reps", message: "must be at least 1".into() }));
    }
    let mut csv = String::from("num_qubits,rank,depth,mean_forward_us\n");
    let mut times = Vec::new();
    for &n in qubits {
        let t = bench_forward(n, rank, depth, reps, seed)?;
        let _ = writeln!(csv, "{n},{rank},{depth},{t:.3}");
        times.push((n, t));
    }
    print!("{csv}");
    let base = times.iter().find(|(n, _)| *n == 8).or(times.first()).copied();
    if let (Some((n0, t0)), Some(&(n1, t1))) = (base, times.iter().max_by_key(|(n, _)| *n)) {
        println!("# t({n1})/t({n0}) = {:.3}", t1 / t0);
    }
    if let Some(dir) = out_dir {
        write_file(&dir.join("bench.csv"), &csv)?;
    }
    Ok(csv)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Ranks,
    Layers,
}

/// `sweep`: trains one model per rank or depth value and writes
/// `sweep.csv` with accuracies and the ring's stored parameter count.
pub fn cmd_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[usize], parallel: bool) -> Result<String, AppError> {
    if values.is_empty() {
        return Err(AppError::Config(crate::config::ConfigError::Field { field: "sweep", message: "no values to sweep".into() }));
    }
    let split = prepare_data(cfg)?;
    let mut csv = String::from("num_qubits,num_layers,rank,tr_parameters,train_acc,test_acc\n");
    for &v in values {
        let mut cell = cfg.clone();
        match axis {
            SweepAxis::Ranks => cell.circuit.rank = v,
            SweepAxis::Layers => cell.circuit.num_layers = v,
        }
        cell.validate()?;
        let n = cell.circuit.num_qubits;
        let count = TensorRing::<f64>::zero_state(n, cell.circuit.rank).map_err(core_err)?.parameter_count();
        let out = run_training(&cell, &split, parallel)?;
        let last = out.metrics.epochs.last().expect("at least one epoch");
        let line = format!("{n},{},{},{count},{:.17e},{:.17e}", cell.circuit.num_layers, cell.circuit.rank, last.train_acc, last.test_acc);
        println!("{line}");
        csv.push_str(&line);
        csv.push('\n');
    }
    write_file(&cfg.out_dir.join("sweep.csv"), &csv)?;
    Ok(csv)
}

pub fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}
