//! End-to-end acceptance checks. Run with `cargo test -p trvqc-cli --test acceptance`.
//!
//! Every check prints one `PASS`/`FAIL` line; the binary exits nonzero if any
//! check failed. Datasets are read from `TRVQC_DATA_DIR` when set, otherwise
//! from the workspace `data/` directory (see `scripts/fetch-data.sh`).

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trvqc::circuit::{default_readout, forward, CircuitSpec};
use trvqc::gates::{apply_single_in_place, GateMatrix};
use trvqc::ring::split_pair;
use trvqc::train::LossKind;
use trvqc::{BasisState, TensorRing};
use trvqc_cli::commands::{
    amplitude_error, bench_forward, full_rank, gradient_error, prepare_data, random_instance, run_training,
};
use trvqc_cli::config::ExperimentConfig;

struct Counting;

thread_local! {
    static TRACK: Cell<bool> = const { Cell::new(false) };
    static LIVE: Cell<isize> = const { Cell::new(0) };
    static PEAK: Cell<isize> = const { Cell::new(0) };
    static BIGGEST: Cell<usize> = const { Cell::new(0) };
}

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        note_alloc(layout.size());
        System.alloc(layout)
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        note_alloc(layout.size());
        System.alloc_zeroed(layout)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        note_free(layout.size());
        System.dealloc(ptr, layout)
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        note_free(layout.size());
        note_alloc(new_size);
        System.realloc(ptr, layout, new_size)
    }
}

fn note_alloc(size: usize) {
    let _ = TRACK.try_with(|t| {
        if t.get() {
            LIVE.with(|l| {
                let now = l.get() + size as isize;
                l.set(now);
                PEAK.with(|p| p.set(p.get().max(now)));
            });
            BIGGEST.with(|b| b.set(b.get().max(size)));
        }
    });
}

fn note_free(size: usize) {
    let _ = TRACK.try_with(|t| {
        if t.get() {
            LIVE.with(|l| l.set(l.get() - size as isize));
        }
    });
}

#[global_allocator]
static ALLOC: Counting = Counting;

/// `(peak live bytes, largest single allocation)` while running `f`.
fn audit<R>(f: impl FnOnce() -> R) -> (R, isize, usize) {
    LIVE.with(|l| l.set(0));
    PEAK.with(|p| p.set(0));
    BIGGEST.with(|b| b.set(0));
    TRACK.with(|t| t.set(true));
    let r = f();
    TRACK.with(|t| t.set(false));
    (r, PEAK.with(Cell::get), BIGGEST.with(Cell::get))
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data_dir() -> PathBuf {
    std::env::var_os("TRVQC_DATA_DIR").map(PathBuf::from).unwrap_or_else(|| workspace().join("data"))
}

/// Loads a shipped config, pointing its dataset files at [`data_dir`].
fn shipped_config(name: &str, seed: u64) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::load(workspace().join("configs").join(name)).map_err(|e| e.to_string())?;
    let dir = data_dir();
    let d = &mut cfg.dataset;
    for p in [&mut d.path, &mut d.images, &mut d.labels, &mut d.test_images, &mut d.test_labels].into_iter().flatten() {
        let file = p.file_name().expect("config paths name files").to_owned();
        *p = if p.parent().and_then(Path::file_name) == Some("mnist".as_ref()) { dir.join("mnist").join(file) } else { dir.join(file) };
    }
    for p in [&d.path, &d.images, &d.labels, &d.test_images, &d.test_labels].into_iter().flatten() {
        if !p.exists() {
            return Err(format!("missing data file {} (run scripts/fetch-data.sh or set TRVQC_DATA_DIR)", p.display()));
        }
    }
    cfg.seed = seed;
    Ok(cfg)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failing = Vec::new();
    for n in [4, 6, 8] {
        for d in 1..=3 {
            let spec = CircuitSpec::new(n, d, default_readout(n, 2).unwrap()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64((n * 10 + d) as u64);
            let mut cell = 0.0f64;
            for _ in 0..20 {
                let (params, feats) = random_instance(&spec, &mut rng);
                cell = cell.max(amplitude_error(&spec, &params, &feats, full_rank(n)).unwrap());
            }
            if !(cell < 1e-8) {
                failing.push(format!("N={n} d={d} err={cell:.2e}"));
            }
            worst = worst.max(cell);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = if failing.is_empty() {
        format!("9 cells x 20 circuits, max amplitude error {worst:.2e}, {secs:.1}s")
    } else {
        format!("cells over 1e-8: {}; {secs:.1}s", failing.join(", "))
    };
    outcome(failing.is_empty() && secs < 120.0, detail)
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let spec = CircuitSpec::new(4, 2, default_readout(4, 3).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut rel, mut abs) = (0.0f64, 0.0f64);
    for loss in [LossKind::SigmoidCrossEntropy, LossKind::LogSigmoidNll] {
        for _ in 0..10 {
            let (params, feats) = random_instance(&spec, &mut rng);
            let label = rng.gen_range(0..3);
            let (r, a) = gradient_error(&spec, &params, &feats, 4, loss, label).unwrap();
            rel = rel.max(r);
            abs = abs.max(a);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        rel < 1e-4 && abs < 1e-6 && secs < 60.0,
        format!("20 instances, max relative error {rel:.2e}, max absolute error on small components {abs:.2e}, {secs:.1}s"),
    )
}

fn iris_reproduction() -> Outcome {
    let start = Instant::now();
    let mut accs = Vec::new();
    for seed in 0..5 {
        let cfg = match shipped_config("iris.toml", seed) {
            Ok(c) => c,
            Err(e) => return outcome(false, e),
        };
        let split = prepare_data(&cfg).unwrap();
        let out = run_training(&cfg, &split, true).unwrap();
        accs.push(out.metrics.final_test_accuracy().unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let hits = accs.iter().filter(|a| **a >= 0.75).count();
    let list: Vec<String> = accs.iter().map(|a| format!("{a:.4}")).collect();
    outcome(hits >= 3 && secs < 300.0, format!("test accuracy by seed 0..4: [{}], {hits}/5 >= 0.75, {secs:.1}s", list.join(", ")))
}

fn mnist_binary() -> Outcome {
    let start = Instant::now();
    let cfg = match shipped_config("mnist.toml", 0) {
        Ok(c) => c,
        Err(e) => return outcome(false, e),
    };
    let split = prepare_data(&cfg).unwrap();
    let out = run_training(&cfg, &split, true).unwrap();
    let acc = out.metrics.final_test_accuracy().unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        acc >= 0.95 && secs < 600.0,
        format!("digits 0/1, {} train / {} test, test accuracy {acc:.4}, {secs:.1}s", split.train.len(), split.test.len()),
    )
}

fn parameter_counts() -> Outcome {
    let got: Vec<usize> =
        [2, 4, 8, 16].iter().map(|&chi| TensorRing::<f64>::zero_state(8, chi).unwrap().parameter_count()).collect();
    outcome(got == [64, 256, 1024, 4096], format!("N=8, chi 2/4/8/16 -> {got:?}"))
}

fn linear_scaling() -> Outcome {
    let (chi, depth) = (4, 2);
    let t8 = bench_forward(8, chi, depth, 200, 0).unwrap();
    let t64 = bench_forward(64, chi, depth, 200, 0).unwrap();
    let ratio = t64 / t8;

    let forward_audit = |n: usize| {
        let spec = CircuitSpec::new(n, depth, default_readout(n, 2).unwrap()).unwrap();
        let (params, feats) = random_instance(&spec, &mut ChaCha8Rng::seed_from_u64(1));
        audit(|| forward(&spec, &params, &feats, chi).unwrap())
    };
    let (_, peak32, _) = forward_audit(32);
    let (ring, peak64, biggest) = forward_audit(64);
    let n = 64;
    let stored = ring.parameter_count();
    // A dense vector of even 2^16 amplitudes is a 1 MiB block; none may appear,
    // and doubling N may at most roughly double what the pass holds at once.
    let growth = peak64 as f64 / peak32 as f64;
    let bounded = biggest < 1 << 20 && growth <= 2.5;
    outcome(
        ratio <= 12.0 && stored == n * chi * chi * 2 && bounded,
        format!(
            "t(64)/t(8) = {ratio:.2} ({t64:.1}us / {t8:.1}us); stored entries {stored} = N*chi^2*2; \
             forward peak live {peak64} B at N=64 vs {peak32} B at N=32 (x{growth:.2}), largest block {biggest} B"
        ),
    )
}

fn conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut single = 0.0f64;
    let mut exhaustive = 0.0f64;
    let (mut gates, mut increases, mut worst_ratio) = (0usize, 0usize, 1.0f64);
    let mut pair_increase = 0.0f64;
    for n in 2..=10 {
        for rank in [1, 2, 3, 4] {
            let spec = CircuitSpec::new(n, 2, default_readout(n, 2).unwrap()).unwrap();
            let (params, feats) = random_instance(&spec, &mut rng);
            let mut ring = forward(&spec, &params, &feats, rank).unwrap();

            let total: f64 = (0..1usize << n)
                .map(|i| ring.amplitude(&BasisState::from_index(i, n)).unwrap().norm_sqr())
                .sum();
            let z = ring.norm_sq();
            exhaustive = exhaustive.max((total - z).abs() / z.max(1.0));

            for q in 0..n {
                let before = ring.norm_sq();
                let g = GateMatrix::rot(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)).unwrap();
                apply_single_in_place(&mut ring, q, &g).unwrap();
                single = single.max((ring.norm_sq() - before).abs() / before.max(1.0));
            }

            for site in 0..n {
                let before = ring.norm_sq();
                let pair = ring.contract_pair(site).unwrap();
                let gated = pair.apply_gate(GateMatrix::<f64>::cnot().matrix().as_slice());
                let (l, r) = split_pair(&gated, rank).unwrap();
                let mut cores = ring.cores().to_vec();
                cores[site] = l;
                cores[(site + 1) % n] = r;
                let split_ring = TensorRing::from_cores(cores).unwrap();
                let rejoined = split_ring.contract_pair(site).unwrap();
                pair_increase = pair_increase.max(rejoined.frobenius_norm() - gated.frobenius_norm());
                let after = split_ring.norm_sq();
                gates += 1;
                if after > before * (1.0 + 1e-12) {
                    increases += 1;
                    worst_ratio = worst_ratio.max(after / before);
                }
            }
        }
    }
    let ok_single = single < 1e-12;
    let ok_trunc = increases == 0;
    let ok_sum = exhaustive < 1e-10;
    outcome(
        ok_single && ok_trunc && ok_sum,
        format!(
            "single-qubit norm drift {single:.2e}; ring norm_sq grew after truncation in {increases}/{gates} \
             two-qubit splits (worst x{worst_ratio:.3}, pair Frobenius growth {pair_increase:.2e}); \
             sum |amp|^2 vs norm_sq {exhaustive:.2e} for N <= 10"
        ),
    )
}

fn determinism() -> Outcome {
    let cfg = match shipped_config("iris.toml", 11) {
        Ok(c) => c,
        Err(e) => return outcome(false, e),
    };
    let split = prepare_data(&cfg).unwrap();
    let a = run_training(&cfg, &split, false).unwrap().metrics.to_csv(false);
    let b = run_training(&cfg, &split, false).unwrap().metrics.to_csv(false);
    let split2 = prepare_data(&cfg).unwrap();
    let c = run_training(&cfg, &split2, false).unwrap().metrics.to_csv(false);
    outcome(a == b && b == c, format!("{} metric bytes, repeated runs identical: {}", a.len(), a == b && b == c))
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 8] = [
        ("oracle equivalence at full rank", oracle_equivalence),
        ("gradient fidelity", gradient_fidelity),
        ("iris reproduction", iris_reproduction),
        ("mnist 0/1 at desk scale", mnist_binary),
        ("ring parameter counts", parameter_counts),
        ("linear scaling and storage", linear_scaling),
        ("conservation", conservation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!("[{}] {}. {name}: {}", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
