//! Losses, Adam, the minibatch training loop and evaluation.

mod adam;
mod loss;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{loss_logsigmoid_nll, loss_sigmoid_ce, LossKind};

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::{backward, GradVector, Tape};
use crate::circuit::{forward, readout, CircuitSpec, FeatureVector, ParamVector};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss_kind: LossKind,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    /// Spreads per-sample work over the rayon pool. Results do not depend on
    /// it: per-sample gradients are always summed in sample order.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 4,
            epochs: 50,
            seed: 0,
            loss_kind: LossKind::SigmoidCrossEntropy,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            parallel: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return Err(Error::InvalidArgument(format!("adam betas must lie in [0, 1), got ({b1}, {b2})")));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::InvalidArgument("adam_eps must be > 0".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.adam_betas.0, beta2: self.adam_betas.1, eps: self.adam_eps }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training loss over the epoch's minibatches, before each update.
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub epochs: Vec<EpochMetrics>,
}

impl Metrics {
    /// `epoch,loss,train_acc,test_acc,seconds`. Without timing the last column
    /// is dropped so the text is reproducible byte for byte.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut out = String::from(if with_timing { "epoch,loss,train_acc,test_acc,seconds\n" } else { "epoch,loss,train_acc,test_acc\n" });
        for e in &self.epochs {
            let _ = write!(out, "{},{:.17e},{:.17e},{:.17e}", e.epoch, e.loss, e.train_acc, e.test_acc);
            if with_timing {
                let _ = write!(out, ",{:.6}", e.seconds);
            }
            out.push('\n');
        }
        out
    }

    pub fn final_test_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.test_acc)
    }
}

fn features_of<T: Real>(data: &Dataset<T>, i: usize) -> Result<FeatureVector<T>> {
    FeatureVector::new(data.sample(i).to_vec())
}

fn check_dataset<T: Real>(spec: &CircuitSpec, data: &Dataset<T>, what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Data(format!("{what} set is empty")));
    }
    if data.num_features() != spec.num_qubits() {
        return Err(Error::DimensionMismatch { expected: spec.num_qubits(), got: data.num_features() });
    }
    if data.class_count() > spec.num_classes() {
        return Err(Error::Data(format!(
            "{what} set has {} classes but the circuit reads out {}",
            data.class_count(),
            spec.num_classes()
        )));
    }
    Ok(())
}

/// Loss and parameter gradient for one sample.
pub fn sample_loss_grad<T: Real>(
    spec: &CircuitSpec,
    params: &ParamVector<T>,
    features: &FeatureVector<T>,
    label: usize,
    rank: usize,
    loss: LossKind,
) -> Result<(T, GradVector<T>)> {
    let tape = Tape::record(spec, params, features, rank)?;
    let p = tape.readout()?;
    let (value, dp) = loss.eval(&p, label)?;
    Ok((value, backward(&tape, &dp)?))
}

/// Index of the largest readout value, first one on ties.
pub fn predict<T: Real>(spec: &CircuitSpec, params: &ParamVector<T>, features: &FeatureVector<T>, rank: usize) -> Result<usize> {
    let ring = forward(spec, params, features, rank)?;
    let p = readout(&ring, spec.readout_states())?;
    Ok(p.iter().enumerate().fold(0, |best, (i, v)| if *v > p[best] { i } else { best }))
}

fn predictions<T: Real>(spec: &CircuitSpec, params: &ParamVector<T>, data: &Dataset<T>, rank: usize, parallel: bool) -> Result<Vec<usize>> {
    let run = |i: usize| predict(spec, params, &features_of(data, i)?, rank);
    if parallel {
        (0..data.len()).into_par_iter().map(run).collect()
    } else {
        (0..data.len()).map(run).collect()
    }
}

/// `counts[true][predicted]` over `spec.num_classes()` classes.
pub fn confusion_matrix<T: Real>(spec: &CircuitSpec, params: &ParamVector<T>, data: &Dataset<T>, rank: usize) -> Result<Vec<Vec<usize>>> {
    check_dataset(spec, data, "evaluation")?;
    let k = spec.num_classes();
    let mut counts = vec![vec![0; k]; k];
    for (i, p) in predictions(spec, params, data, rank, true)?.into_iter().enumerate() {
        counts[data.label(i)][p] += 1;
    }
    Ok(counts)
}

/// Fraction of samples whose argmax readout equals the label.
pub fn evaluate<T: Real>(spec: &CircuitSpec, params: &ParamVector<T>, data: &Dataset<T>, rank: usize) -> Result<f64> {
    evaluate_with(spec, params, data, rank, true)
}

fn evaluate_with<T: Real>(spec: &CircuitSpec, params: &ParamVector<T>, data: &Dataset<T>, rank: usize, parallel: bool) -> Result<f64> {
    check_dataset(spec, data, "evaluation")?;
    let preds = predictions(spec, params, data, rank, parallel)?;
    let hits = preds.iter().enumerate().filter(|(i, p)| data.label(*i) == **p).count();
    Ok(hits as f64 / data.len() as f64)
}

/// Initial angles for `config.seed`, uniform in `[−π, π]`.
pub fn initial_params<T: Real>(spec: &CircuitSpec, seed: u64) -> ParamVector<T> {
    ParamVector::random(spec.num_params(), &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Minibatch Adam on the mean per-sample loss. Training order is reshuffled
/// each epoch from a stream seeded by `config.seed`.
pub fn train<T: Real>(
    spec: &CircuitSpec,
    train_set: &Dataset<T>,
    test_set: &Dataset<T>,
    config: &TrainConfig,
    rank: usize,
) -> Result<(ParamVector<T>, Metrics)> {
    config.validate()?;
    check_dataset(spec, train_set, "training")?;
    check_dataset(spec, test_set, "test")?;
    let mut params = initial_params::<T>(spec, config.seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut state = AdamState::new(params.len());
    let adam = config.adam();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut metrics = Metrics::default();

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let work = |&i: &usize| -> Result<(T, GradVector<T>)> {
                sample_loss_grad(spec, &params, &features_of(train_set, i)?, train_set.label(i), rank, config.loss_kind)
            };
            let results: Vec<Result<(T, GradVector<T>)>> =
                if config.parallel { batch.par_iter().map(work).collect() } else { batch.iter().map(work).collect() };
            let mut grad = GradVector::zeros(params.len());
            let mut batch_loss = T::zero();
            for r in results {
                let (l, g) = r?;
                batch_loss += l;
                grad.accumulate(&g);
            }
            let inv = T::one() / T::lit(batch.len() as f64);
            let mean_grad: Vec<T> = grad.values().iter().map(|g| *g * inv).collect();
            adam_step(params.values_mut(), &mean_grad, &mut state, &adam)?;
            loss_sum += (batch_loss * inv).to_f64().unwrap_or(f64::NAN) * batch.len() as f64;
        }
        let train_acc = evaluate_with(spec, &params, train_set, rank, config.parallel)?;
        let test_acc = evaluate_with(spec, &params, test_set, rank, config.parallel)?;
        metrics.epochs.push(EpochMetrics {
            epoch,
            loss: loss_sum / train_set.len() as f64,
            train_acc,
            test_acc,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok((params, metrics))
}
