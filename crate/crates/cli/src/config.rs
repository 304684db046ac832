//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 0
//! out_dir = "runs/iris"
//!
//! [dataset]
//! kind = "iris"            # iris | mnist | features
//! path = "data/iris.csv"
//! feature_dim = 4
//! split_ratio = 0.8
//!
//! [circuit]
//! num_qubits = 4
//! num_layers = 1
//! rank = 4
//! wrap_cnot = true
//! readout_states = ["0001", "0010", "0100"]
//!
//! [train]
//! learning_rate = 0.001
//! batch_size = 4
//! epochs = 50
//! loss = "sigmoid-cross-entropy"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trvqc::circuit::{default_readout, CircuitSpec};
use trvqc::train::{LossKind, TrainConfig};
use trvqc::BasisState;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("invalid field `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

fn field(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Iris,
    Mnist,
    /// CSV with `f0,…,f{k-1},label` columns.
    Features,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    None,
    Pca,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Iris or feature CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// MNIST training images and labels (IDX).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// Separate MNIST test files. Without them the training files are split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<PathBuf>,
    /// MNIST digits to keep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<u8>,
    pub feature_dim: usize,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
    /// Keep a seeded random subset of this many training samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_limit: Option<usize>,
    /// Defaults to PCA for MNIST and none otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduce: Option<Reduction>,
    /// Min-max scale features onto `[0, π]` with training statistics.
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn default_ratio() -> f64 {
    0.8
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    pub num_qubits: usize,
    pub num_layers: usize,
    pub rank: usize,
    #[serde(default = "yes")]
    pub wrap_cnot: bool,
    #[serde(default)]
    pub hadamard_encoding: bool,
    /// Bitstrings, one per class. Defaults to `0…0`/`1…1` for two classes and
    /// one-hot states otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub readout_states: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default = "default_loss")]
    pub loss: String,
    #[serde(default = "default_betas")]
    pub adam_betas: [f64; 2],
    #[serde(default = "default_eps")]
    pub adam_eps: f64,
}

fn default_loss() -> String {
    LossKind::SigmoidCrossEntropy.name().to_string()
}

fn default_betas() -> [f64; 2] {
    [0.9, 0.999]
}

fn default_eps() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub circuit: CircuitConfig,
    pub train: TrainSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Relative dataset paths are resolved
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            cfg.dataset.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.dataset;
        let c = &self.circuit;
        match d.kind {
            DatasetKind::Iris | DatasetKind::Features if d.path.is_none() => {
                return Err(field("dataset.path", "required for this dataset kind"));
            }
            DatasetKind::Mnist => {
                if d.images.is_none() {
                    return Err(field("dataset.images", "required for mnist"));
                }
                if d.labels.is_none() {
                    return Err(field("dataset.labels", "required for mnist"));
                }
                if d.test_images.is_some() != d.test_labels.is_some() {
                    return Err(field("dataset.test_labels", "test_images and test_labels go together"));
                }
                if d.classes.len() < 2 {
                    return Err(field("dataset.classes", "list at least two digits"));
                }
                if d.classes.iter().any(|&x| x > 9) {
                    return Err(field("dataset.classes", "digits are 0..=9"));
                }
            }
            _ => {}
        }
        if d.feature_dim == 0 {
            return Err(field("dataset.feature_dim", "must be at least 1"));
        }
        if !(d.split_ratio > 0.0 && d.split_ratio < 1.0) {
            return Err(field("dataset.split_ratio", format!("must lie in (0, 1), got {}", d.split_ratio)));
        }
        if d.kind == DatasetKind::Iris && d.feature_dim != 4 && self.reduction() == Reduction::None {
            return Err(field("dataset.feature_dim", "iris has 4 features; set reduce = \"pca\" to change it"));
        }
        if c.num_qubits != d.feature_dim {
            return Err(field(
                "circuit.num_qubits",
                format!("must equal dataset.feature_dim ({}), got {}", d.feature_dim, c.num_qubits),
            ));
        }
        if c.num_qubits < 2 {
            return Err(field("circuit.num_qubits", "need at least 2 qubits"));
        }
        if c.rank == 0 {
            return Err(field("circuit.rank", "must be at least 1"));
        }
        let classes = self.class_count();
        if let Some(k) = classes {
            if !c.readout_states.is_empty() && c.readout_states.len() != k {
                return Err(field(
                    "circuit.readout_states",
                    format!("{} states listed for {k} classes", c.readout_states.len()),
                ));
            }
        }
        for s in &c.readout_states {
            let b: BasisState = s.parse().map_err(|e| field("circuit.readout_states", format!("'{s}': {e}")))?;
            if b.len() != c.num_qubits {
                return Err(field("circuit.readout_states", format!("'{s}' has {} bits, circuit has {} qubits", b.len(), c.num_qubits)));
            }
        }
        let t = &self.train;
        if !(t.learning_rate >= 0.0 && t.learning_rate.is_finite()) {
            return Err(field("train.learning_rate", "must be a finite number >= 0"));
        }
        if t.batch_size == 0 {
            return Err(field("train.batch_size", "must be at least 1"));
        }
        if t.epochs == 0 {
            return Err(field("train.epochs", "must be at least 1"));
        }
        t.loss.parse::<LossKind>().map_err(|e| field("train.loss", e.to_string()))?;
        if !t.adam_betas.iter().all(|b| (0.0..1.0).contains(b)) {
            return Err(field("train.adam_betas", "both betas must lie in [0, 1)"));
        }
        if !(t.adam_eps > 0.0) {
            return Err(field("train.adam_eps", "must be positive"));
        }
        Ok(())
    }

    /// Number of classes when it is known without reading the data.
    pub fn class_count(&self) -> Option<usize> {
        match self.dataset.kind {
            DatasetKind::Iris => Some(3),
            DatasetKind::Mnist => {
                let mut c = self.dataset.classes.clone();
                c.sort_unstable();
                c.dedup();
                Some(c.len())
            }
            DatasetKind::Features => None,
        }
    }

    pub fn reduction(&self) -> Reduction {
        self.dataset.reduce.unwrap_or(match self.dataset.kind {
            DatasetKind::Mnist => Reduction::Pca,
            _ => Reduction::None,
        })
    }

    pub fn loss_kind(&self) -> LossKind {
        self.train.loss.parse().expect("validated")
    }

    pub fn train_config(&self, parallel: bool) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            seed: self.seed,
            loss_kind: self.loss_kind(),
            adam_betas: (self.train.adam_betas[0], self.train.adam_betas[1]),
            adam_eps: self.train.adam_eps,
            parallel,
        }
    }

    /// Circuit for `num_classes` classes.
    pub fn circuit_spec(&self, num_classes: usize) -> Result<CircuitSpec, ConfigError> {
        let c = &self.circuit;
        let states = if c.readout_states.is_empty() {
            default_readout(c.num_qubits, num_classes).map_err(|e| field("circuit.readout_states", e.to_string()))?
        } else {
            if c.readout_states.len() != num_classes {
                return Err(field(
                    "circuit.readout_states",
                    format!("{} states listed for {num_classes} classes", c.readout_states.len()),
                ));
            }
            c.readout_states.iter().map(|s| s.parse().expect("validated")).collect()
        };
        CircuitSpec::new(c.num_qubits, c.num_layers, states)
            .and_then(|s| s.with_wrap(c.wrap_cnot))
            .map(|s| s.with_hadamard_encoding(c.hadamard_encoding))
            .map_err(|e| field("circuit", e.to_string()))
    }
}

impl DatasetConfig {
    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.path, &mut self.images, &mut self.labels, &mut self.test_images, &mut self.test_labels]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}
