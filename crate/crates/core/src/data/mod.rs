//! Datasets, loaders and preprocessing: Iris CSV, MNIST IDX, precomputed
//! feature CSVs, PCA, min-max scaling and seeded train/test splits.

mod csv_io;
mod idx;
mod pca;

pub use csv_io::{load_feature_csv, load_iris, write_feature_csv};
pub use idx::{load_mnist_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IdxImages};
pub use pca::{reduce_features, Pca};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major feature matrix with one class index per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    features: Vec<T>,
    num_features: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl<T: Real> Dataset<T> {
    /// `features.len()` must be `labels.len() · num_features`.
    pub fn new(features: Vec<T>, num_features: usize, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if features.len() != labels.len() * num_features {
            return Err(Error::DimensionMismatch { expected: labels.len() * num_features, got: features.len() });
        }
        if let Some(i) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("feature {} of sample {}", i % num_features.max(1), i / num_features.max(1))));
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, l)| **l >= class_names.len()) {
            return Err(Error::Data(format!("label {l} of sample {i} is outside {} classes", class_names.len())));
        }
        Ok(Self { features, num_features, labels, class_names })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn sample(&self, i: usize) -> &[T] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.num_features);
        for &i in indices {
            features.extend_from_slice(self.sample(i));
        }
        Self {
            features,
            num_features: self.num_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// First `n` rows (all of them if there are fewer).
    pub fn take(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub(crate) fn with_features(&self, features: Vec<T>, num_features: usize) -> Self {
        Self { features, num_features, labels: self.labels.clone(), class_names: self.class_names.clone() }
    }
}

/// Disjoint train and test partitions of one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Split<T> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
    pub ratio: f64,
    pub seed: u64,
}

/// Seeded shuffle, then the first `round(ratio · n)` rows go to train.
pub fn split<T: Real>(dataset: &Dataset<T>, ratio: f64, seed: u64) -> Result<Split<T>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio must be in (0, 1], got {ratio}")));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ratio * dataset.len() as f64).round() as usize;
    if n_train == 0 {
        return Err(Error::Data(format!("ratio {ratio} leaves the training set empty")));
    }
    if n_train >= dataset.len() {
        return Err(Error::Data(format!("ratio {ratio} leaves the test set empty")));
    }
    Ok(Split {
        train: dataset.subset(&order[..n_train]),
        test: dataset.subset(&order[n_train..]),
        ratio,
        seed,
    })
}

/// Per-feature affine map from training minima/maxima onto `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMax<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
    pub lo: T,
    pub hi: T,
}

impl<T: Real> MinMax<T> {
    pub fn fit(train: &Dataset<T>, lo: T, hi: T) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Data("cannot fit min-max scaling on an empty dataset".into()));
        }
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!("range [{lo}, {hi}] is empty")));
        }
        let d = train.num_features();
        let mut min = vec![T::infinity(); d];
        let mut max = vec![T::neg_infinity(); d];
        for i in 0..train.len() {
            for (j, &x) in train.sample(i).iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Ok(Self { min, max, lo, hi })
    }

    /// Maps every feature, clamping to `[lo, hi]`. Constant features map to `lo`.
    pub fn apply(&self, data: &Dataset<T>) -> Result<Dataset<T>> {
        let d = self.min.len();
        if data.num_features() != d {
            return Err(Error::DimensionMismatch { expected: d, got: data.num_features() });
        }
        let span = self.hi - self.lo;
        let out = data
            .features()
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let j = k % d;
                let width = self.max[j] - self.min[j];
                if width > T::zero() {
                    (self.lo + (x - self.min[j]) / width * span).max(self.lo).min(self.hi)
                } else {
                    self.lo
                }
            })
            .collect();
        Ok(data.with_features(out, d))
    }
}

/// Fits on the training split and applies to both.
pub fn normalize_minmax<T: Real>(split: &Split<T>, lo: T, hi: T) -> Result<Split<T>> {
    let scaler = MinMax::fit(&split.train, lo, hi)?;
    Ok(Split { train: scaler.apply(&split.train)?, test: scaler.apply(&split.test)?, ratio: split.ratio, seed: split.seed })
}
