use nalgebra::{DMatrix, SymmetricEigen};

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Principal components fitted on one dataset. Components are unit rows,
/// sorted by decreasing variance, each signed so its largest-magnitude entry
/// is positive.
#[derive(Clone, Debug)]
pub struct Pca {
    mean: Vec<f64>,
    components: DMatrix<f64>,
    explained_variance_ratio: Vec<f64>,
}

impl Pca {
    pub fn fit<T: Real>(data: &Dataset<T>, target_dim: usize) -> Result<Self> {
        let d = data.num_features();
        let n = data.len();
        if target_dim == 0 || target_dim > d {
            return Err(Error::InvalidArgument(format!("PCA target dimension {target_dim} not in 1..={d}")));
        }
        if n < 2 {
            return Err(Error::Data("PCA needs at least 2 samples".into()));
        }
        let x = DMatrix::from_fn(n, d, |i, j| data.sample(i)[j].to_f64().unwrap_or(f64::NAN));
        let mean: Vec<f64> = (0..d).map(|j| x.column(j).mean()).collect();
        let mut centred = x;
        for j in 0..d {
            centred.column_mut(j).add_scalar_mut(-mean[j]);
        }
        let cov = centred.transpose() * &centred / (n as f64 - 1.0);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        let mut components = DMatrix::zeros(target_dim, d);
        let mut ratio = Vec::with_capacity(target_dim);
        for (r, &k) in order.iter().take(target_dim).enumerate() {
            let v = eig.eigenvectors.column(k);
            let pivot = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for j in 0..d {
                components[(r, j)] = sign * v[j];
            }
            ratio.push(if total > 0.0 { eig.eigenvalues[k].max(0.0) / total } else { 0.0 });
        }
        Ok(Self { mean, components, explained_variance_ratio: ratio })
    }

    pub fn target_dim(&self) -> usize {
        self.components.nrows()
    }

    /// `target_dim × num_features`, orthonormal rows.
    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn explained_variance_ratio(&self) -> &[f64] {
        &self.explained_variance_ratio
    }

    pub fn transform<T: Real>(&self, data: &Dataset<T>) -> Result<Dataset<T>> {
        let d = self.mean.len();
        if data.num_features() != d {
            return Err(Error::DimensionMismatch { expected: d, got: data.num_features() });
        }
        let k = self.target_dim();
        let mut out = Vec::with_capacity(data.len() * k);
        let mut centred = vec![0.0; d];
        for i in 0..data.len() {
            for (c, (x, m)) in centred.iter_mut().zip(data.sample(i).iter().zip(&self.mean)) {
                *c = x.to_f64().unwrap_or(f64::NAN) - m;
            }
            for r in 0..k {
                let dot: f64 = self.components.row(r).iter().zip(&centred).map(|(a, b)| a * b).sum();
                out.push(T::lit(dot));
            }
        }
        Ok(data.with_features(out, k))
    }
}

/// Fits PCA on the training split only and projects both splits.
pub fn reduce_features<T: Real>(split: &Split<T>, target_dim: usize) -> Result<(Split<T>, Pca)> {
    let pca = Pca::fit(&split.train, target_dim)?;
    let out = Split {
        train: pca.transform(&split.train)?,
        test: pca.transform(&split.test)?,
        ratio: split.ratio,
        seed: split.seed,
    };
    Ok((out, pca))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn classes() -> Vec<String> {
        vec!["x".into()]
    }

    #[test]
    fn rank_two_data_is_fully_explained() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (u, v) = ([1.0, 2.0, 0.0, -1.0, 0.5], [0.0, 1.0, 1.0, 3.0, -2.0]);
        let mut feats = Vec::new();
        for _ in 0..40 {
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            feats.extend((0..5).map(|j| 3.0 + a * u[j] + b * v[j]));
        }
        let ds = Dataset::new(feats, 5, vec![0; 40], classes()).unwrap();
        let pca = Pca::fit(&ds, 2).unwrap();
        let total: f64 = pca.explained_variance_ratio().iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
        let c = pca.components();
        let gram = c * c.transpose();
        assert!((gram - DMatrix::identity(2, 2)).abs().max() < 1e-10);
    }

    #[test]
    fn full_dimension_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let feats: Vec<f64> = (0..30 * 3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let ds = Dataset::new(feats, 3, vec![0; 30], classes()).unwrap();
        let pca = Pca::fit(&ds, 3).unwrap();
        let z = pca.transform(&ds).unwrap();
        // x = mean + Cᵀ z
        for i in 0..ds.len() {
            for j in 0..3 {
                let back: f64 = pca.mean[j] + (0..3).map(|r| pca.components()[(r, j)] * z.sample(i)[r]).sum::<f64>();
                assert!((back - ds.sample(i)[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_bad_dimension() {
        let ds = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], 2, vec![0, 0], classes()).unwrap();
        assert!(Pca::fit(&ds, 0).is_err());
        assert!(Pca::fit(&ds, 3).is_err());
    }
}
