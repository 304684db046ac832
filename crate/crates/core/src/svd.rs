//! Complex singular value decomposition by one-sided (Hestenes) Jacobi
//! rotations, plus truncation to the leading singular triplets.
//!
//! Jacobi is used because it is accurate to working precision for the small
//! `2χ × 2χ` matrices produced by two-qubit gates, and because its output is a
//! deterministic function of the input once the ordering and phase conventions
//! below are applied:
//!
//! * singular values are sorted descending, ties keep the original column order;
//! * every left singular vector is rotated so that its largest-magnitude entry
//!   (first one on ties) is real and positive, the right vector gets the same
//!   phase so `u σ vᴴ` is unchanged.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{czero, Real, C};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U · diag(s) · Vᴴ`.
///
/// For `m ≥ n`, `u` is `m × n` and `v` is `n × n` and unitary. Wide input gives
/// the transposed shapes.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub u: CMatrix<T>,
    pub s: Vec<T>,
    pub v: CMatrix<T>,
}

/// Leading `k` singular triplets: `left` is `m × k`, `right` is `k × n` (rows are
/// conjugated right singular vectors).
#[derive(Clone, Debug)]
pub struct SvdFactors<T> {
    pub left: CMatrix<T>,
    pub singular_values: Vec<T>,
    pub right: CMatrix<T>,
}

impl<T: Real> SvdFactors<T> {
    /// `left · diag(s) · right`.
    pub fn reconstruct(&self) -> CMatrix<T> {
        let k = self.singular_values.len();
        let scaled = CMatrix::from_fn(self.left.rows(), k, |r, c| {
            self.left[(r, c)] * self.singular_values[c]
        });
        scaled.matmul(&self.right)
    }
}

impl<T: Real> Svd<T> {
    /// Keeps the `keep` largest singular values. Asking for more than exist
    /// returns all of them.
    pub fn truncate(&self, keep: usize) -> SvdFactors<T> {
        let k = keep.min(self.s.len());
        let m = self.u.rows();
        let n = self.v.rows();
        SvdFactors {
            left: CMatrix::from_fn(m, k, |r, c| self.u[(r, c)]),
            singular_values: self.s[..k].to_vec(),
            right: CMatrix::from_fn(k, n, |r, c| self.v[(c, r)].conj()),
        }
    }

    /// Frobenius norm of the part discarded by keeping `keep` singular values.
    pub fn discarded_norm(&self, keep: usize) -> T {
        self.s.iter().skip(keep).map(|x| *x * *x).sum::<T>().sqrt()
    }
}

/// Full thin SVD of `a`. Wide matrices are handled through `aᴴ`.
pub fn svd<T: Real>(a: &CMatrix<T>) -> Result<Svd<T>> {
    if a.as_slice().iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("SVD input".into()));
    }
    if a.rows() < a.cols() {
        let t = jacobi(&a.adjoint())?;
        // aᴴ = U S Vᴴ  =>  a = V S Uᴴ, so `u` comes out square and `v` thin
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }
    jacobi(a)
}

/// Truncated SVD keeping the `keep` largest singular values.
pub fn truncated_svd<T: Real>(a: &CMatrix<T>, keep: usize) -> Result<SvdFactors<T>> {
    if keep == 0 {
        return Err(Error::InvalidArgument("truncated_svd needs keep >= 1".into()));
    }
    Ok(svd(a)?.truncate(keep))
}

fn jacobi<T: Real>(a: &CMatrix<T>) -> Result<Svd<T>> {
    let m = a.rows();
    let n = a.cols();
    // Column-major working copies: cols[j] is column j of A·V.
    let mut w: Vec<Vec<C<T>>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<C<T>>> = (0..n)
        .map(|j| {
            let mut e = vec![czero(); n];
            e[j] = C::new(T::one(), T::zero());
            e
        })
        .collect();

    let tol = T::epsilon() * T::lit(n.max(1) as f64);
    // Pairs whose overlap is below this are numerically orthogonal whatever
    // their relative size; without it columns at the rounding floor never settle.
    let anorm = a.frobenius_norm();
    let floor = (T::epsilon() * anorm) * (T::epsilon() * anorm);
    let mut converged = n < 2;
    let mut residue = T::zero();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        residue = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: T = w[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: T = w[q].iter().map(|z| z.norm_sqr()).sum();
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                let gamma: C<T> = w[p].iter().zip(&w[q]).map(|(x, y)| x.conj() * *y).sum();
                let g = gamma.norm();
                let scale = alpha.sqrt() * beta.sqrt();
                if g <= tol * scale || g <= floor {
                    continue;
                }
                residue = residue.max(g / scale);
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (T::lit(2.0) * g);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                // [x, y] <- [x, y] · [[c, s·e^{iφ}], [-s·e^{-iφ}, c]]
                let sp = phase * s;
                let spc = phase.conj() * s;
                rotate(&mut w[..], p, q, c, sp, spc);
                rotate(&mut v[..], p, q, c, sp, spc);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNotConverged {
            sweeps: MAX_SWEEPS,
            residue: residue.to_f64().unwrap_or(f64::NAN),
        });
    }

    let norms: Vec<T> = w.iter().map(|col| col.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal values keep column order
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    let smax = order.first().map(|&i| norms[i]).unwrap_or_else(T::zero);
    let null = smax * T::lit(m.max(n) as f64) * T::epsilon();

    let mut u_cols: Vec<Vec<C<T>>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<C<T>>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (rank, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        v_cols.push(v[j].clone());
        if norms[j] > null && norms[j] > T::zero() {
            let inv = T::one() / norms[j];
            u_cols.push(w[j].iter().map(|z| *z * inv).collect());
        } else {
            u_cols.push(Vec::new());
            pending.push(rank);
        }
    }
    complete_basis(&mut u_cols, &pending, m);

    for (uc, vc) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        let mut best = 0;
        let mut best_mag = T::zero();
        for (i, z) in uc.iter().enumerate() {
            let mag = z.norm();
            if mag > best_mag {
                best = i;
                best_mag = mag;
            }
        }
        if best_mag > T::zero() {
            let ph = (uc[best] / best_mag).conj();
            uc.iter_mut().for_each(|z| *z *= ph);
            vc.iter_mut().for_each(|z| *z *= ph);
        }
    }

    let u = CMatrix::from_fn(m, n, |r, c| u_cols[c][r]);
    let vm = CMatrix::from_fn(n, n, |r, c| v_cols[c][r]);
    Ok(Svd { u, s, v: vm })
}

fn rotate<T: Real>(cols: &mut [Vec<C<T>>], p: usize, q: usize, c: T, sp: C<T>, spc: C<T>) {
    let (left, right) = cols.split_at_mut(q);
    let x = &mut left[p];
    let y = &mut right[0];
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let a = *xi;
        let b = *yi;
        *xi = a * c - b * spc;
        *yi = a * sp + b * c;
    }
}

/// Fills the empty columns listed in `pending` with unit vectors orthogonal to
/// every other column. Each slot takes the standard basis vector with the
/// largest component outside the current span, then two Gram-Schmidt passes.
fn complete_basis<T: Real>(cols: &mut [Vec<C<T>>], pending: &[usize], m: usize) {
    for &slot in pending {
        let mut outside = vec![T::one(); m];
        for (idx, other) in cols.iter().enumerate() {
            if idx == slot || other.is_empty() {
                continue;
            }
            for (r, z) in outside.iter_mut().zip(other) {
                *r -= z.norm_sqr();
            }
        }
        let pick = (0..m).fold(0, |best, i| if outside[i] > outside[best] { i } else { best });
        let mut e = vec![czero(); m];
        e[pick] = C::new(T::one(), T::zero());
        for _ in 0..2 {
            for (idx, other) in cols.iter().enumerate() {
                if idx == slot || other.is_empty() {
                    continue;
                }
                let proj: C<T> = other.iter().zip(&e).map(|(o, x)| o.conj() * *x).sum();
                for (x, o) in e.iter_mut().zip(other) {
                    *x -= proj * *o;
                }
            }
        }
        let inv = T::one() / e.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        cols[slot] = e.into_iter().map(|z| z * inv).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::C;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(rows, cols, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn identity_keep_two() {
        let id = CMatrix::<f64>::identity(4);
        let f = truncated_svd(&id, 2).unwrap();
        assert_eq!(f.singular_values, vec![1.0, 1.0]);
        let err = f.reconstruct().sub(&id).frobenius_norm();
        assert!((err - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rank_one_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<C<f64>> = (0..4).map(|_| C::new(rng.gen(), rng.gen())).collect();
        let v: Vec<C<f64>> = (0..4).map(|_| C::new(rng.gen(), rng.gen())).collect();
        let a = CMatrix::from_fn(4, 4, |r, c| u[r] * v[c].conj());
        let f = truncated_svd(&a, 2).unwrap();
        assert!(f.singular_values[1] < 1e-12);
        assert!(f.reconstruct().max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn factors_are_orthonormal_and_sorted() {
        for seed in 0..10 {
            let a = random(8, 8, seed);
            let d = svd(&a).unwrap();
            assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
            assert!(d.u.orthonormality_defect() < 1e-10);
            assert!(d.v.orthonormality_defect() < 1e-10);
            let full = d.truncate(8);
            assert!(full.reconstruct().max_abs_diff(&a) < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_left_factor_completed() {
        // Only the first row is nonzero: rank one, seven null directions.
        let mut a = CMatrix::<f64>::zeros(8, 8);
        for c in 0..8 {
            a[(0, c)] = C::new(c as f64 + 1.0, 0.5);
        }
        let d = svd(&a).unwrap();
        assert!(d.u.orthonormality_defect() < 1e-10);
        assert!(d.v.orthonormality_defect() < 1e-10);
        assert!(d.truncate(1).reconstruct().max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn null_direction_spread_over_every_coordinate() {
        // (I − wwᴴ)·B with w the uniform unit vector: the missing left
        // direction has equal weight on all 32 coordinates.
        let n = 32;
        let w = 1.0 / (n as f64).sqrt();
        let proj = CMatrix::from_fn(n, n, |r, c| C::new(if r == c { 1.0 } else { 0.0 } - w * w, 0.0));
        let a = proj.matmul(&random(n, n, 5));
        let d = svd(&a).unwrap();
        assert!(d.u.orthonormality_defect() < 1e-10);
        assert!(d.s[n - 1] < 1e-12);
        assert!(d.truncate(n - 1).reconstruct().max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn phase_convention_largest_entry_positive() {
        let d = svd(&random(6, 6, 11)).unwrap();
        for c in 0..6 {
            let col = d.u.column(c);
            let (mut best, mut mag) = (0, 0.0);
            for (i, z) in col.iter().enumerate() {
                if z.norm() > mag {
                    best = i;
                    mag = z.norm();
                }
            }
            assert!(col[best].im.abs() < 1e-14 && col[best].re > 0.0);
        }
    }

    #[test]
    fn deterministic_bitwise() {
        let a = random(8, 8, 5);
        let x = svd(&a).unwrap();
        let y = svd(&a).unwrap();
        assert_eq!(x.s, y.s);
        assert_eq!(x.u, y.u);
        assert_eq!(x.v, y.v);
    }

    #[test]
    fn wide_matrix() {
        let a = random(3, 6, 9);
        let d = svd(&a).unwrap();
        assert_eq!(d.s.len(), 3);
        assert!(d.truncate(3).reconstruct().max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn single_precision() {
        let a = random(6, 6, 2);
        let a32 = CMatrix::<f32>::from_fn(6, 6, |r, c| C::new(a[(r, c)].re as f32, a[(r, c)].im as f32));
        let d = svd(&a32).unwrap();
        assert!(d.truncate(6).reconstruct().max_abs_diff(&a32) < 1e-5);
    }

    #[test]
    fn rejects_nan_and_zero_keep() {
        let mut a = CMatrix::<f64>::identity(2);
        assert!(truncated_svd(&a, 0).is_err());
        a[(0, 1)] = C::new(f64::NAN, 0.0);
        assert!(matches!(svd(&a), Err(Error::NonFinite(_))));
    }
}
