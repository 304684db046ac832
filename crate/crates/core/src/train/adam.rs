use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self { m: vec![T::zero(); len], v: vec![T::zero(); len], t: 0 }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Real>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, config: &AdamConfig) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::DimensionMismatch { expected: params.len(), got: grads.len().min(state.m.len()) });
    }
    state.t += 1;
    let (b1, b2) = (T::lit(config.beta1), T::lit(config.beta2));
    let lr = T::lit(config.learning_rate);
    let eps = T::lit(config.eps);
    let t = state.t as i32;
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (T::one() - b1) * g;
        state.v[i] = b2 * state.v[i] + (T::one() - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = vec![0.3, -1.2, 2.0];
        let orig = p.clone();
        let mut st = AdamState::new(3);
        for _ in 0..25 {
            adam_step(&mut p, &[0.0; 3], &mut st, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, orig);
    }

    #[test]
    fn first_step_closed_form() {
        let cfg = AdamConfig { learning_rate: 0.01, ..Default::default() };
        let g: [f64; 3] = [0.5, -2.0, 1e-9];
        let mut p = vec![0.0; 3];
        adam_step(&mut p, &g, &mut AdamState::new(3), &cfg).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            let want = -0.01 * gi / (gi.abs() + 1e-8);
            assert!((pi - want).abs() < 1e-12);
        }
    }

    #[test]
    fn converges_on_quadratic() {
        let cfg = AdamConfig { learning_rate: 0.35, ..Default::default() };
        let mut p: Vec<f64> = vec![0.0];
        let mut st = AdamState::new(1);
        for _ in 0..100 {
            let g = 2.0 * (p[0] - 3.0);
            adam_step(&mut p, &[g], &mut st, &cfg).unwrap();
        }
        assert!((p[0] - 3.0).abs() < 0.01, "{}", p[0]);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![0.0; 2];
        assert!(adam_step(&mut p, &[1.0], &mut AdamState::new(2), &AdamConfig::default()).is_err());
    }
}
