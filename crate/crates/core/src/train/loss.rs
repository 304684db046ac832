use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Sigmoid of each readout, renormalised to a distribution, then cross-entropy.
    SigmoidCrossEntropy,
    /// Log-sigmoid scores fed to a softmax negative log-likelihood.
    LogSigmoidNll,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::SigmoidCrossEntropy => "sigmoid-cross-entropy",
            LossKind::LogSigmoidNll => "logsigmoid-nll",
        }
    }

    pub fn eval<T: Real>(self, readout: &[T], label: usize) -> Result<(T, Vec<T>)> {
        match self {
            LossKind::SigmoidCrossEntropy => loss_sigmoid_ce(readout, label),
            LossKind::LogSigmoidNll => loss_logsigmoid_nll(readout, label),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid-cross-entropy" => Ok(LossKind::SigmoidCrossEntropy),
            "logsigmoid-nll" => Ok(LossKind::LogSigmoidNll),
            other => Err(Error::InvalidArgument(format!(
                "unknown loss '{other}', expected sigmoid-cross-entropy or logsigmoid-nll"
            ))),
        }
    }
}

fn check<T: Real>(readout: &[T], label: usize) -> Result<()> {
    if label >= readout.len() {
        return Err(Error::InvalidArgument(format!("label {label} for {} readout values", readout.len())));
    }
    if let Some(i) = readout.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("readout {i}")));
    }
    Ok(())
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `log σ(x) = −softplus(−x)`.
fn log_sigmoid<T: Real>(x: T) -> T {
    -((-x).max(T::zero()) + (-x.abs()).exp().ln_1p())
}

/// `q = σ(x)`, `q̂ = q / Σq`, loss `−log max(q̂_label, 1e-12)`.
pub fn loss_sigmoid_ce<T: Real>(readout: &[T], label: usize) -> Result<(T, Vec<T>)> {
    check(readout, label)?;
    let q: Vec<T> = readout.iter().map(|&x| sigmoid(x)).collect();
    let total: T = q.iter().copied().sum();
    let p = q[label] / total;
    let floor = T::lit(1e-12);
    if p < floor {
        return Ok((-floor.ln(), vec![T::zero(); readout.len()]));
    }
    let grad = q
        .iter()
        .enumerate()
        .map(|(c, &qc)| {
            let own = if c == label { -(T::one() - qc) } else { T::zero() };
            own + qc * (T::one() - qc) / total
        })
        .collect();
    Ok((-p.ln(), grad))
}

/// `s = log σ(x)`, loss `−s_label + log Σ exp(s)`.
pub fn loss_logsigmoid_nll<T: Real>(readout: &[T], label: usize) -> Result<(T, Vec<T>)> {
    check(readout, label)?;
    let s: Vec<T> = readout.iter().map(|&x| log_sigmoid(x)).collect();
    let top = s.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = s.iter().map(|&v| (v - top).exp()).sum();
    let lse = top + sum.ln();
    let grad = s
        .iter()
        .zip(readout)
        .enumerate()
        .map(|(c, (&sc, &x))| {
            let soft = (sc - lse).exp();
            let delta = if c == label { T::one() } else { T::zero() };
            (soft - delta) * sigmoid(-x)
        })
        .collect();
    Ok((lse - s[label], grad))
}
