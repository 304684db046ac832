//! The variational circuit: Rx feature encoding, `d` layers of CNOT entangler
//! followed by per-qubit Rx·Ry·Rz rotations, and basis-state readout.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gates::{apply_single_in_place, apply_two_in_place, resolve_pair, GateMatrix};
use crate::ring::{BasisState, TensorRing};
use crate::scalar::Real;

/// Circuit layout. Gate angles live in a separate [`ParamVector`].
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitSpec {
    num_qubits: usize,
    num_layers: usize,
    entangler: Vec<(usize, usize)>,
    readout_states: Vec<BasisState>,
    hadamard_encoding: bool,
}

/// CNOT pairs `(0,1), (1,2), …, (N−2,N−1)` plus `(N−1,0)` when `wrap` is set.
pub fn chain_entangler(num_qubits: usize, wrap: bool) -> Vec<(usize, usize)> {
    let mut pairs: Vec<_> = (0..num_qubits.saturating_sub(1)).map(|q| (q, q + 1)).collect();
    if wrap && num_qubits >= 2 {
        pairs.push((num_qubits - 1, 0));
    }
    pairs
}

/// `0…0` and `1…1` for two classes, otherwise one-hot states counted from the
/// last qubit: `0…01`, `0…10`, `0…100`, ….
pub fn default_readout(num_qubits: usize, num_classes: usize) -> Result<Vec<BasisState>> {
    match num_classes {
        0 | 1 => Err(Error::InvalidArgument(format!("need at least 2 classes, got {num_classes}"))),
        2 => Ok(vec![BasisState::zeros(num_qubits), BasisState::new(vec![1; num_qubits])?]),
        k if k > num_qubits => Err(Error::InvalidArgument(format!(
            "one-hot readout of {k} classes needs at least {k} qubits, got {num_qubits}"
        ))),
        k => Ok((0..k).map(|c| BasisState::from_index(1 << c, num_qubits)).collect()),
    }
}

impl CircuitSpec {
    /// Cyclic entangler with wrap-around and Rx-only encoding.
    pub fn new(num_qubits: usize, num_layers: usize, readout_states: Vec<BasisState>) -> Result<Self> {
        let spec = Self {
            num_qubits,
            num_layers,
            entangler: chain_entangler(num_qubits, true),
            readout_states,
            hadamard_encoding: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_entangler(mut self, entangler: Vec<(usize, usize)>) -> Result<Self> {
        self.entangler = entangler;
        self.validate()?;
        Ok(self)
    }

    pub fn with_wrap(self, wrap: bool) -> Result<Self> {
        let n = self.num_qubits;
        self.with_entangler(chain_entangler(n, wrap))
    }

    /// Puts a Hadamard on every qubit before the Rx encoding.
    pub fn with_hadamard_encoding(mut self, on: bool) -> Self {
        self.hadamard_encoding = on;
        self
    }

    pub fn with_readout(mut self, states: Vec<BasisState>) -> Result<Self> {
        self.readout_states = states;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_qubits;
        if n < 2 {
            return Err(Error::InvalidArgument(format!("circuit needs at least 2 qubits, got {n}")));
        }
        for &(c, t) in &self.entangler {
            for q in [c, t] {
                if q >= n {
                    return Err(Error::QubitOutOfRange { qubit: q, num_qubits: n });
                }
            }
            if c == t || (t != (c + 1) % n && c != (t + 1) % n) {
                return Err(Error::NonAdjacent(c, t));
            }
        }
        if self.readout_states.is_empty() {
            return Err(Error::InvalidArgument("no readout states".into()));
        }
        for (i, s) in self.readout_states.iter().enumerate() {
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.len() });
            }
            if self.readout_states[..i].contains(s) {
                return Err(Error::InvalidArgument(format!("readout state {s} listed twice")));
            }
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn entangler(&self) -> &[(usize, usize)] {
        &self.entangler
    }

    pub fn readout_states(&self) -> &[BasisState] {
        &self.readout_states
    }

    pub fn num_classes(&self) -> usize {
        self.readout_states.len()
    }

    pub fn hadamard_encoding(&self) -> bool {
        self.hadamard_encoding
    }

    /// `3 · N · d`.
    pub fn num_params(&self) -> usize {
        3 * self.num_qubits * self.num_layers
    }

    /// Index of the angle for `axis` (0 = x, 1 = y, 2 = z) on `qubit` in `layer`.
    pub fn param_index(&self, layer: usize, qubit: usize, axis: usize) -> usize {
        (layer * self.num_qubits + qubit) * 3 + axis
    }

    /// Flat gate list for the given angles and features, in application order.
    pub fn program<T: Real>(&self, params: &ParamVector<T>, features: &FeatureVector<T>) -> Result<Vec<Op<T>>> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch { expected: self.num_params(), got: params.len() });
        }
        let mut ops = self.encoding_program(features)?;
        let cnot = GateMatrix::cnot();
        for layer in 0..self.num_layers {
            for &(c, t) in &self.entangler {
                let (site, gate) = resolve_pair(self.num_qubits, c, t, &cnot)?;
                ops.push(Op::Two { site, gate });
            }
            for q in 0..self.num_qubits {
                for axis in 0..3 {
                    let index = self.param_index(layer, q, axis);
                    let theta = params.values[index];
                    let gate = match axis {
                        0 => GateMatrix::rx(theta)?,
                        1 => GateMatrix::ry(theta)?,
                        _ => GateMatrix::rz(theta)?,
                    };
                    ops.push(Op::Single { qubit: q, gate, param: Some(index) });
                }
            }
        }
        Ok(ops)
    }

    fn encoding_program<T: Real>(&self, features: &FeatureVector<T>) -> Result<Vec<Op<T>>> {
        if features.len() != self.num_qubits {
            return Err(Error::DimensionMismatch { expected: self.num_qubits, got: features.len() });
        }
        let mut ops = Vec::new();
        if self.hadamard_encoding {
            for q in 0..self.num_qubits {
                ops.push(Op::Single { qubit: q, gate: GateMatrix::hadamard(), param: None });
            }
        }
        for (q, &psi) in features.values.iter().enumerate() {
            ops.push(Op::Single { qubit: q, gate: GateMatrix::rx(psi)?, param: None });
        }
        Ok(ops)
    }
}

/// One gate of a compiled circuit. Two-qubit gates are already resolved to the
/// ring site they act on, see [`resolve_pair`].
#[derive(Clone, Debug)]
pub enum Op<T> {
    Single { qubit: usize, gate: GateMatrix<T>, param: Option<usize> },
    Two { site: usize, gate: GateMatrix<T> },
}

/// Trainable angles in radians, layer-major, then qubit, then (θx, θy, θz).
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector<T> {
    values: Vec<T>,
}

impl<T: Real> ParamVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i}")));
        }
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![T::zero(); len] }
    }

    /// Uniform in `[−π, π]`.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self { values: (0..len).map(|_| T::lit(rng.gen_range(-PI..=PI))).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }
}

/// Encoded features ψ, one angle per qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector<T> {
    values: Vec<T>,
}

impl<T: Real> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature {i}")));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

pub(crate) fn run_op<T: Real>(ring: &mut TensorRing<T>, op: &Op<T>) -> Result<()> {
    match op {
        Op::Single { qubit, gate, .. } => apply_single_in_place(ring, *qubit, gate),
        Op::Two { site, gate } => apply_two_in_place(ring, *site, gate).map(drop),
    }
}

/// `|0…0⟩` at rank χ with the encoding layer applied.
pub fn encode<T: Real>(spec: &CircuitSpec, features: &FeatureVector<T>, rank: usize) -> Result<TensorRing<T>> {
    let mut ring = TensorRing::zero_state(spec.num_qubits, rank)?;
    for op in spec.encoding_program(features)? {
        run_op(&mut ring, &op)?;
    }
    Ok(ring)
}

/// Runs the whole circuit on a rank-χ ring.
pub fn forward<T: Real>(
    spec: &CircuitSpec,
    params: &ParamVector<T>,
    features: &FeatureVector<T>,
    rank: usize,
) -> Result<TensorRing<T>> {
    let mut ring = TensorRing::zero_state(spec.num_qubits, rank)?;
    for op in spec.program(params, features)? {
        run_op(&mut ring, &op)?;
    }
    Ok(ring)
}

/// `p_c = |⟨s_c|ψ⟩|² / ⟨ψ|ψ⟩` for each readout state.
pub fn readout<T: Real>(ring: &TensorRing<T>, states: &[BasisState]) -> Result<Vec<T>> {
    let z = ring.norm_sq();
    if !(z > T::zero()) {
        return Err(Error::NonFinite(format!("state norm {z}")));
    }
    states.iter().map(|s| Ok(ring.amplitude(s)?.norm_sqr() / z)).collect()
}
