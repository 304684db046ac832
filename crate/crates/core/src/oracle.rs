//! Dense statevector simulation, the exact reference for small circuits.
//! Qubit 0 is the most significant bit of the amplitude index.

use crate::circuit::{CircuitSpec, FeatureVector, ParamVector};
use crate::error::{Error, Result};
use crate::gates::GateMatrix;
use crate::linalg::CMatrix;
use crate::ring::BasisState;
use crate::scalar::{cone, czero, Real, C};

pub const MAX_QUBITS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T> {
    num_qubits: usize,
    amps: Vec<C<T>>,
}

impl<T: Real> StateVector<T> {
    /// `|0…0⟩`.
    pub fn zero_state(num_qubits: usize) -> Result<Self> {
        Self::basis(&BasisState::zeros(num_qubits))
    }

    pub fn basis(bits: &BasisState) -> Result<Self> {
        let n = bits.len();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!("statevector supports 1..={MAX_QUBITS} qubits, got {n}")));
        }
        let mut amps = vec![czero(); 1 << n];
        amps[bits.index()] = cone();
        Ok(Self { num_qubits: n, amps })
    }

    pub fn from_amplitudes(amps: Vec<C<T>>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() || len > 1 << MAX_QUBITS {
            return Err(Error::InvalidArgument(format!("amplitude count {len} is not 2^N with 1 <= N <= {MAX_QUBITS}")));
        }
        Ok(Self { num_qubits: len.trailing_zeros() as usize, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn amplitude(&self, bits: &BasisState) -> Result<C<T>> {
        if bits.len() != self.num_qubits {
            return Err(Error::DimensionMismatch { expected: self.num_qubits, got: bits.len() });
        }
        Ok(self.amps[bits.index()])
    }

    pub fn norm_sq(&self) -> T {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    fn bit_of(&self, q: usize) -> usize {
        self.num_qubits - 1 - q
    }

    fn check(&self, q: usize) -> Result<()> {
        if q < self.num_qubits {
            Ok(())
        } else {
            Err(Error::QubitOutOfRange { qubit: q, num_qubits: self.num_qubits })
        }
    }

    pub fn apply_single(&mut self, qubit: usize, gate: &CMatrix<T>) -> Result<()> {
        self.check(qubit)?;
        if gate.rows() != 2 || gate.cols() != 2 {
            return Err(Error::GateShape { expected: 2, got: gate.rows() });
        }
        let mask = 1 << self.bit_of(qubit);
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | mask]);
                self.amps[i] = gate[(0, 0)] * a0 + gate[(0, 1)] * a1;
                self.amps[i | mask] = gate[(1, 0)] * a0 + gate[(1, 1)] * a1;
            }
        }
        Ok(())
    }

    /// Applies a 4×4 gate whose row index is `2·bit(first) + bit(second)`. The
    /// qubits need not be neighbours.
    pub fn apply_two(&mut self, first: usize, second: usize, gate: &CMatrix<T>) -> Result<()> {
        self.check(first)?;
        self.check(second)?;
        if first == second {
            return Err(Error::InvalidArgument(format!("two-qubit gate on qubit {first} twice")));
        }
        if gate.rows() != 4 || gate.cols() != 4 {
            return Err(Error::GateShape { expected: 4, got: gate.rows() });
        }
        let (mf, ms) = (1 << self.bit_of(first), 1 << self.bit_of(second));
        for base in 0..self.amps.len() {
            if base & (mf | ms) != 0 {
                continue;
            }
            let idx = [base, base | ms, base | mf, base | mf | ms];
            let old = idx.map(|k| self.amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.amps[k] = (0..4).fold(czero(), |acc, c| acc + gate[(r, c)] * old[c]);
            }
        }
        Ok(())
    }

    /// `|amplitude|²` per requested state.
    pub fn probabilities(&self, states: &[BasisState]) -> Result<Vec<T>> {
        states.iter().map(|s| Ok(self.amplitude(s)?.norm_sqr())).collect()
    }
}

/// Dense simulation of the same circuit the tensor-ring forward pass runs.
pub fn sv_forward<T: Real>(
    spec: &CircuitSpec,
    params: &ParamVector<T>,
    features: &FeatureVector<T>,
) -> Result<StateVector<T>> {
    let n = spec.num_qubits();
    if n > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!("statevector oracle is limited to {MAX_QUBITS} qubits, got {n}")));
    }
    if features.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: features.len() });
    }
    if params.len() != spec.num_params() {
        return Err(Error::DimensionMismatch { expected: spec.num_params(), got: params.len() });
    }
    let mut sv = StateVector::zero_state(n)?;
    if spec.hadamard_encoding() {
        let h = GateMatrix::hadamard();
        for q in 0..n {
            sv.apply_single(q, h.matrix())?;
        }
    }
    for (q, &psi) in features.values().iter().enumerate() {
        sv.apply_single(q, GateMatrix::rx(psi)?.matrix())?;
    }
    let cnot = GateMatrix::cnot();
    let theta = params.values();
    for layer in 0..spec.num_layers() {
        for &(c, t) in spec.entangler() {
            sv.apply_two(c, t, cnot.matrix())?;
        }
        for q in 0..n {
            let base = (layer * n + q) * 3;
            sv.apply_single(q, GateMatrix::rx(theta[base])?.matrix())?;
            sv.apply_single(q, GateMatrix::ry(theta[base + 1])?.matrix())?;
            sv.apply_single(q, GateMatrix::rz(theta[base + 2])?.matrix())?;
        }
    }
    Ok(sv)
}

pub fn sv_probabilities<T: Real>(state: &StateVector<T>, readout_states: &[BasisState]) -> Result<Vec<T>> {
    state.probabilities(readout_states)
}
