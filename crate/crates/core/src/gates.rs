//! Gate matrices and their application to a [`TensorRing`].

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::ring::{split_pair_recorded, PairSplit, TensorRing};
use crate::scalar::{cone, creal, czero, Real, C};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateKind<T> {
    Rx(T),
    Ry(T),
    Rz(T),
    Hadamard,
    Cnot,
    Rot(T, T, T),
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateMatrix<T> {
    kind: GateKind<T>,
    matrix: CMatrix<T>,
}

fn check_angle<T: Real>(name: &str, x: T) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{name} angle")))
    }
}

fn m2<T: Real>(a: C<T>, b: C<T>, c: C<T>, d: C<T>) -> CMatrix<T> {
    CMatrix::from_vec(2, 2, vec![a, b, c, d])
}

impl<T: Real> GateMatrix<T> {
    pub fn rx(theta: T) -> Result<Self> {
        check_angle("rx", theta)?;
        let h = theta / T::lit(2.0);
        let (c, s) = (creal(h.cos()), C::new(T::zero(), -h.sin()));
        Ok(Self { kind: GateKind::Rx(theta), matrix: m2(c, s, s, c) })
    }

    pub fn ry(theta: T) -> Result<Self> {
        check_angle("ry", theta)?;
        let h = theta / T::lit(2.0);
        let (c, s) = (h.cos(), h.sin());
        Ok(Self { kind: GateKind::Ry(theta), matrix: m2(creal(c), creal(-s), creal(s), creal(c)) })
    }

    pub fn rz(theta: T) -> Result<Self> {
        check_angle("rz", theta)?;
        let h = theta / T::lit(2.0);
        let m = m2(C::from_polar(T::one(), -h), czero(), czero(), C::from_polar(T::one(), h));
        Ok(Self { kind: GateKind::Rz(theta), matrix: m })
    }

    pub fn hadamard() -> Self {
        let r = creal(T::FRAC_1_SQRT_2());
        Self { kind: GateKind::Hadamard, matrix: m2(r, r, r, -r) }
    }

    /// Control on the first qubit of the pair: swaps `|10⟩` and `|11⟩`.
    pub fn cnot() -> Self {
        let (o, z) = (cone(), czero());
        #[rustfmt::skip]
        let data = vec![
            o, z, z, z,
            z, o, z, z,
            z, z, z, o,
            z, z, o, z,
        ];
        Self { kind: GateKind::Cnot, matrix: CMatrix::from_vec(4, 4, data) }
    }

    /// General single-qubit rotation
    /// `[[cos(α/2), -e^{iγ} sin(α/2)], [e^{iβ} sin(α/2), e^{i(β+γ)} cos(α/2)]]`.
    pub fn rot(alpha: T, beta: T, gamma: T) -> Result<Self> {
        check_angle("rot alpha", alpha)?;
        check_angle("rot beta", beta)?;
        check_angle("rot gamma", gamma)?;
        let h = alpha / T::lit(2.0);
        let (c, s) = (h.cos(), h.sin());
        let m = m2(
            creal(c),
            -C::from_polar(s, gamma),
            C::from_polar(s, beta),
            C::from_polar(c, beta + gamma),
        );
        Ok(Self { kind: GateKind::Rot(alpha, beta, gamma), matrix: m })
    }

    /// Wraps an arbitrary 2×2 or 4×4 unitary.
    pub fn custom(matrix: CMatrix<T>) -> Result<Self> {
        let n = matrix.rows();
        if matrix.cols() != n || (n != 2 && n != 4) {
            return Err(Error::GateShape { expected: 2, got: n });
        }
        if matrix.as_slice().iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("gate entry".into()));
        }
        let gate = Self { kind: GateKind::Custom, matrix };
        let defect = gate.unitarity_defect();
        if defect > T::lit(1e-8) {
            return Err(Error::InvalidArgument(format!("gate is not unitary (defect {defect})")));
        }
        Ok(gate)
    }

    pub fn kind(&self) -> GateKind<T> {
        self.kind
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            GateKind::Rx(_) => "rx",
            GateKind::Ry(_) => "ry",
            GateKind::Rz(_) => "rz",
            GateKind::Hadamard => "h",
            GateKind::Cnot => "cnot",
            GateKind::Rot(..) => "rot",
            GateKind::Custom => "custom",
        }
    }

    pub fn params(&self) -> Vec<T> {
        match self.kind {
            GateKind::Rx(t) | GateKind::Ry(t) | GateKind::Rz(t) => vec![t],
            GateKind::Rot(a, b, c) => vec![a, b, c],
            _ => Vec::new(),
        }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `max |UᴴU − I|`.
    pub fn unitarity_defect(&self) -> T {
        self.matrix.orthonormality_defect()
    }

    /// Derivative of the matrix with respect to its single angle, for the
    /// one-parameter rotations.
    pub fn angle_derivative(&self) -> Option<CMatrix<T>> {
        let half = T::lit(0.5);
        match self.kind {
            GateKind::Rx(t) => {
                let h = t * half;
                let d = creal(-h.sin() * half);
                let o = C::new(T::zero(), -h.cos() * half);
                Some(m2(d, o, o, d))
            }
            GateKind::Ry(t) => {
                let h = t * half;
                let (ds, dc) = (h.cos() * half, -h.sin() * half);
                Some(m2(creal(dc), creal(-ds), creal(ds), creal(dc)))
            }
            GateKind::Rz(t) => {
                let h = t * half;
                let a = C::from_polar(T::one(), -h) * C::new(T::zero(), -half);
                let b = C::from_polar(T::one(), h) * C::new(T::zero(), half);
                Some(m2(a, czero(), czero(), b))
            }
            _ => None,
        }
    }

    /// The same two-qubit gate with the roles of the two qubits exchanged
    /// (`SWAP · U · SWAP`).
    pub fn swapped(&self) -> Result<Self> {
        if self.dim() != 4 {
            return Err(Error::GateShape { expected: 4, got: self.dim() });
        }
        let perm = |k: usize| ((k & 1) << 1) | (k >> 1);
        let m = CMatrix::from_fn(4, 4, |r, c| self.matrix[(perm(r), perm(c))]);
        Ok(Self { kind: GateKind::Custom, matrix: m })
    }

    pub(crate) fn as_array2(&self) -> [C<T>; 4] {
        let s = self.matrix.as_slice();
        [s[0], s[1], s[2], s[3]]
    }
}

/// Applies a one-qubit gate in place; only core `qubit` changes.
pub fn apply_single_in_place<T: Real>(ring: &mut TensorRing<T>, qubit: usize, gate: &GateMatrix<T>) -> Result<()> {
    ring.check_qubit(qubit)?;
    if gate.dim() != 2 {
        return Err(Error::GateShape { expected: 2, got: gate.dim() });
    }
    let updated = ring.core(qubit).contract_physical(&gate.as_array2());
    ring.set_core(qubit, updated);
    Ok(())
}

pub fn apply_single<T: Real>(ring: &TensorRing<T>, qubit: usize, gate: &GateMatrix<T>) -> Result<TensorRing<T>> {
    let mut out = ring.clone();
    apply_single_in_place(&mut out, qubit, gate)?;
    Ok(out)
}

/// Outcome of a two-qubit gate: the split record and the factor the left core
/// was multiplied by to restore the pair's Frobenius norm after truncation.
#[derive(Clone, Debug)]
pub struct TwoQubitRecord<T> {
    pub split: PairSplit<T>,
    pub rescale: T,
}

/// Applies a 4×4 gate to qubits `site` and `(site + 1) mod N` in place:
/// contract the pair, apply the gate, split by SVD keeping χ values, and when
/// weight was discarded scale the left core so the pair keeps its norm.
pub fn apply_two_in_place<T: Real>(
    ring: &mut TensorRing<T>,
    site: usize,
    gate: &GateMatrix<T>,
) -> Result<TwoQubitRecord<T>> {
    ring.check_qubit(site)?;
    if gate.dim() != 4 {
        return Err(Error::GateShape { expected: 4, got: gate.dim() });
    }
    let pair = ring.contract_pair(site)?.apply_gate(gate.matrix().as_slice());
    let (mut left, right, split) = split_pair_recorded(&pair, ring.rank())?;
    let (all, kept) = split.norms();
    let rescale = if kept < all && kept > T::zero() { all / kept } else { T::one() };
    if rescale != T::one() {
        left.scale(rescale);
    }
    let n = ring.num_qubits();
    ring.set_core(site, left);
    ring.set_core((site + 1) % n, right);
    Ok(TwoQubitRecord { split, rescale })
}

pub fn apply_two<T: Real>(ring: &TensorRing<T>, site: usize, gate: &GateMatrix<T>) -> Result<TensorRing<T>> {
    let mut out = ring.clone();
    apply_two_in_place(&mut out, site, gate)?;
    Ok(out)
}

/// Resolves an ordered qubit pair `(first, second)` to the ring site and the
/// gate to apply there. `gate` acts with `first` as its leading qubit; when the
/// pair runs against the ring direction the gate is conjugated by SWAP.
pub fn resolve_pair<T: Real>(
    num_qubits: usize,
    first: usize,
    second: usize,
    gate: &GateMatrix<T>,
) -> Result<(usize, GateMatrix<T>)> {
    for q in [first, second] {
        if q >= num_qubits {
            return Err(Error::QubitOutOfRange { qubit: q, num_qubits });
        }
    }
    if first != second && second == (first + 1) % num_qubits {
        Ok((first, gate.clone()))
    } else if first != second && first == (second + 1) % num_qubits {
        Ok((second, gate.swapped()?))
    } else {
        Err(Error::NonAdjacent(first, second))
    }
}

/// Two-qubit gate on an arbitrary ordered pair of cyclic neighbours.
pub fn apply_two_on<T: Real>(
    ring: &TensorRing<T>,
    first: usize,
    second: usize,
    gate: &GateMatrix<T>,
) -> Result<TensorRing<T>> {
    if gate.dim() != 4 {
        return Err(Error::GateShape { expected: 4, got: gate.dim() });
    }
    let (site, g) = resolve_pair(ring.num_qubits(), first, second, gate)?;
    apply_two(ring, site, &g)
}
