//! Tensor-ring representation of an N-qubit state.
//!
//! The state is a cyclic product of N rank-3 cores `M(k)` of shape `(χ, χ, 2)`:
//!
//! ```text
//! ⟨i_0 … i_{N-1}|φ⟩ = Tr[ M(0)[i_0] · M(1)[i_1] ⋯ M(N-1)[i_{N-1}] ]
//! ```
//!
//! where `M(k)[i]` is the `χ × χ` slice at physical index `i`. Every bond has the
//! same dimension χ. Qubit 0 is the most significant bit of a basis index.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{matmul_acc, matmul_into, CMatrix};
use crate::scalar::{cone, czero, is_finite, Real, C};
use crate::svd::{svd, Svd};

/// A computational basis state `|b_0 b_1 … b_{N-1}⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState(Vec<u8>);

impl BasisState {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|b| **b > 1) {
            return Err(Error::InvalidArgument(format!("bit value {b} is not 0 or 1")));
        }
        Ok(Self(bits))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// Basis state for `index` with qubit 0 as the most significant bit.
    pub fn from_index(index: usize, n: usize) -> Self {
        Self((0..n).map(|k| ((index >> (n - 1 - k)) & 1) as u8).collect())
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, b| (acc << 1) | *b as usize)
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Cyclic left rotation by `k`, matching [`TensorRing::rotated`].
    pub fn rotated(&self, k: usize) -> Self {
        let mut b = self.0.clone();
        if !b.is_empty() {
            let n = b.len();
            b.rotate_left(k % n);
        }
        Self(b)
    }
}

impl FromStr for BasisState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidArgument(format!("'{other}' in bitstring \"{s}\""))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self(bits))
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// One core `M(k)`, logically `(χ_left, χ_right, 2)`. Stored physical-major so
/// each slice `M(k)[i]` is a contiguous row-major `χ_left × χ_right` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreTensor<T> {
    left: usize,
    right: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CoreTensor<T> {
    pub fn zeros(left: usize, right: usize) -> Self {
        Self { left, right, data: vec![czero(); 2 * left * right] }
    }

    /// Builds a core from its two physical slices.
    pub fn from_slices(left: usize, right: usize, zero: &[C<T>], one: &[C<T>]) -> Result<Self> {
        let n = left * right;
        if zero.len() != n || one.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: zero.len().max(one.len()) });
        }
        let mut data = Vec::with_capacity(2 * n);
        data.extend_from_slice(zero);
        data.extend_from_slice(one);
        let core = Self { left, right, data };
        core.check_finite()?;
        Ok(core)
    }

    pub fn left_dim(&self) -> usize {
        self.left
    }

    pub fn right_dim(&self) -> usize {
        self.right
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, p: usize) -> C<T> {
        self.data[(p * self.left + a) * self.right + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, p: usize, z: C<T>) {
        self.data[(p * self.left + a) * self.right + b] = z;
    }

    pub fn slice(&self, p: usize) -> &[C<T>] {
        let n = self.left * self.right;
        &self.data[p * n..(p + 1) * n]
    }

    pub fn slice_mut(&mut self, p: usize) -> &mut [C<T>] {
        let n = self.left * self.right;
        &mut self.data[p * n..(p + 1) * n]
    }

    pub fn slice_matrix(&self, p: usize) -> CMatrix<T> {
        CMatrix::from_vec(self.left, self.right, self.slice(p).to_vec())
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn frobenius_norm_sq(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|z| is_finite(*z)) {
            Ok(())
        } else {
            Err(Error::NonFinite("core tensor entry".into()))
        }
    }

    /// `M'[i'] = Σ_i U[i', i] · M[i]` for a 2×2 matrix `u` given row-major.
    pub(crate) fn contract_physical(&self, u: &[C<T>; 4]) -> Self {
        let n = self.left * self.right;
        let mut out = Self::zeros(self.left, self.right);
        for p in 0..2 {
            let dst = &mut out.data[p * n..(p + 1) * n];
            for q in 0..2 {
                let w = u[p * 2 + q];
                if w == czero() {
                    continue;
                }
                for (d, s) in dst.iter_mut().zip(&self.data[q * n..(q + 1) * n]) {
                    *d += w * *s;
                }
            }
        }
        out
    }

    /// Transfer matrix `E = Σ_i M[i] ⊗ conj(M[i])`, rows `(α, α')`, cols `(β, β')`.
    pub fn transfer_matrix(&self) -> CMatrix<T> {
        let a = self.slice_matrix(0);
        let b = self.slice_matrix(1);
        a.kron(&a.conj()).add(&b.kron(&b.conj()))
    }
}

/// Two neighbouring cores contracted over their shared bond:
/// `T[a, c, i, j] = Σ_b M(n)[a, b, i] · M(n+1)[b, c, j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTensor<T> {
    left: usize,
    right: usize,
    // physical-major: slice (i, j) is a `left × right` matrix
    data: Vec<C<T>>,
}

impl<T: Real> PairTensor<T> {
    pub fn zeros(left: usize, right: usize) -> Self {
        Self { left, right, data: vec![czero(); 4 * left * right] }
    }

    pub fn left_dim(&self) -> usize {
        self.left
    }

    pub fn right_dim(&self) -> usize {
        self.right
    }

    #[inline]
    pub fn get(&self, a: usize, c: usize, i: usize, j: usize) -> C<T> {
        self.data[((i * 2 + j) * self.left + a) * self.right + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, c: usize, i: usize, j: usize, z: C<T>) {
        self.data[((i * 2 + j) * self.left + a) * self.right + c] = z;
    }

    pub fn slice(&self, i: usize, j: usize) -> &[C<T>] {
        let n = self.left * self.right;
        &self.data[(i * 2 + j) * n..(i * 2 + j + 1) * n]
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    /// `T'[.., i', j'] = Σ_{i,j} U[(i' j'), (i j)] · T[.., i, j]` for a row-major 4×4 `u`.
    pub fn apply_gate(&self, u: &[C<T>]) -> Self {
        assert_eq!(u.len(), 16, "two-qubit gate must be 4x4");
        let n = self.left * self.right;
        let mut out = Self::zeros(self.left, self.right);
        for row in 0..4 {
            let dst = &mut out.data[row * n..(row + 1) * n];
            for col in 0..4 {
                let w = u[row * 4 + col];
                if w == czero() {
                    continue;
                }
                for (d, s) in dst.iter_mut().zip(&self.data[col * n..(col + 1) * n]) {
                    *d += w * *s;
                }
            }
        }
        out
    }

    /// Matrix with rows `(i, a)` and columns `(j, c)`, physical index major.
    pub fn to_matrix(&self) -> CMatrix<T> {
        let (l, r) = (self.left, self.right);
        CMatrix::from_fn(2 * l, 2 * r, |row, col| self.get(row % l, col % r, row / l, col / r))
    }

    pub fn from_matrix(m: &CMatrix<T>, left: usize, right: usize) -> Self {
        assert_eq!((m.rows(), m.cols()), (2 * left, 2 * right));
        let mut t = Self::zeros(left, right);
        for i in 0..2 {
            for j in 0..2 {
                for a in 0..left {
                    for c in 0..right {
                        t.set(a, c, i, j, m[(i * left + a, j * right + c)]);
                    }
                }
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).map(|(a, b)| (*a - *b).norm()).fold(T::zero(), T::max)
    }
}

/// Everything a two-site split computed, kept for reverse-mode differentiation.
#[derive(Clone, Debug)]
pub struct PairSplit<T> {
    /// The `(2χ_l) × (2χ_r)` matrix that was decomposed.
    pub matrix: CMatrix<T>,
    pub svd: Svd<T>,
    /// Number of leading singular triplets that were kept and are nonzero.
    /// Kept triplets past this index had a numerically zero singular value and
    /// were written as exact zeros.
    pub active: usize,
    pub keep: usize,
}

impl<T: Real> PairSplit<T> {
    /// Frobenius norm of the pair before and after truncation.
    pub fn norms(&self) -> (T, T) {
        let all = self.svd.s.iter().map(|x| *x * *x).sum::<T>().sqrt();
        let kept = self.svd.s[..self.active].iter().map(|x| *x * *x).sum::<T>().sqrt();
        (all, kept)
    }

    pub fn is_truncating(&self) -> bool {
        let (all, kept) = self.norms();
        kept < all
    }
}

/// Splits a pair tensor back into two cores by truncated SVD. Singular values
/// are absorbed into the left core: `M'(n) = X·S'`, `M'(n+1) = Y`.
pub fn split_pair<T: Real>(t: &PairTensor<T>, keep: usize) -> Result<(CoreTensor<T>, CoreTensor<T>)> {
    let (l, r, _) = split_pair_recorded(t, keep)?;
    Ok((l, r))
}

pub(crate) fn split_pair_recorded<T: Real>(
    t: &PairTensor<T>,
    keep: usize,
) -> Result<(CoreTensor<T>, CoreTensor<T>, PairSplit<T>)> {
    if keep == 0 {
        return Err(Error::InvalidArgument("split_pair needs keep >= 1".into()));
    }
    let (lb, rb) = (t.left, t.right);
    let matrix = t.to_matrix();
    let dec = svd(&matrix)?;
    let available = dec.s.len().min(keep);
    let smax = dec.s.first().copied().unwrap_or_else(T::zero);
    let cutoff = smax * T::null_cutoff();
    let active = dec.s[..available].iter().take_while(|s| **s > cutoff && **s > T::zero()).count();

    let mut left = CoreTensor::zeros(lb, keep);
    let mut right = CoreTensor::zeros(keep, rb);
    for mu in 0..active {
        let s = dec.s[mu];
        for i in 0..2 {
            for a in 0..lb {
                left.set(a, mu, i, dec.u[(i * lb + a, mu)] * s);
            }
        }
        for j in 0..2 {
            for c in 0..rb {
                right.set(mu, c, j, dec.v[(j * rb + c, mu)].conj());
            }
        }
    }
    Ok((left, right, PairSplit { matrix, svd: dec, active, keep }))
}

/// The compressed state: N cores with uniform bond dimension χ.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorRing<T> {
    cores: Vec<CoreTensor<T>>,
    rank: usize,
}

impl<T: Real> TensorRing<T> {
    /// Ring for the basis state `|bits⟩`: core k has a single 1 at `(0, 0, bits[k])`.
    pub fn from_basis(bits: &BasisState, rank: usize) -> Result<Self> {
        let n = bits.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!("a ring needs at least 2 qubits, got {n}")));
        }
        if rank < 1 {
            return Err(Error::InvalidArgument("ring rank must be at least 1".into()));
        }
        let cores = bits
            .bits()
            .iter()
            .map(|&b| {
                let mut c = CoreTensor::zeros(rank, rank);
                c.set(0, 0, b as usize, cone());
                c
            })
            .collect();
        Ok(Self { cores, rank })
    }

    /// `|0…0⟩`.
    pub fn zero_state(num_qubits: usize, rank: usize) -> Result<Self> {
        Self::from_basis(&BasisState::zeros(num_qubits), rank)
    }

    pub fn from_cores(cores: Vec<CoreTensor<T>>) -> Result<Self> {
        if cores.len() < 2 {
            return Err(Error::InvalidArgument(format!("a ring needs at least 2 cores, got {}", cores.len())));
        }
        let rank = cores[0].left;
        for (k, c) in cores.iter().enumerate() {
            if c.left != rank || c.right != rank {
                return Err(Error::InvalidArgument(format!(
                    "core {k} has shape ({}, {}, 2), ring rank is {rank}",
                    c.left, c.right
                )));
            }
            c.check_finite()?;
        }
        Ok(Self { cores, rank })
    }

    pub fn num_qubits(&self) -> usize {
        self.cores.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn cores(&self) -> &[CoreTensor<T>] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &CoreTensor<T> {
        &self.cores[k]
    }

    pub(crate) fn set_core(&mut self, k: usize, core: CoreTensor<T>) {
        debug_assert_eq!((core.left, core.right), (self.rank, self.rank));
        self.cores[k] = core;
    }

    /// Number of complex entries stored: `N · χ² · 2`.
    pub fn parameter_count(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    /// Cores shifted so that new core `j` is old core `(j + k) mod N`.
    pub fn rotated(&self, k: usize) -> Self {
        let mut cores = self.cores.clone();
        let n = cores.len();
        cores.rotate_left(k % n);
        Self { cores, rank: self.rank }
    }

    pub(crate) fn check_qubit(&self, q: usize) -> Result<()> {
        if q < self.num_qubits() {
            Ok(())
        } else {
            Err(Error::QubitOutOfRange { qubit: q, num_qubits: self.num_qubits() })
        }
    }

    /// Coefficient of `|bits⟩`: cyclic trace of the selected slices, `O(N·χ³)`.
    pub fn amplitude(&self, bits: &BasisState) -> Result<C<T>> {
        if bits.len() != self.num_qubits() {
            return Err(Error::DimensionMismatch { expected: self.num_qubits(), got: bits.len() });
        }
        let chi = self.rank;
        let mut acc = self.cores[0].slice(bits.bits()[0] as usize).to_vec();
        let mut tmp = vec![czero(); chi * chi];
        for (core, &b) in self.cores.iter().zip(bits.bits()).skip(1) {
            matmul_into(&acc, core.slice(b as usize), &mut tmp, chi, chi, chi);
            std::mem::swap(&mut acc, &mut tmp);
        }
        Ok((0..chi).fold(czero(), |s, i| s + acc[i * chi + i]))
    }

    /// `⟨φ|φ⟩` by transfer-matrix contraction.
    ///
    /// The running product of transfer matrices is kept as χ² row blocks, each a
    /// `χ × χ` matrix `R`, updated as `R ← Σ_i M[i]ᵀ · R · conj(M[i])`, which is
    /// `O(χ⁵)` per core instead of the `O(χ⁶)` of forming `χ² × χ²` products.
    pub fn norm_sq(&self) -> T {
        let chi = self.rank;
        let n2 = chi * chi;
        // blocks[(a0, a0')] = R, R[α, α'] row-major
        let mut blocks: Vec<Vec<C<T>>> = (0..n2)
            .map(|r| {
                let mut m = vec![czero(); n2];
                m[r] = cone();
                m
            })
            .collect();
        let mut mt = vec![czero(); n2];
        let mut tmp = vec![czero(); n2];
        let mut next = vec![czero(); n2];
        for core in &self.cores {
            let conj: [Vec<C<T>>; 2] = [
                core.slice(0).iter().map(|z| z.conj()).collect(),
                core.slice(1).iter().map(|z| z.conj()).collect(),
            ];
            for block in blocks.iter_mut() {
                next.iter_mut().for_each(|z| *z = czero());
                for p in 0..2 {
                    let s = core.slice(p);
                    for a in 0..chi {
                        for b in 0..chi {
                            mt[b * chi + a] = s[a * chi + b];
                        }
                    }
                    matmul_into(&mt, block, &mut tmp, chi, chi, chi);
                    matmul_acc(&tmp, &conj[p], &mut next, chi, chi, chi);
                }
                block.copy_from_slice(&next);
            }
        }
        let mut z = czero::<T>();
        for a in 0..chi {
            for ap in 0..chi {
                z += blocks[a * chi + ap][a * chi + ap];
            }
        }
        z.re
    }

    /// Contracts core `site` with its cyclic successor over their shared bond.
    pub fn contract_pair(&self, site: usize) -> Result<PairTensor<T>> {
        self.check_qubit(site)?;
        let n = self.num_qubits();
        let a = &self.cores[site];
        let b = &self.cores[(site + 1) % n];
        let mut t = PairTensor::zeros(a.left, b.right);
        let blk = a.left * b.right;
        for i in 0..2 {
            for j in 0..2 {
                let idx = i * 2 + j;
                matmul_into(
                    a.slice(i),
                    b.slice(j),
                    &mut t.data[idx * blk..(idx + 1) * blk],
                    a.left,
                    a.right,
                    b.right,
                );
            }
        }
        Ok(t)
    }

    /// All `2^N` amplitudes, qubit 0 most significant. Exponential: tests only.
    pub fn to_statevector(&self) -> Result<Vec<C<T>>> {
        let n = self.num_qubits();
        if n > 20 {
            return Err(Error::InvalidArgument(format!("refusing to expand {n} qubits densely")));
        }
        (0..1usize << n).map(|i| self.amplitude(&BasisState::from_index(i, n))).collect()
    }
}

/// Functional form of [`TensorRing::from_basis`].
pub fn ring_from_basis<T: Real>(n: usize, bits: &BasisState, rank: usize) -> Result<TensorRing<T>> {
    if bits.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: bits.len() });
    }
    TensorRing::from_basis(bits, rank)
}
