//! Reverse-mode gradients of readout-based losses with respect to the circuit
//! angles.
//!
//! Complex intermediates carry adjoints `ḡ = ∂L/∂Re z + i ∂L/∂Im z`, so a
//! first-order change is `δL = Re Σ conj(ḡ) δz`. The SVD step differentiates
//! the kept subspace of the right singular vectors through the eigenproblem of
//! `AᴴA`; discarded directions are constants, rotations inside the kept or the
//! discarded block do not change the state and are dropped.

use crate::circuit::{readout, CircuitSpec, FeatureVector, Op, ParamVector};
use crate::error::{Error, Result};
use crate::gates::{apply_single_in_place, apply_two_in_place, GateMatrix};
use crate::linalg::CMatrix;
use crate::ring::{BasisState, CoreTensor, PairSplit, PairTensor, TensorRing};
use crate::scalar::{creal, czero, Real, C};

/// Gradient with the same layout as [`ParamVector`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradVector<T> {
    values: Vec<T>,
}

impl<T: Real> GradVector<T> {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![T::zero(); len] }
    }

    pub fn from_vec(values: Vec<T>) -> Self {
        Self { values }
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

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    /// `self += other`, element by element.
    pub fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += *b;
        }
    }
}

#[derive(Clone, Debug)]
enum Step<T> {
    Single { qubit: usize, gate: GateMatrix<T>, param: Option<usize>, input: CoreTensor<T> },
    Two { site: usize, gate: GateMatrix<T>, left_in: CoreTensor<T>, right_in: CoreTensor<T>, split: PairSplit<T>, rescale: T },
}

/// Forward pass with every intermediate needed by [`backward`].
#[derive(Clone, Debug)]
pub struct Tape<T> {
    num_qubits: usize,
    rank: usize,
    num_params: usize,
    readout_states: Vec<BasisState>,
    steps: Vec<Step<T>>,
    output: TensorRing<T>,
}

impl<T: Real> Tape<T> {
    pub fn record(spec: &CircuitSpec, params: &ParamVector<T>, features: &FeatureVector<T>, rank: usize) -> Result<Self> {
        let program = spec.program(params, features)?;
        let mut ring = TensorRing::zero_state(spec.num_qubits(), rank)?;
        let mut steps = Vec::with_capacity(program.len());
        for op in program {
            match op {
                Op::Single { qubit, gate, param } => {
                    let input = ring.core(qubit).clone();
                    apply_single_in_place(&mut ring, qubit, &gate)?;
                    steps.push(Step::Single { qubit, gate, param, input });
                }
                Op::Two { site, gate } => {
                    let left_in = ring.core(site).clone();
                    let right_in = ring.core((site + 1) % ring.num_qubits()).clone();
                    let rec = apply_two_in_place(&mut ring, site, &gate)?;
                    steps.push(Step::Two { site, gate, left_in, right_in, split: rec.split, rescale: rec.rescale });
                }
            }
        }
        Ok(Self {
            num_qubits: spec.num_qubits(),
            rank,
            num_params: spec.num_params(),
            readout_states: spec.readout_states().to_vec(),
            steps,
            output: ring,
        })
    }

    pub fn output(&self) -> &TensorRing<T> {
        &self.output
    }

    pub fn readout(&self) -> Result<Vec<T>> {
        readout(&self.output, &self.readout_states)
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Re-executes the recorded gates from `|0…0⟩`.
    pub fn replay(&self) -> Result<TensorRing<T>> {
        let mut ring = TensorRing::zero_state(self.num_qubits, self.rank)?;
        for step in &self.steps {
            match step {
                Step::Single { qubit, gate, .. } => apply_single_in_place(&mut ring, *qubit, gate)?,
                Step::Two { site, gate, .. } => apply_two_in_place(&mut ring, *site, gate).map(drop)?,
            }
        }
        Ok(ring)
    }
}

fn slice_mat<T: Real>(core: &CoreTensor<T>, p: usize) -> CMatrix<T> {
    core.slice_matrix(p)
}

fn add_into<T: Real>(dst: &mut [C<T>], src: &CMatrix<T>) {
    for (d, s) in dst.iter_mut().zip(src.as_slice()) {
        *d += *s;
    }
}

fn re_inner<T: Real>(a: &[C<T>], b: &[C<T>]) -> T {
    a.iter().zip(b).map(|(x, y)| (x.conj() * *y).re).sum()
}

fn adjoint4<T: Real>(u: &CMatrix<T>) -> Vec<C<T>> {
    u.adjoint().into_vec()
}

fn phys_adjoint<T: Real>(u: &CMatrix<T>) -> [C<T>; 4] {
    let a = u.adjoint();
    let s = a.as_slice();
    [s[0], s[1], s[2], s[3]]
}

fn phys_array<T: Real>(u: &CMatrix<T>) -> [C<T>; 4] {
    let s = u.as_slice();
    [s[0], s[1], s[2], s[3]]
}

/// Adjoints of every output core for a loss whose gradient with respect to the
/// readout probabilities is `loss_grad`.
fn readout_adjoint<T: Real>(ring: &TensorRing<T>, states: &[BasisState], loss_grad: &[T]) -> Result<Vec<CoreTensor<T>>> {
    let n = ring.num_qubits();
    let chi = ring.rank();
    let mut adj: Vec<CoreTensor<T>> = (0..n).map(|_| CoreTensor::zeros(chi, chi)).collect();
    let z = ring.norm_sq();
    let eye = CMatrix::identity(chi);
    let mut g_z = T::zero();

    for (state, &gp) in states.iter().zip(loss_grad) {
        let bits = state.bits();
        let mats: Vec<CMatrix<T>> = (0..n).map(|k| slice_mat(ring.core(k), bits[k] as usize)).collect();
        let mut pre = Vec::with_capacity(n + 1);
        pre.push(eye.clone());
        for m in &mats {
            let next = pre.last().unwrap().matmul(m);
            pre.push(next);
        }
        let mut suf = vec![eye.clone(); n + 1];
        for k in (0..n).rev() {
            suf[k] = mats[k].matmul(&suf[k + 1]);
        }
        let amp = pre[n].trace();
        g_z -= gp * amp.norm_sqr() / (z * z);
        let g_amp = amp * (T::lit(2.0) * gp / z);
        for k in 0..n {
            let env = suf[k + 1].matmul(&pre[k]).adjoint().scale(g_amp);
            add_into(adj[k].slice_mut(bits[k] as usize), &env);
        }
    }

    if g_z != T::zero() {
        let d = chi * chi;
        let eye2 = CMatrix::identity(d);
        let es: Vec<CMatrix<T>> = ring.cores().iter().map(|c| c.transfer_matrix()).collect();
        let mut pre = Vec::with_capacity(n + 1);
        pre.push(eye2.clone());
        for e in &es {
            let next = pre.last().unwrap().matmul(e);
            pre.push(next);
        }
        let mut suf = vec![eye2; n + 1];
        for k in (0..n).rev() {
            suf[k] = es[k].matmul(&suf[k + 1]);
        }
        let two_gz = creal(T::lit(2.0) * g_z);
        for k in 0..n {
            let env = suf[k + 1].matmul(&pre[k]);
            for p in 0..2 {
                let m = slice_mat(ring.core(k), p);
                let mut g = CMatrix::zeros(chi, chi);
                for ap in 0..chi {
                    for bp in 0..chi {
                        let mut acc: C<T> = czero();
                        for a in 0..chi {
                            for b in 0..chi {
                                acc += env[(b * chi + bp, a * chi + ap)] * m[(a, b)];
                            }
                        }
                        g[(ap, bp)] = acc * two_gz;
                    }
                }
                add_into(adj[k].slice_mut(p), &g);
            }
        }
    }
    Ok(adj)
}

/// Clamped `1 / gap`.
fn inverse_gap<T: Real>(gap: T) -> T {
    let floor = T::lit(1e-12);
    if gap.abs() < floor {
        let big = T::lit(1e12);
        if gap < T::zero() {
            -big
        } else {
            big
        }
    } else {
        T::one() / gap
    }
}

/// Adjoint of the decomposed pair matrix given adjoints of the two new cores.
fn split_adjoint<T: Real>(split: &PairSplit<T>, rescale: T, g_left: &CoreTensor<T>, g_right: &CoreTensor<T>) -> Result<CMatrix<T>> {
    let a = &split.matrix;
    let (m, n) = (a.rows(), a.cols());
    let v = &split.svd.v;
    if v.rows() != n || v.cols() != n {
        return Err(Error::InvalidArgument("split backward needs a square right factor".into()));
    }
    let k = split.active;
    let (lb, rb) = (m / 2, n / 2);
    let mut g_a = CMatrix::zeros(m, n);
    if k == 0 {
        return Ok(g_a);
    }
    let v_j = CMatrix::from_fn(n, k, |r, c| v[(r, c)]);
    let p_raw = a.matmul(&v_j);
    let g_p = CMatrix::from_fn(m, k, |r, mu| g_left.get(r % lb, mu, r / lb));
    let g_q = CMatrix::from_fn(k, n, |mu, col| g_right.get(mu, col % rb, col / rb));

    let g_praw = if rescale != T::one() {
        let a_norm = a.frobenius_norm();
        let p_norm = p_raw.frobenius_norm();
        let g_r = re_inner(g_p.as_slice(), p_raw.as_slice());
        let a_pi = p_raw.matmul(&v_j.adjoint());
        let c1 = creal(g_r / (a_norm * p_norm));
        let c2 = creal(g_r * a_norm / (p_norm * p_norm * p_norm));
        g_a = a.scale(c1).sub(&a_pi.scale(c2));
        g_p.scale(creal(rescale))
    } else {
        g_p
    };

    g_a = g_a.add(&g_praw.matmul(&v_j.adjoint()));
    let g_vj = a.adjoint().matmul(&g_praw).add(&g_q.adjoint());
    let g_v = CMatrix::from_fn(n, n, |r, c| if c < k { g_vj[(r, c)] } else { czero() });
    let w = v.adjoint().matmul(&g_v);
    let lambda: Vec<T> = (0..n).map(|i| split.svd.s.get(i).map_or(T::zero(), |s| *s * *s)).collect();
    let mut kmat = CMatrix::zeros(n, n);
    for i in k..n {
        for j in 0..k {
            kmat[(i, j)] = w[(i, j)] * inverse_gap(lambda[j] - lambda[i]);
        }
    }
    let g = v.matmul(&kmat).matmul(&v.adjoint());
    Ok(g_a.add(&a.matmul(&g.add(&g.adjoint()))))
}

/// `dL/dθ` for every angle, given `dL/dp_c` for the readout probabilities of
/// the recorded forward pass.
pub fn backward<T: Real>(tape: &Tape<T>, loss_grad: &[T]) -> Result<GradVector<T>> {
    if loss_grad.len() != tape.readout_states.len() {
        return Err(Error::DimensionMismatch { expected: tape.readout_states.len(), got: loss_grad.len() });
    }
    if let Some(i) = loss_grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("loss gradient {i}")));
    }
    let mut grad: GradVector<T> = GradVector::zeros(tape.num_params);
    let mut adj = readout_adjoint(&tape.output, &tape.readout_states, loss_grad)?;
    let n = tape.num_qubits;

    for step in tape.steps.iter().rev() {
        match step {
            Step::Single { qubit, gate, param, input } => {
                let g_out = &adj[*qubit];
                if let (Some(idx), Some(du)) = (param, gate.angle_derivative()) {
                    let d_out = input.contract_physical(&phys_array(&du));
                    grad.values[*idx] += re_inner(g_out.as_slice(), d_out.as_slice());
                }
                adj[*qubit] = g_out.contract_physical(&phys_adjoint(gate.matrix()));
            }
            Step::Two { site, gate, left_in, right_in, split, rescale } => {
                let right_site = (site + 1) % n;
                let g_a = split_adjoint(split, *rescale, &adj[*site], &adj[right_site])?;
                let (lb, rb) = (left_in.left_dim(), right_in.right_dim());
                let g_t = PairTensor::from_matrix(&g_a, lb, rb).apply_gate(&adjoint4(gate.matrix()));
                let bond = left_in.right_dim();
                let mut g_l = CoreTensor::zeros(lb, bond);
                let mut g_r = CoreTensor::zeros(bond, rb);
                let ls: Vec<CMatrix<T>> = (0..2).map(|p| slice_mat(left_in, p)).collect();
                let rs: Vec<CMatrix<T>> = (0..2).map(|p| slice_mat(right_in, p)).collect();
                for i in 0..2 {
                    for j in 0..2 {
                        let gt = CMatrix::from_vec(lb, rb, g_t.slice(i, j).to_vec());
                        add_into(g_l.slice_mut(i), &gt.matmul(&rs[j].adjoint()));
                        add_into(g_r.slice_mut(j), &ls[i].adjoint().matmul(&gt));
                    }
                }
                adj[*site] = g_l;
                adj[right_site] = g_r;
            }
        }
    }
    if let Some(i) = grad.values.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient component {i}")));
    }
    Ok(grad)
}

/// Central differences `(L(θ+ε) − L(θ−ε)) / 2ε`. The objective receives the
/// perturbed angles and the resulting readout.
pub fn finite_diff_grad<T: Real, F>(
    spec: &CircuitSpec,
    params: &ParamVector<T>,
    features: &FeatureVector<T>,
    rank: usize,
    mut loss: F,
    epsilon: T,
) -> Result<GradVector<T>>
where
    F: FnMut(&[T], &[T]) -> T,
{
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut eval = |theta: &ParamVector<T>| -> Result<T> {
        let ring = crate::circuit::forward(spec, theta, features, rank)?;
        let p = readout(&ring, spec.readout_states())?;
        Ok(loss(theta.values(), &p))
    };
    let mut shifted = params.clone();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let x = params.values()[i];
        shifted.values_mut()[i] = x + epsilon;
        let up = eval(&shifted)?;
        shifted.values_mut()[i] = x - epsilon;
        let down = eval(&shifted)?;
        shifted.values_mut()[i] = x;
        out.push((up - down) / (T::lit(2.0) * epsilon));
    }
    Ok(GradVector::from_vec(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{default_readout, forward};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, d: usize, seed: u64) -> (CircuitSpec, ParamVector<f64>, FeatureVector<f64>) {
        let spec = CircuitSpec::new(n, d, default_readout(n, 2).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ParamVector::random(spec.num_params(), &mut rng);
        let feats = FeatureVector::new(ParamVector::<f64>::random(n, &mut rng).into_vec()).unwrap();
        (spec, params, feats)
    }

    fn check_close(bw: &[f64], fd: &[f64]) {
        for (i, (b, f)) in bw.iter().zip(fd).enumerate() {
            let tol = if f.abs() < 1e-2 { 1e-6 } else { 1e-4 * f.abs() };
            assert!((b - f).abs() < tol, "component {i}: backward {b} vs fd {f}");
        }
    }

    #[test]
    fn depth_zero_gives_empty_gradient() {
        let (spec, params, feats) = setup(3, 0, 1);
        let tape = Tape::record(&spec, &params, &feats, 2).unwrap();
        assert!(backward(&tape, &[1.0, 0.0]).unwrap().is_empty());
    }

    #[test]
    fn replay_is_bitwise() {
        let (spec, params, feats) = setup(5, 2, 7);
        let tape = Tape::record(&spec, &params, &feats, 2).unwrap();
        assert_eq!(&tape.replay().unwrap(), tape.output());
        assert_eq!(tape.output(), &forward(&spec, &params, &feats, 2).unwrap());
    }

    #[test]
    fn single_probability_closed_form() {
        // p(|01⟩) after rx(θ) on the last qubit is sin²(θ/2), derivative sin(θ)/2
        let spec = CircuitSpec::new(2, 1, vec!["01".parse().unwrap()]).unwrap().with_entangler(vec![]).unwrap();
        let theta: f64 = 0.83;
        let params = ParamVector::new(vec![0.0, 0.0, 0.0, theta, 0.0, 0.0]).unwrap();
        let feats = FeatureVector::new(vec![0.0, 0.0]).unwrap();
        let tape = Tape::record(&spec, &params, &feats, 2).unwrap();
        let g = backward(&tape, &[1.0]).unwrap();
        assert!((g.values()[3] - theta.sin() / 2.0).abs() < 1e-12);
        assert!(g.values().iter().enumerate().all(|(i, v): (usize, &f64)| i == 3 || v.abs() < 1e-12));
    }

    #[test]
    fn matches_finite_differences_full_rank() {
        for seed in 0..3 {
            let (spec, params, feats) = setup(4, 2, seed);
            let w = [0.7, -1.3];
            let tape = Tape::record(&spec, &params, &feats, 4).unwrap();
            let bw = backward(&tape, &w).unwrap();
            let fd = finite_diff_grad(&spec, &params, &feats, 4, |_, p| w[0] * p[0] + w[1] * p[1], 1e-5).unwrap();
            check_close(bw.values(), fd.values());
        }
    }

    #[test]
    fn matches_finite_differences_with_truncation() {
        // no wrap-around keeps the spectrum gapped at the cut
        let (spec, params, feats) = setup(5, 2, 11);
        let spec = spec.with_wrap(false).unwrap();
        let tape = Tape::record(&spec, &params, &feats, 2).unwrap();
        let w = [1.0, 0.5];
        let bw = backward(&tape, &w).unwrap();
        let fd = finite_diff_grad(&spec, &params, &feats, 2, |_, p| w[0] * p[0] + w[1] * p[1], 1e-5).unwrap();
        check_close(bw.values(), fd.values());
    }

    #[test]
    fn linear_in_loss_gradient() {
        let (spec, params, feats) = setup(4, 1, 3);
        let tape = Tape::record(&spec, &params, &feats, 4).unwrap();
        let g1 = backward(&tape, &[1.0, 0.0]).unwrap();
        let g2 = backward(&tape, &[0.0, 1.0]).unwrap();
        let mix = backward(&tape, &[2.0, -3.0]).unwrap();
        for i in 0..g1.len() {
            let want = 2.0 * g1.values()[i] - 3.0 * g2.values()[i];
            assert!((mix.values()[i] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn finite_diff_probes() {
        let (spec, params, feats) = setup(3, 1, 5);
        let zero = finite_diff_grad(&spec, &params, &feats, 4, |_, _| 2.5, 1e-5).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));
        let unit = finite_diff_grad(&spec, &params, &feats, 4, |t, _| t[0], 1e-5).unwrap();
        assert!((unit.values()[0] - 1.0).abs() < 1e-10);
        assert!(unit.values()[1..].iter().all(|v| v.abs() < 1e-10));
        assert!(finite_diff_grad(&spec, &params, &feats, 4, |_, _| 0.0, 0.0).is_err());
    }

    #[test]
    fn wrong_loss_gradient_length() {
        let (spec, params, feats) = setup(3, 1, 5);
        let tape = Tape::record(&spec, &params, &feats, 2).unwrap();
        assert!(matches!(backward(&tape, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
