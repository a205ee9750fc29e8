//! Dense simulation of subnormalized density matrices and pure states over a
//! dynamic register of labeled qubits.
//!
//! The register is capped at [`MAX_QUBITS`] qubits; syndrome-extraction
//! circuits stay within the cap by measuring and removing one ancilla at a
//! time. Matrix qubit order is the label-list order, with the first label as
//! the most significant bit. Relabeling is always explicit.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::pauli::{PauliString, Qubit};
use crate::{Result, SimError};

/// Hard cap on concurrent register size (dimension 4096).
pub const MAX_QUBITS: usize = 12;

const UNITARY_TOL: f64 = 1e-10;

/// Preparation basis for a fresh qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrepBasis {
    /// |0>
    Z0,
    /// |1>
    Z1,
    /// |+>
    XPlus,
}

impl PrepBasis {
    fn amplitudes(self) -> [Complex64; 2] {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            PrepBasis::Z0 => [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            PrepBasis::Z1 => [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            PrepBasis::XPlus => [h, h],
        }
    }
}

fn check_distinct(labels: &[Qubit]) -> Result<()> {
    for (i, a) in labels.iter().enumerate() {
        if labels[i + 1..].contains(a) {
            return Err(SimError::DuplicateLabel(a.0));
        }
    }
    Ok(())
}

/// Spread the sub-index `s` (MSB-first over `bits`) into a full register index.
#[inline]
fn spread(s: usize, bits: &[usize]) -> usize {
    let k = bits.len();
    let mut out = 0usize;
    for (j, &b) in bits.iter().enumerate() {
        out |= ((s >> (k - 1 - j)) & 1) << b;
    }
    out
}

fn is_unitary(u: &Array2<Complex64>) -> bool {
    let d = u.nrows();
    if u.ncols() != d {
        return false;
    }
    let mut worst: f64 = 0.0;
    for r in 0..d {
        for c in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..d {
                acc += u[(t, r)].conj() * u[(t, c)];
            }
            let want = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((acc - Complex64::new(want, 0.0)).norm());
        }
    }
    worst < UNITARY_TOL
}

/// Resolve gate support labels to bit positions (MSB-first of the support
/// order) within the register.
fn support_bits(register: &[Qubit], support: &[Qubit]) -> Result<Vec<usize>> {
    check_distinct(support)?;
    let n = register.len();
    support
        .iter()
        .map(|q| {
            register
                .iter()
                .position(|r| r == q)
                .map(|p| n - 1 - p)
                .ok_or(SimError::UnknownQubit(q.0))
        })
        .collect()
}

/// Row-sparse view of a small unitary; the gate matrices here (controlled
/// Paulis, MS rotations) have at most two nonzeros per row, so skipping
/// zeros dominates the dense product.
fn sparse_rows(u: &Array2<Complex64>, conj: bool) -> Vec<Vec<(usize, Complex64)>> {
    let d = u.nrows();
    (0..d)
        .map(|s| {
            (0..d)
                .filter_map(|t| {
                    let w = if conj { u[(s, t)].conj() } else { u[(s, t)] };
                    (w.norm_sqr() > 0.0).then_some((t, w))
                })
                .collect()
        })
        .collect()
}

/// In-place `mat <- U_emb * mat` where `u` acts on the given bit positions.
fn left_apply(mat: &mut [Complex64], dim: usize, u: &Array2<Complex64>, bits: &[usize]) {
    let k = bits.len();
    let sub = 1usize << k;
    let mask: usize = bits.iter().map(|&b| 1usize << b).sum();
    let rows_u = sparse_rows(u, false);
    let mut rows = vec![0usize; sub];
    let mut v = vec![Complex64::new(0.0, 0.0); sub];
    for base in 0..dim {
        if base & mask != 0 {
            continue;
        }
        for (s, r) in rows.iter_mut().enumerate() {
            *r = (base | spread(s, bits)) * dim;
        }
        for c in 0..dim {
            for (s, r) in rows.iter().enumerate() {
                v[s] = mat[r + c];
            }
            for (s, r) in rows.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(t, w) in &rows_u[s] {
                    acc += w * v[t];
                }
                mat[r + c] = acc;
            }
        }
    }
}

/// In-place `mat <- mat * U_emb^dagger`.
fn right_apply_adjoint(mat: &mut [Complex64], dim: usize, u: &Array2<Complex64>, bits: &[usize]) {
    let k = bits.len();
    let sub = 1usize << k;
    let mask: usize = bits.iter().map(|&b| 1usize << b).sum();
    let rows_u = sparse_rows(u, true);
    let mut cols = vec![0usize; sub];
    let mut v = vec![Complex64::new(0.0, 0.0); sub];
    for base in 0..dim {
        if base & mask != 0 {
            continue;
        }
        for (s, cc) in cols.iter_mut().enumerate() {
            *cc = base | spread(s, bits);
        }
        for row in (0..dim * dim).step_by(dim) {
            for (t, cc) in cols.iter().enumerate() {
                v[t] = mat[row + cc];
            }
            for (s, cc) in cols.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(t, w) in &rows_u[s] {
                    acc += v[t] * w;
                }
                mat[row + cc] = acc;
            }
        }
    }
}

/// Subnormalized density matrix over labeled qubits.
///
/// Invariants: Hermitian to 1e-10; weight (trace) in [0, 1 + 1e-10]. Positive
/// semidefiniteness is checked only by [`DensityState::check_psd`], which is
/// reserved for tests; production paths verify Hermiticity and trace alone.
#[derive(Debug, Clone)]
pub struct DensityState {
    qubits: Vec<Qubit>,
    matrix: Array2<Complex64>,
}

/// One outcome branch of a projective single-qubit measurement. The branch
/// state is subnormalized and the measured qubit has been removed:
/// `branch weight = parent weight * probability`.
#[derive(Debug, Clone)]
pub struct MeasurementBranch {
    pub outcome: u8,
    pub probability: f64,
    pub state: DensityState,
}

impl DensityState {
    /// Computational-basis product state of weight 1.
    pub fn new_state(labels: &[Qubit], basis_bits: &[bool]) -> Result<Self> {
        check_distinct(labels)?;
        if labels.len() != basis_bits.len() {
            return Err(SimError::BadSupport(format!(
                "{} labels, {} basis bits",
                labels.len(),
                basis_bits.len()
            )));
        }
        if labels.len() > MAX_QUBITS {
            return Err(SimError::RegisterOverflow(MAX_QUBITS));
        }
        let n = labels.len();
        let dim = 1usize << n;
        let mut idx = 0usize;
        for (p, &b) in basis_bits.iter().enumerate() {
            if b {
                idx |= 1 << (n - 1 - p);
            }
        }
        let mut matrix = Array2::zeros((dim, dim));
        matrix[(idx, idx)] = Complex64::new(1.0, 0.0);
        Ok(DensityState {
            qubits: labels.to_vec(),
            matrix,
        })
    }

    pub fn from_pure(pure: &PureState) -> Self {
        let dim = pure.amplitudes.len();
        let mut matrix = Array2::zeros((dim, dim));
        for r in 0..dim {
            for c in 0..dim {
                matrix[(r, c)] = pure.amplitudes[r] * pure.amplitudes[c].conj();
            }
        }
        DensityState {
            qubits: pure.qubits.clone(),
            matrix,
        }
    }

    pub fn qubits(&self) -> &[Qubit] {
        &self.qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    /// Trace of the matrix.
    pub fn weight(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).sum()
    }

    /// Append a freshly prepared qubit as the least significant position.
    pub fn add_qubit(&mut self, label: Qubit, basis: PrepBasis) -> Result<()> {
        if self.qubits.contains(&label) {
            return Err(SimError::DuplicateLabel(label.0));
        }
        if self.qubits.len() + 1 > MAX_QUBITS {
            return Err(SimError::RegisterOverflow(MAX_QUBITS));
        }
        let amp = basis.amplitudes();
        let dim = self.dim();
        let dim2 = dim * 2;
        let mut out = Array2::zeros((dim2, dim2));
        {
            let src = self.matrix.as_slice().expect("contiguous");
            let dst = out.as_slice_mut().expect("contiguous");
            for r in 0..dim {
                for a in 0..2 {
                    let fa = amp[a];
                    if fa == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let row = (r << 1 | a) * dim2;
                    for b in 0..2 {
                        let f = fa * amp[b].conj();
                        if f == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for c in 0..dim {
                            dst[row + (c << 1 | b)] = src[r * dim + c] * f;
                        }
                    }
                }
            }
        }
        self.qubits.push(label);
        self.matrix = out;
        Ok(())
    }

    /// Conjugate by `u` embedded on `support` (order-sensitive). Weight is
    /// unchanged.
    pub fn apply_unitary(&mut self, u: &Array2<Complex64>, support: &[Qubit]) -> Result<()> {
        if u.nrows() != (1usize << support.len()) {
            return Err(SimError::BadSupport(format!(
                "unitary dim {} does not match support size {}",
                u.nrows(),
                support.len()
            )));
        }
        if !is_unitary(u) {
            return Err(SimError::NonUnitary(support.len()));
        }
        self.apply_unitary_unchecked(u, support)
    }

    /// Same as [`Self::apply_unitary`] without the unitarity check; for
    /// operators that are unitary by construction.
    pub fn apply_unitary_unchecked(
        &mut self,
        u: &Array2<Complex64>,
        support: &[Qubit],
    ) -> Result<()> {
        let bits = support_bits(&self.qubits, support)?;
        let dim = self.dim();
        let mat = self.matrix.as_slice_mut().expect("contiguous");
        left_apply(mat, dim, u, &bits);
        right_apply_adjoint(mat, dim, u, &bits);
        Ok(())
    }

    /// Conjugate by a Pauli string: `rho -> P rho P`.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        for q in p.support() {
            if !self.qubits.contains(&q) {
                return Err(SimError::UnknownQubit(q.0));
            }
        }
        let dim = self.dim();
        let order = self.qubits.clone();
        // Precompute the basis permutation and phases.
        let mut perm = vec![0usize; dim];
        let mut phase = vec![Complex64::new(0.0, 0.0); dim];
        for c in 0..dim {
            let (r, ph) = p.apply_to_basis(c, &order);
            perm[c] = r;
            phase[c] = ph;
        }
        let mut out = Array2::zeros((dim, dim));
        for r in 0..dim {
            for c in 0..dim {
                out[(perm[r], perm[c])] = phase[r] * phase[c].conj() * self.matrix[(r, c)];
            }
        }
        self.matrix = out;
        Ok(())
    }

    /// Apply the mixed overrotation channel of a Hermitian involution `G` in
    /// closed form:
    ///
    /// `rho -> cos^2(e) rho + sin^2(e) G rho G - i k cos(e) sin(e) d (G rho - rho G)`
    ///
    /// which equals `k U rho U^d + (1-k)(cos^2 rho + sin^2 G rho G)` for
    /// `U = exp(-i d e G)`, and reduces to plain conjugation by the rotation
    /// at `k = 1`. `G` is given by its signed-permutation action on the
    /// current register, `G|c> = phase[c] |perm[c]>` with `perm` an
    /// involution; every generator kind here has that form. The update walks
    /// each permutation orbit once and stays fully in place.
    pub fn apply_involution_overrotation(
        &mut self,
        perm: &[usize],
        phase: &[Complex64],
        eps: f64,
        kappa: f64,
        direction: f64,
    ) -> Result<()> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(SimError::KappaOutOfRange(kappa));
        }
        let dim = self.dim();
        if perm.len() != dim || phase.len() != dim {
            return Err(SimError::BadSupport(
                "action tables do not match register dimension".into(),
            ));
        }
        let c2 = Complex64::new(eps.cos().powi(2), 0.0);
        let s2 = Complex64::new(eps.sin().powi(2), 0.0);
        let cross = Complex64::new(0.0, -kappa * direction.signum() * eps.cos() * eps.sin());
        let m = self.matrix.as_slice_mut().expect("contiguous");
        for r in 0..dim {
            let pr = perm[r];
            if pr < r {
                continue;
            }
            let (fr, fpr) = (phase[r], phase[pr]);
            let (row_r, row_pr) = (r * dim, pr * dim);
            for c in 0..dim {
                let pc = perm[c];
                if pc < c {
                    continue;
                }
                let (fc, fpc) = (phase[c], phase[pc]);
                let a = m[row_r + c];
                if pr == r && pc == c {
                    m[row_r + c] = (c2 + s2 * fr * fc + cross * (fr - fc)) * a;
                } else if pr == r {
                    let f = m[row_r + pc];
                    m[row_r + c] = c2 * a + s2 * fr * fc * f + cross * (fr * a - fc * f);
                    m[row_r + pc] = c2 * f + s2 * fr * fpc * a + cross * (fr * f - fpc * a);
                } else if pc == c {
                    let e = m[row_pr + c];
                    m[row_r + c] = c2 * a + s2 * fpr * fc * e + cross * (fpr * e - fc * a);
                    m[row_pr + c] = c2 * e + s2 * fr * fc * a + cross * (fr * a - fc * e);
                } else {
                    let b = m[row_pr + pc];
                    let e = m[row_pr + c];
                    let f = m[row_r + pc];
                    m[row_r + c] = c2 * a + s2 * fpr * fc * b + cross * (fpr * e - fc * f);
                    m[row_pr + pc] = c2 * b + s2 * fr * fpc * a + cross * (fr * f - fpc * e);
                    m[row_pr + c] = c2 * e + s2 * fr * fc * f + cross * (fr * a - fc * b);
                    m[row_r + pc] = c2 * f + s2 * fpr * fpc * e + cross * (fpr * b - fpc * a);
                }
            }
        }
        Ok(())
    }

    /// Apply a finite mixture of unitaries: `rho -> sum_i p_i U_i rho U_i^d`.
    /// Probabilities must sum to 1 within 1e-12.
    pub fn apply_mixture_channel(&mut self, terms: &[MixtureTerm]) -> Result<()> {
        let total: f64 = terms.iter().map(|t| t.probability).sum();
        if terms.iter().any(|t| t.probability < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(SimError::BadProbabilities(total));
        }
        let mut acc: Option<Array2<Complex64>> = None;
        for term in terms {
            let mut branch = self.clone();
            term.op.apply_density(&mut branch)?;
            let scaled = branch.matrix * Complex64::new(term.probability, 0.0);
            acc = Some(match acc {
                None => scaled,
                Some(a) => a + scaled,
            });
        }
        if let Some(a) = acc {
            self.matrix = a;
        }
        Ok(())
    }

    /// Both projective branches of a computational-basis measurement on one
    /// qubit, with the measured qubit removed from the register.
    pub fn measure_qubit_branches(&self, label: Qubit) -> Result<(MeasurementBranch, MeasurementBranch)> {
        let pos = self
            .qubits
            .iter()
            .position(|q| *q == label)
            .ok_or(SimError::UnknownQubit(label.0))?;
        let parent_weight = self.weight();
        if parent_weight <= 0.0 {
            return Err(SimError::ZeroWeightState);
        }
        let n = self.qubits.len();
        let bit = n - 1 - pos;
        let dim = self.dim();
        let half = dim / 2;
        let run = 1usize << bit;
        let compress = |full: usize| -> usize {
            let low = full & (run - 1);
            let high = full >> (bit + 1);
            (high << bit) | low
        };
        let mut mats = [Array2::zeros((half, half)), Array2::zeros((half, half))];
        {
            let src = self.matrix.as_slice().expect("contiguous");
            for r in 0..dim {
                let rb = (r >> bit) & 1;
                let dst_row = compress(r) * half;
                let dst = mats[rb].as_slice_mut().expect("contiguous");
                let src_row = &src[r * dim..(r + 1) * dim];
                let mut d = dst_row;
                let mut c = rb << bit;
                while c < dim {
                    dst[d..d + run].copy_from_slice(&src_row[c..c + run]);
                    d += run;
                    c += 2 * run;
                }
            }
        }
        let mut rest = self.qubits.clone();
        rest.remove(pos);
        let mk = |outcome: u8, matrix: Array2<Complex64>| {
            let state = DensityState {
                qubits: rest.clone(),
                matrix,
            };
            let probability = (state.weight() / parent_weight).clamp(0.0, 1.0);
            MeasurementBranch {
                outcome,
                probability,
                state,
            }
        };
        let [m0, m1] = mats;
        Ok((mk(0, m0), mk(1, m1)))
    }

    /// Unnormalized `tr(P rho)`.
    pub fn pauli_trace(&self, p: &PauliString) -> Result<f64> {
        for q in p.support() {
            if !self.qubits.contains(&q) {
                return Err(SimError::UnknownQubit(q.0));
            }
        }
        let dim = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..dim {
            let (r, ph) = p.apply_to_basis(c, &self.qubits);
            // tr(P rho) = sum_c <c| P rho |c> = sum_c ph_c' rho[r, c] with
            // <c|P = (P^d |c>)^d and P^d = P.
            acc += ph * self.matrix[(c, r)];
        }
        Ok(acc.re)
    }

    /// Normalized Pauli expectation `tr(P rho) / tr(rho)`.
    pub fn pauli_expectation(&self, p: &PauliString) -> Result<f64> {
        let w = self.weight();
        if w <= 0.0 {
            return Err(SimError::ZeroWeightState);
        }
        Ok(self.pauli_trace(p)? / w)
    }

    /// Weight-bearing overlap `tr(Pi rho)` with a Hermitian idempotent on a
    /// subset of the register.
    pub fn overlap_with_projector(
        &self,
        proj: &Array2<Complex64>,
        support: &[Qubit],
    ) -> Result<f64> {
        let d = proj.nrows();
        if d != (1usize << support.len()) || proj.ncols() != d {
            return Err(SimError::BadSupport(
                "projector dimension does not match support".into(),
            ));
        }
        // Pi^2 = Pi and Pi = Pi^d within 1e-10.
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..d {
                    acc += proj[(r, t)] * proj[(t, c)];
                }
                worst = worst.max((acc - proj[(r, c)]).norm());
                worst = worst.max((proj[(r, c)] - proj[(c, r)].conj()).norm());
            }
        }
        if worst > 1e-10 {
            return Err(SimError::NonIdempotentProjector);
        }
        let bits = support_bits(&self.qubits, support)?;
        let dim = self.dim();
        let k = bits.len();
        let sub = 1usize << k;
        let mask: usize = bits.iter().map(|&b| 1usize << b).sum();
        let mut acc = Complex64::new(0.0, 0.0);
        // tr(Pi_emb rho) = sum over embedded blocks.
        for base in 0..dim {
            if base & mask != 0 {
                continue;
            }
            for s in 0..sub {
                let r = base | spread(s, &bits);
                for t in 0..sub {
                    let c = base | spread(t, &bits);
                    acc += proj[(s, t)] * self.matrix[(c, r)];
                }
            }
        }
        Ok(acc.re)
    }

    /// Reinsert a measured-out qubit in the computational state `bit` at the
    /// given register position; used to recombine measurement branches.
    pub fn insert_qubit_basis(&self, label: Qubit, position: usize, bit: u8) -> Result<Self> {
        if self.qubits.contains(&label) {
            return Err(SimError::DuplicateLabel(label.0));
        }
        let mut qubits = self.qubits.clone();
        qubits.insert(position, label);
        let n = qubits.len();
        let bitpos = n - 1 - position;
        let dim = self.dim();
        let expand = |idx: usize| -> usize {
            let low = idx & ((1 << bitpos) - 1);
            let high = idx >> bitpos;
            (high << (bitpos + 1)) | ((bit as usize) << bitpos) | low
        };
        let mut out = Array2::zeros((dim * 2, dim * 2));
        for r in 0..dim {
            for c in 0..dim {
                out[(expand(r), expand(c))] = self.matrix[(r, c)];
            }
        }
        Ok(DensityState {
            qubits,
            matrix: out,
        })
    }

    /// Scale the matrix so the weight becomes 1.
    pub fn renormalize(&mut self) -> Result<()> {
        let w = self.weight();
        if w <= 0.0 {
            return Err(SimError::ZeroWeightState);
        }
        self.matrix.mapv_inplace(|v| v / w);
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.matrix.mapv_inplace(|v| v * factor);
    }

    pub fn add_assign(&mut self, other: &DensityState) -> Result<()> {
        if self.qubits != other.qubits {
            return Err(SimError::BadSupport("register mismatch in sum".into()));
        }
        self.matrix = &self.matrix + &other.matrix;
        Ok(())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let dim = self.dim();
        for r in 0..dim {
            for c in r..dim {
                if (self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Positive-semidefiniteness check by pivoted semidefinite Cholesky;
    /// intended for tests only (eigen-scale cost).
    pub fn check_psd(&self, tol: f64) -> bool {
        let dim = self.dim();
        let mut a: Vec<Vec<Complex64>> = (0..dim)
            .map(|r| (0..dim).map(|c| self.matrix[(r, c)]).collect())
            .collect();
        for j in 0..dim {
            let d = a[j][j].re;
            if d < -tol {
                return false;
            }
            if d <= tol {
                // Rank-deficient direction: the whole column must vanish.
                for r in j..dim {
                    if a[r][j].norm() > 10.0 * tol.max(1e-14).sqrt() {
                        return false;
                    }
                }
                continue;
            }
            let root = d.sqrt();
            for r in j..dim {
                a[r][j] /= root;
            }
            for c in (j + 1)..dim {
                let f = a[c][j].conj();
                for r in c..dim {
                    let lj = a[r][j];
                    a[r][c] -= lj * f;
                }
            }
        }
        true
    }

    /// Distance `max |rho - sigma|` entrywise.
    pub fn max_abs_diff(&self, other: &DensityState) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, b) in self.matrix.iter().zip(other.matrix.iter()) {
            worst = worst.max((a - b).norm());
        }
        worst
    }
}

/// One term of a unitary mixture.
#[derive(Debug, Clone)]
pub struct MixtureTerm {
    pub probability: f64,
    pub op: MixtureOp,
}

/// The unitary applied by a mixture term. Pauli terms get a fast path and
/// stay identifiable for classical frame tracking.
#[derive(Debug, Clone)]
pub enum MixtureOp {
    Identity,
    Pauli(PauliString),
    Matrix {
        u: Array2<Complex64>,
        support: Vec<Qubit>,
    },
}

impl MixtureOp {
    pub fn apply_density(&self, state: &mut DensityState) -> Result<()> {
        match self {
            MixtureOp::Identity => Ok(()),
            MixtureOp::Pauli(p) => state.apply_pauli(p),
            MixtureOp::Matrix { u, support } => state.apply_unitary_unchecked(u, support),
        }
    }

    pub fn apply_pure(&self, state: &mut PureState) -> Result<()> {
        match self {
            MixtureOp::Identity => Ok(()),
            MixtureOp::Pauli(p) => state.apply_pauli(p),
            MixtureOp::Matrix { u, support } => state.apply_unitary_unchecked(u, support),
        }
    }
}

/// Normalized pure state over labeled qubits; trajectory backend.
#[derive(Debug, Clone)]
pub struct PureState {
    qubits: Vec<Qubit>,
    amplitudes: Array1<Complex64>,
}

impl PureState {
    pub fn from_amplitudes(qubits: Vec<Qubit>, amplitudes: Array1<Complex64>) -> Result<Self> {
        check_distinct(&qubits)?;
        if amplitudes.len() != (1usize << qubits.len()) {
            return Err(SimError::BadSupport(
                "amplitude vector does not match register".into(),
            ));
        }
        Ok(PureState { qubits, amplitudes })
    }

    pub fn scale(&mut self, factor: f64) {
        self.amplitudes.mapv_inplace(|a| a * factor);
    }

    pub fn new_state(labels: &[Qubit], basis_bits: &[bool]) -> Result<Self> {
        check_distinct(labels)?;
        if labels.len() != basis_bits.len() {
            return Err(SimError::BadSupport(format!(
                "{} labels, {} basis bits",
                labels.len(),
                basis_bits.len()
            )));
        }
        if labels.len() > MAX_QUBITS {
            return Err(SimError::RegisterOverflow(MAX_QUBITS));
        }
        let n = labels.len();
        let dim = 1usize << n;
        let mut idx = 0usize;
        for (p, &b) in basis_bits.iter().enumerate() {
            if b {
                idx |= 1 << (n - 1 - p);
            }
        }
        let mut amplitudes = Array1::zeros(dim);
        amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(PureState {
            qubits: labels.to_vec(),
            amplitudes,
        })
    }

    pub fn qubits(&self) -> &[Qubit] {
        &self.qubits
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amplitudes
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn add_qubit(&mut self, label: Qubit, basis: PrepBasis) -> Result<()> {
        if self.qubits.contains(&label) {
            return Err(SimError::DuplicateLabel(label.0));
        }
        if self.qubits.len() + 1 > MAX_QUBITS {
            return Err(SimError::RegisterOverflow(MAX_QUBITS));
        }
        let amp = basis.amplitudes();
        let dim = self.amplitudes.len();
        let mut out = Array1::zeros(dim * 2);
        for i in 0..dim {
            out[i << 1] = self.amplitudes[i] * amp[0];
            out[(i << 1) | 1] = self.amplitudes[i] * amp[1];
        }
        self.qubits.push(label);
        self.amplitudes = out;
        Ok(())
    }

    pub fn apply_unitary(&mut self, u: &Array2<Complex64>, support: &[Qubit]) -> Result<()> {
        if u.nrows() != (1usize << support.len()) {
            return Err(SimError::BadSupport(format!(
                "unitary dim {} does not match support size {}",
                u.nrows(),
                support.len()
            )));
        }
        if !is_unitary(u) {
            return Err(SimError::NonUnitary(support.len()));
        }
        self.apply_unitary_unchecked(u, support)
    }

    pub fn apply_unitary_unchecked(
        &mut self,
        u: &Array2<Complex64>,
        support: &[Qubit],
    ) -> Result<()> {
        let bits = support_bits(&self.qubits, support)?;
        let k = bits.len();
        let sub = 1usize << k;
        let mask: usize = bits.iter().map(|&b| 1usize << b).sum();
        let rows_u = sparse_rows(u, false);
        let dim = self.amplitudes.len();
        let mut idx = vec![0usize; sub];
        let mut v = vec![Complex64::new(0.0, 0.0); sub];
        for base in 0..dim {
            if base & mask != 0 {
                continue;
            }
            for (s, r) in idx.iter_mut().enumerate() {
                *r = base | spread(s, &bits);
            }
            for (s, r) in idx.iter().enumerate() {
                v[s] = self.amplitudes[*r];
            }
            for (s, r) in idx.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(t, w) in &rows_u[s] {
                    acc += w * v[t];
                }
                self.amplitudes[*r] = acc;
            }
        }
        Ok(())
    }

    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        for q in p.support() {
            if !self.qubits.contains(&q) {
                return Err(SimError::UnknownQubit(q.0));
            }
        }
        let dim = self.amplitudes.len();
        let mut out = Array1::zeros(dim);
        for c in 0..dim {
            let (r, ph) = p.apply_to_basis(c, &self.qubits);
            out[r] = ph * self.amplitudes[c];
        }
        self.amplitudes = out;
        Ok(())
    }

    /// Sample a computational-basis measurement using the uniform draw `u`,
    /// project, renormalize, and remove the qubit. Returns (outcome, prob of
    /// that outcome).
    pub fn measure_qubit_sampled(&mut self, label: Qubit, draw: f64) -> Result<(u8, f64)> {
        let pos = self
            .qubits
            .iter()
            .position(|q| *q == label)
            .ok_or(SimError::UnknownQubit(label.0))?;
        let n = self.qubits.len();
        let bit = n - 1 - pos;
        let dim = self.amplitudes.len();
        let mut p1 = 0.0;
        for i in 0..dim {
            if (i >> bit) & 1 == 1 {
                p1 += self.amplitudes[i].norm_sqr();
            }
        }
        let p1 = p1.clamp(0.0, 1.0);
        let outcome: u8 = if draw < p1 { 1 } else { 0 };
        let p = if outcome == 1 { p1 } else { 1.0 - p1 };
        let scale = if p > 0.0 { 1.0 / p.sqrt() } else { 0.0 };
        let half = dim / 2;
        let mut out = Array1::zeros(half);
        for i in 0..dim {
            if ((i >> bit) & 1) as u8 == outcome {
                let low = i & ((1 << bit) - 1);
                let high = i >> (bit + 1);
                out[(high << bit) | low] = self.amplitudes[i] * scale;
            }
        }
        self.qubits.remove(pos);
        self.amplitudes = out;
        Ok((outcome, p))
    }

    pub fn pauli_expectation(&self, p: &PauliString) -> Result<f64> {
        for q in p.support() {
            if !self.qubits.contains(&q) {
                return Err(SimError::UnknownQubit(q.0));
            }
        }
        let dim = self.amplitudes.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..dim {
            let (r, ph) = p.apply_to_basis(c, &self.qubits);
            acc += self.amplitudes[r].conj() * ph * self.amplitudes[c];
        }
        Ok(acc.re)
    }

    /// In-place rotation `exp(-i theta G)` for a signed-permutation
    /// involution `G|c> = phase[c] |perm[c]>`.
    pub fn apply_involution_rotation(
        &mut self,
        perm: &[usize],
        phase: &[Complex64],
        theta: f64,
    ) -> Result<()> {
        let dim = self.amplitudes.len();
        if perm.len() != dim || phase.len() != dim {
            return Err(SimError::BadSupport(
                "action tables do not match register dimension".into(),
            ));
        }
        let cos = Complex64::new(theta.cos(), 0.0);
        let msin = Complex64::new(0.0, -theta.sin());
        let amps = self.amplitudes.as_slice_mut().expect("contiguous");
        for x in 0..dim {
            let px = perm[x];
            if px < x {
                continue;
            }
            let a = amps[x];
            if px == x {
                amps[x] = (cos + msin * phase[x]) * a;
            } else {
                let b = amps[px];
                amps[x] = cos * a + msin * phase[px] * b;
                amps[px] = cos * b + msin * phase[x] * a;
            }
        }
        Ok(())
    }

    /// `|v> <- (|v> + |w>)/2`; the projector-product building block.
    pub fn average_with(&mut self, other: &PureState) -> Result<()> {
        if self.qubits != other.qubits {
            return Err(SimError::BadSupport("register mismatch in average".into()));
        }
        for (a, b) in self.amplitudes.iter_mut().zip(other.amplitudes.iter()) {
            *a = (*a + *b) * 0.5;
        }
        Ok(())
    }

    /// Plain amplitude sum; callers manage normalization.
    pub fn add_assign_state(&mut self, other: &PureState) -> Result<()> {
        if self.qubits != other.qubits {
            return Err(SimError::BadSupport("register mismatch in sum".into()));
        }
        for (a, b) in self.amplitudes.iter_mut().zip(other.amplitudes.iter()) {
            *a += *b;
        }
        Ok(())
    }

    pub fn renormalize(&mut self) -> Result<()> {
        let n2 = self.norm_sq();
        if n2 <= 0.0 {
            return Err(SimError::ZeroWeightState);
        }
        let inv = 1.0 / n2.sqrt();
        self.amplitudes.mapv_inplace(|a| a * inv);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Axis;

    fn q(n: u32) -> Qubit {
        Qubit(n)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn hadamard() -> Array2<Complex64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Array2::from_shape_vec((2, 2), vec![c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]).unwrap()
    }

    fn cz() -> Array2<Complex64> {
        let mut m = Array2::zeros((4, 4));
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(1.0, 0.0);
        m[(2, 2)] = c(1.0, 0.0);
        m[(3, 3)] = c(-1.0, 0.0);
        m
    }

    #[test]
    fn new_state_basis_projectors() {
        let s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        assert!((s.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(s.matrix()[(1, 1)].norm() < 1e-15);

        let s = DensityState::new_state(&[q(0), q(1)], &[false, true]).unwrap();
        // |01> lives at index 1.
        assert!((s.matrix()[(1, 1)].re - 1.0).abs() < 1e-15);
        assert!((s.weight() - 1.0).abs() < 1e-12);

        let s = DensityState::new_state(&[], &[]).unwrap();
        assert_eq!(s.dim(), 1);
        assert!((s.weight() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn new_state_rejects_duplicates() {
        assert!(DensityState::new_state(&[q(3), q(3)], &[false, false]).is_err());
    }

    #[test]
    fn x_flips_basis_state() {
        let mut s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        s.apply_unitary(&Axis::X.matrix(), &[q(0)]).unwrap();
        assert!((s.matrix()[(1, 1)].re - 1.0).abs() < 1e-12);
        assert!(s.matrix()[(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn z_half_turn_is_invisible_on_zero() {
        // exp(-i pi/2 Z) = diag(-i, i): pure phase on |0><0|.
        let mut s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        let u = Array2::from_shape_vec(
            (2, 2),
            vec![c(0.0, -1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)],
        )
        .unwrap();
        s.apply_unitary(&u, &[q(0)]).unwrap();
        assert!((s.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bell_state_expectations_via_matrix_product_oracle() {
        // H (x) H on |00>, then CZ: <XZ> = <ZX> = 1.
        let mut s = DensityState::new_state(&[q(0), q(1)], &[false, false]).unwrap();
        s.apply_unitary(&hadamard(), &[q(0)]).unwrap();
        s.apply_unitary(&hadamard(), &[q(1)]).unwrap();
        s.apply_unitary(&cz(), &[q(0), q(1)]).unwrap();
        let mut xz = std::collections::BTreeMap::new();
        xz.insert(q(0), Axis::X);
        xz.insert(q(1), Axis::Z);
        let xz = PauliString::new(xz).unwrap();
        let mut zx = std::collections::BTreeMap::new();
        zx.insert(q(0), Axis::Z);
        zx.insert(q(1), Axis::X);
        let zx = PauliString::new(zx).unwrap();
        assert!((s.pauli_expectation(&xz).unwrap() - 1.0).abs() < 1e-12);
        assert!((s.pauli_expectation(&zx).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_unitary() {
        let mut s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        let mut m = Axis::X.matrix();
        m[(0, 1)] = c(0.9, 0.0);
        assert!(matches!(
            s.apply_unitary(&m, &[q(0)]),
            Err(SimError::NonUnitary(_))
        ));
    }

    #[test]
    fn rejects_unknown_label() {
        let mut s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        assert!(matches!(
            s.apply_unitary(&Axis::X.matrix(), &[q(5)]),
            Err(SimError::UnknownQubit(5))
        ));
    }

    #[test]
    fn mixture_single_term_equals_unitary() {
        let mut a = DensityState::new_state(&[q(0)], &[false]).unwrap();
        let mut b = a.clone();
        a.apply_unitary(&Axis::X.matrix(), &[q(0)]).unwrap();
        b.apply_mixture_channel(&[MixtureTerm {
            probability: 1.0,
            op: MixtureOp::Matrix {
                u: Axis::X.matrix(),
                support: vec![q(0)],
            },
        }])
        .unwrap();
        assert!(a.max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn mixture_half_identity_half_x_is_maximally_mixed() {
        let mut s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        s.apply_mixture_channel(&[
            MixtureTerm {
                probability: 0.5,
                op: MixtureOp::Identity,
            },
            MixtureTerm {
                probability: 0.5,
                op: MixtureOp::Pauli(PauliString::single(q(0), Axis::X)),
            },
        ])
        .unwrap();
        assert!((s.matrix()[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((s.matrix()[(1, 1)].re - 0.5).abs() < 1e-14);
        assert!(s.matrix()[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn mixture_cos_sin_weights() {
        // (cos^2 0.1) I + (sin^2 0.1) X on |0><0|.
        let e: f64 = 0.1;
        let mut s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        s.apply_mixture_channel(&[
            MixtureTerm {
                probability: e.cos().powi(2),
                op: MixtureOp::Identity,
            },
            MixtureTerm {
                probability: e.sin().powi(2),
                op: MixtureOp::Pauli(PauliString::single(q(0), Axis::X)),
            },
        ])
        .unwrap();
        // Scalar oracle: diag(cos^2 0.1, sin^2 0.1) = diag(0.990033..., 0.009966...).
        assert!((s.matrix()[(0, 0)].re - 0.9900332889206208).abs() < 1e-15);
        assert!((s.matrix()[(1, 1)].re - 0.009966711079379185).abs() < 1e-15);
    }

    #[test]
    fn mixture_rejects_bad_probabilities() {
        let mut s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        let r = s.apply_mixture_channel(&[MixtureTerm {
            probability: 0.7,
            op: MixtureOp::Identity,
        }]);
        assert!(matches!(r, Err(SimError::BadProbabilities(_))));
    }

    #[test]
    fn plus_state_measures_half_half() {
        let mut s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        s.apply_unitary(&hadamard(), &[q(0)]).unwrap();
        let (b0, b1) = s.measure_qubit_branches(q(0)).unwrap();
        assert!((b0.probability - 0.5).abs() < 1e-12);
        assert!((b1.probability - 0.5).abs() < 1e-12);
        assert_eq!(b0.outcome, 0);
        assert_eq!(b1.outcome, 1);
    }

    #[test]
    fn bell_pair_measurement_collapses_partner() {
        // H on q0 then CX(q0 -> q1) gives a Bell pair.
        let mut s = DensityState::new_state(&[q(0), q(1)], &[false, false]).unwrap();
        s.apply_unitary(&hadamard(), &[q(0)]).unwrap();
        let mut cx = Array2::zeros((4, 4));
        cx[(0, 0)] = c(1.0, 0.0);
        cx[(1, 1)] = c(1.0, 0.0);
        cx[(2, 3)] = c(1.0, 0.0);
        cx[(3, 2)] = c(1.0, 0.0);
        s.apply_unitary(&cx, &[q(0), q(1)]).unwrap();
        let (b0, _b1) = s.measure_qubit_branches(q(0)).unwrap();
        assert!((b0.probability - 0.5).abs() < 1e-12);
        // Partner left in |0>.
        assert!((b0.state.matrix()[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!(b0.state.matrix()[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn branch_weights_scale_with_parent_weight() {
        let mut s = DensityState::new_state(&[q(0), q(1)], &[false, false]).unwrap();
        s.apply_unitary(&hadamard(), &[q(0)]).unwrap();
        s.scale(0.3);
        let (b0, b1) = s.measure_qubit_branches(q(0)).unwrap();
        assert!((b0.state.weight() + b1.state.weight() - 0.3).abs() < 1e-12);
        assert!((b0.probability + b1.probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_expectations_on_simple_states() {
        let s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        assert!((s.pauli_expectation(&PauliString::single(q(0), Axis::Z)).unwrap() - 1.0).abs() < 1e-14);
        assert!(s.pauli_expectation(&PauliString::single(q(0), Axis::X)).unwrap().abs() < 1e-14);
    }

    #[test]
    fn zero_weight_expectation_errors() {
        let mut s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        s.scale(0.0);
        assert!(matches!(
            s.pauli_expectation(&PauliString::single(q(0), Axis::Z)),
            Err(SimError::ZeroWeightState)
        ));
    }

    #[test]
    fn projector_overlap_cases() {
        let mut s = DensityState::new_state(&[q(0), q(1)], &[false, false]).unwrap();
        s.apply_unitary(&hadamard(), &[q(0)]).unwrap();
        let mut cx = Array2::zeros((4, 4));
        cx[(0, 0)] = c(1.0, 0.0);
        cx[(1, 1)] = c(1.0, 0.0);
        cx[(2, 3)] = c(1.0, 0.0);
        cx[(3, 2)] = c(1.0, 0.0);
        s.apply_unitary(&cx, &[q(0), q(1)]).unwrap();

        // Pi = I on one qubit: the state weight.
        let eye = Array2::from_diag_elem(2, c(1.0, 0.0));
        assert!((s.overlap_with_projector(&eye, &[q(0)]).unwrap() - 1.0).abs() < 1e-12);

        // Pi = (I + ZZ)/2 on a Bell pair: 1.
        let zz = PauliString::uniform(Axis::Z, &[q(0), q(1)]).unwrap();
        let mut pr = zz.matrix_on(&[q(0), q(1)]).unwrap();
        for i in 0..4 {
            pr[(i, i)] += c(1.0, 0.0);
        }
        pr.mapv_inplace(|v| v * 0.5);
        assert!((s.overlap_with_projector(&pr, &[q(0), q(1)]).unwrap() - 1.0).abs() < 1e-12);

        // Pi = |0><0| on |1>: 0.
        let s1 = DensityState::new_state(&[q(0)], &[true]).unwrap();
        let mut p0 = Array2::zeros((2, 2));
        p0[(0, 0)] = c(1.0, 0.0);
        assert!(s1.overlap_with_projector(&p0, &[q(0)]).unwrap().abs() < 1e-14);
    }

    #[test]
    fn non_idempotent_projector_rejected() {
        let s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        let mut m = Array2::zeros((2, 2));
        m[(0, 0)] = c(0.5, 0.0);
        assert!(matches!(
            s.overlap_with_projector(&m, &[q(0)]),
            Err(SimError::NonIdempotentProjector)
        ));
    }

    #[test]
    fn branch_recombination_reproduces_dephased_parent() {
        let mut s = DensityState::new_state(&[q(0), q(1)], &[false, false]).unwrap();
        s.apply_unitary(&hadamard(), &[q(0)]).unwrap();
        s.apply_unitary(&hadamard(), &[q(1)]).unwrap();
        s.apply_unitary(&cz(), &[q(0), q(1)]).unwrap();
        let pos = 0;
        let (b0, b1) = s.measure_qubit_branches(q(0)).unwrap();
        let r0 = b0.state.insert_qubit_basis(q(0), pos, 0).unwrap();
        let r1 = b1.state.insert_qubit_basis(q(0), pos, 1).unwrap();
        let mut sum = r0;
        sum.add_assign(&r1).unwrap();
        // Off-diagonal blocks in the measured qubit should be zero; diagonal
        // blocks must match the parent exactly.
        for r in 0..4 {
            for cix in 0..4 {
                let same_block = (r >> 1) == (cix >> 1);
                let want = if same_block {
                    s.matrix()[(r, cix)]
                } else {
                    c(0.0, 0.0)
                };
                assert!((sum.matrix()[(r, cix)] - want).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn embedding_is_order_covariant() {
        // Applying u on (a, b) equals applying the permuted u on (b, a).
        let mut s1 = DensityState::new_state(&[q(0), q(1), q(2)], &[false, true, false]).unwrap();
        let mut s2 = s1.clone();
        let mut u = Array2::zeros((4, 4));
        // Some entangling unitary: CX with an extra phase.
        u[(0, 0)] = c(1.0, 0.0);
        u[(1, 1)] = c(0.0, 1.0);
        u[(2, 3)] = c(1.0, 0.0);
        u[(3, 2)] = c(1.0, 0.0);
        // Permuted version: swap the two qubits.
        let mut up = Array2::zeros((4, 4));
        let swap = |i: usize| ((i & 1) << 1) | ((i >> 1) & 1);
        for r in 0..4 {
            for cix in 0..4 {
                up[(swap(r), swap(cix))] = u[(r, cix)];
            }
        }
        s1.apply_unitary(&u, &[q(0), q(2)]).unwrap();
        s2.apply_unitary(&up, &[q(2), q(0)]).unwrap();
        assert!(s1.max_abs_diff(&s2) < 1e-12);
    }

    #[test]
    fn pure_state_measurement_sampling() {
        let mut s = PureState::new_state(&[q(0), q(1)], &[false, false]).unwrap();
        s.apply_unitary(&hadamard(), &[q(0)]).unwrap();
        let (outcome, p) = s.measure_qubit_sampled(q(0), 0.75).unwrap();
        assert_eq!(outcome, 0);
        assert!((p - 0.5).abs() < 1e-12);
        assert!((s.norm_sq() - 1.0).abs() < 1e-12);
        assert_eq!(s.qubits(), &[q(1)]);
    }

    #[test]
    fn add_qubit_extends_register() {
        let mut s = DensityState::new_state(&[q(0)], &[true]).unwrap();
        s.add_qubit(q(9), PrepBasis::XPlus).unwrap();
        assert_eq!(s.qubits(), &[q(0), q(9)]);
        assert!((s.weight() - 1.0).abs() < 1e-12);
        let x9 = PauliString::single(q(9), Axis::X);
        assert!((s.pauli_expectation(&x9).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psd_check_accepts_valid_and_rejects_negative() {
        let mut s = DensityState::new_state(&[q(0)], &[false]).unwrap();
        s.apply_unitary(&hadamard(), &[q(0)]).unwrap();
        assert!(s.check_psd(1e-10));
        let mut bad = s.clone();
        bad.matrix[(0, 0)] = c(-0.2, 0.0);
        assert!(!bad.check_psd(1e-10));
    }
}
