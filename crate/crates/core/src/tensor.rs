//! Dense complex linear algebra for small multi-qubit registers.
//!
//! Basis convention: for `n` qubits the basis index is
//! `b = Σᵢ bᵢ·2^(n−1−i)`, so qubit 0 is the most significant bit and `|1⟩`
//! is the excited level. Everything is stored densely; the largest register
//! handled anywhere in the crate is six qubits (64×64).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest register the dense routines accept.
pub const MAX_QUBITS: usize = 8;

/// Default tolerances for the state and operator invariants.
pub mod tol {
    /// `|‖ψ‖² − 1|` allowed for a [`PureState`](super::PureState).
    pub const NORM: f64 = 1e-12;
    /// Entrywise `max |M − M†|`.
    pub const HERMITIAN: f64 = 1e-12;
    /// `|Tr ρ − 1|`.
    pub const TRACE: f64 = 1e-12;
    /// Smallest eigenvalue a density matrix may have.
    pub const MIN_EIGENVALUE: f64 = -1e-10;
}

/// Normalized amplitude vector on `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amps: DVector<C64>,
}

/// Hermitian, unit-trace, positive semidefinite operator on `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    m: DMatrix<C64>,
}

/// Hermitian matrix of arbitrary dimension (witness operators, observables).
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: DMatrix<C64>,
}

fn check_qubits(n_qubits: usize) -> Result<usize> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::arg(format!(
            "qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
        )));
    }
    Ok(1 << n_qubits)
}

/// Entrywise `max |M − M†|`.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

impl PureState {
    /// Builds a state from amplitudes that are already normalized to [`tol::NORM`].
    pub fn new(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        let dim = check_qubits(n_qubits)?;
        if amps.len() != dim {
            return Err(Error::arg(format!(
                "{n_qubits} qubits need {dim} amplitudes, got {}",
                amps.len()
            )));
        }
        let amps = DVector::from_vec(amps);
        let norm_sqr = amps.norm_squared();
        if (norm_sqr - 1.0).abs() > tol::NORM {
            return Err(Error::arg(format!("state is not normalized: ‖ψ‖² = {norm_sqr}")));
        }
        Ok(PureState { n_qubits, amps })
    }

    /// Builds a state after rescaling `amps` to unit norm.
    pub fn normalized(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::arg("cannot normalize a zero or non-finite vector"));
        }
        let scaled = amps.into_iter().map(|a| a / norm).collect();
        PureState::new(n_qubits, scaled)
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = check_qubits(n_qubits)?;
        if index >= dim {
            return Err(Error::arg(format!("basis index {index} out of range for {n_qubits} qubits")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        PureState::new(n_qubits, amps)
    }

    /// Basis state from a bit string such as `"101"` (qubit 0 first).
    pub fn from_bits(bits: &str) -> Result<Self> {
        let n = bits.len();
        let mut index = 0;
        for c in bits.chars() {
            index = match c {
                '0' => index << 1,
                '1' => (index << 1) | 1,
                _ => return Err(Error::arg(format!("invalid bit string {bits:?}"))),
            };
        }
        PureState::basis(n, index)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix {
            n_qubits: self.n_qubits,
            m: &self.amps * self.amps.adjoint(),
        }
    }
}

impl DensityMatrix {
    /// Validates all three invariants: hermiticity, unit trace, positivity.
    pub fn new(n_qubits: usize, m: DMatrix<C64>) -> Result<Self> {
        let dim = check_qubits(n_qubits)?;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::arg(format!(
                "{n_qubits} qubits need a {dim}×{dim} matrix, got {}×{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let defect = hermiticity_defect(&m);
        if defect > tol::HERMITIAN {
            return Err(Error::arg(format!("matrix is not Hermitian (defect {defect:e})")));
        }
        let trace = m.trace();
        if (trace.re - 1.0).abs() > tol::TRACE || trace.im.abs() > tol::TRACE {
            return Err(Error::arg(format!("trace must be 1, got {trace}")));
        }
        let m = hermitian_part(&m);
        let lowest = eigh(&m)?.0[0];
        if lowest < tol::MIN_EIGENVALUE {
            return Err(Error::arg(format!("matrix is not positive semidefinite (λ_min = {lowest:e})")));
        }
        Ok(DensityMatrix { n_qubits, m })
    }

    /// Wraps a matrix known to be a valid state by construction.
    pub(crate) fn from_parts(n_qubits: usize, m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), 1 << n_qubits);
        DensityMatrix { n_qubits, m }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let dim = check_qubits(n_qubits)?;
        let m = DMatrix::identity(dim, dim).scale(1.0 / dim as f64);
        Ok(DensityMatrix { n_qubits, m })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    /// `Tr[A ρ]` for an operator of matching dimension.
    pub fn expectation(&self, op: &HermitianOperator) -> f64 {
        trace_product(op.matrix(), &self.m)
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs_diff(&self.m, &other.m)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        // Hermitian by construction.
        eigh(&self.m).map(|(vals, _)| vals).unwrap_or_default()
    }
}

impl HermitianOperator {
    /// Accepts `m` if it is Hermitian within [`tol::HERMITIAN`]; stores its Hermitian part.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::arg("operator must be a non-empty square matrix"));
        }
        let defect = hermiticity_defect(&m);
        if defect > tol::HERMITIAN {
            return Err(Error::arg(format!("matrix is not Hermitian (defect {defect:e})")));
        }
        Ok(HermitianOperator { m: hermitian_part(&m) })
    }

    /// Takes the Hermitian part of an arbitrary square matrix.
    pub fn from_hermitian_part(m: &DMatrix<C64>) -> Self {
        HermitianOperator { m: hermitian_part(m) }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator { m: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOperator { m: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    /// `⟨ψ|X|ψ⟩`.
    pub fn expectation(&self, psi: &PureState) -> f64 {
        psi.amplitudes().dotc(&(&self.m * psi.amplitudes())).re
    }

    pub fn scale(&self, factor: f64) -> Self {
        HermitianOperator { m: self.m.scale(factor) }
    }
}

impl From<DensityMatrix> for HermitianOperator {
    fn from(rho: DensityMatrix) -> Self {
        HermitianOperator { m: rho.m }
    }
}

/// `Re Tr[A B]` for square matrices of equal size.
pub fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc.re
}

pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Kronecker product of registers; the left operand supplies the more
/// significant qubits. Mixing states with matrices does not type-check.
pub trait TensorProduct<Rhs = Self> {
    type Output;
    fn tensor(&self, rhs: &Rhs) -> Self::Output;
}

impl TensorProduct for PureState {
    type Output = Result<PureState>;
    fn tensor(&self, rhs: &PureState) -> Result<PureState> {
        let n = self.n_qubits + rhs.n_qubits;
        check_qubits(n)?;
        Ok(PureState { n_qubits: n, amps: self.amps.kronecker(&rhs.amps) })
    }
}

impl TensorProduct for DensityMatrix {
    type Output = Result<DensityMatrix>;
    fn tensor(&self, rhs: &DensityMatrix) -> Result<DensityMatrix> {
        let n = self.n_qubits + rhs.n_qubits;
        check_qubits(n)?;
        Ok(DensityMatrix { n_qubits: n, m: self.m.kronecker(&rhs.m) })
    }
}

impl TensorProduct for HermitianOperator {
    type Output = HermitianOperator;
    fn tensor(&self, rhs: &HermitianOperator) -> HermitianOperator {
        HermitianOperator { m: self.m.kronecker(&rhs.m) }
    }
}

impl TensorProduct for DMatrix<C64> {
    type Output = DMatrix<C64>;
    fn tensor(&self, rhs: &DMatrix<C64>) -> DMatrix<C64> {
        self.kronecker(rhs)
    }
}

pub fn tensor_product<T: TensorProduct>(a: &T, b: &T) -> T::Output {
    a.tensor(b)
}

/// Reduced matrix on the qubits listed in `keep`, in that order.
pub fn partial_trace_matrix(m: &DMatrix<C64>, n_qubits: usize, keep: &[usize]) -> Result<DMatrix<C64>> {
    let dim = check_qubits(n_qubits)?;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::arg("matrix dimension does not match qubit count"));
    }
    if keep.is_empty() {
        return Err(Error::arg("partial trace must keep at least one qubit"));
    }
    let mut seen = vec![false; n_qubits];
    for &q in keep {
        if q >= n_qubits {
            return Err(Error::arg(format!("qubit {q} out of range for {n_qubits} qubits")));
        }
        if std::mem::replace(&mut seen[q], true) {
            return Err(Error::arg(format!("qubit {q} listed twice")));
        }
    }
    let traced: Vec<usize> = (0..n_qubits).filter(|q| !seen[*q]).collect();

    // Scatter the bits of a sub-register index onto full-register positions.
    let scatter = |sub: usize, positions: &[usize]| -> usize {
        let k = positions.len();
        positions
            .iter()
            .enumerate()
            .filter(|(j, _)| (sub >> (k - 1 - j)) & 1 == 1)
            .map(|(_, &q)| 1 << (n_qubits - 1 - q))
            .sum()
    };
    let keep_offsets: Vec<usize> = (0..1 << keep.len()).map(|r| scatter(r, keep)).collect();
    let env_offsets: Vec<usize> = (0..1 << traced.len()).map(|e| scatter(e, &traced)).collect();

    let out_dim = keep_offsets.len();
    let mut out = DMatrix::zeros(out_dim, out_dim);
    for (r, &row) in keep_offsets.iter().enumerate() {
        for (c, &col) in keep_offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &e in &env_offsets {
                acc += m[(row | e, col | e)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Reduced density matrix on `keep` (output qubit order follows `keep`).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let m = partial_trace_matrix(&rho.m, rho.n_qubits, keep)?;
    Ok(DensityMatrix { n_qubits: keep.len(), m })
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending;
/// column `k` of the returned matrix belongs to eigenvalue `k`.
pub fn eigh(m: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    if m.nrows() != m.ncols() {
        return Err(Error::arg("eigen-decomposition needs a square matrix"));
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let defect = hermiticity_defect(m);
    if defect > tol::HERMITIAN * scale {
        return Err(Error::arg(format!("matrix is not Hermitian (defect {defect:e})")));
    }
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Real eigenvalues in ascending order.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Result<Vec<f64>> {
    eigh(m).map(|(values, _)| values)
}

/// Haar-random pure state: complex standard-normal components, normalized.
pub fn random_pure_state<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<PureState> {
    let dim = check_qubits(n_qubits)?;
    loop {
        let amps: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        // A zero draw has probability zero, but never divide by it.
        if amps.iter().any(|a| a.norm_sqr() > 0.0) {
            return PureState::normalized(n_qubits, amps);
        }
    }
}

/// Random density matrix of the given rank: normalized `G G†` with Ginibre `G`.
pub fn random_density_matrix<R: Rng + ?Sized>(n_qubits: usize, rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    let dim = check_qubits(n_qubits)?;
    if rank == 0 || rank > dim {
        return Err(Error::arg(format!("rank must be in 1..={dim}")));
    }
    let g = DMatrix::from_fn(dim, rank, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let mut m = &g * g.adjoint();
    let trace = m.trace().re;
    m.unscale_mut(trace);
    Ok(DensityMatrix { n_qubits, m: hermitian_part(&m) })
}

/// Haar-random unitary via QR of a Ginibre matrix with phase-fixed `R`.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Applies `u` (any dimension matching the state) to a pure state.
pub fn apply_unitary(u: &DMatrix<C64>, psi: &PureState) -> Result<PureState> {
    if u.nrows() != psi.dim() || u.ncols() != psi.dim() {
        return Err(Error::arg("unitary dimension does not match state"));
    }
    PureState::normalized(psi.n_qubits, (u * psi.amplitudes()).iter().copied().collect())
}
