//! Convex-roof concurrence Fill of three-qubit mixed states.
//!
//! The roof `F(ρ) = inf Σ pᵢ F(ψᵢ)` over pure-state decompositions is
//! evaluated through its witness dual
//!
//! ```text
//! F(ρ) = sup_X h(X),   h(X) = inf_ψ { Tr[X(ρ − |ψ⟩⟨ψ|)] + F(ψ) },
//! ```
//!
//! where `X` ranges over Hermitian 8×8 matrices. `h` is concave, and every
//! witness whose inner infimum is found globally gives a lower bound on
//! `F(ρ)`. Each inner minimizer `ψ*` supplies the supergradient
//! `ρ − |ψ*⟩⟨ψ*|`, and [`fill_mixed`] climbs `h` with a proximal bundle
//! method built from these.
//!
//! The inner infimum is a non-convex problem on the unit sphere of `C⁸`. It
//! is attacked with many Haar-random restarts of projected gradient descent;
//! agreement between restarts is the only evidence of globality, and it is
//! reported as such through [`BoundKind`]. A missed global minimum makes the
//! reported value an over-estimate of `h(X)`, so small values never certify
//! that the entanglement has vanished.

use nalgebra::{DMatrix, Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::{fill_pure, fill_with_gradient};
use crate::states::mix;
use crate::tensor::{eigh, DensityMatrix, HermitianOperator, PureState, C64};

const DIM: usize = 8;
type Ket = [C64; DIM];
type Op = [[C64; DIM]; DIM];

/// Restarts ending within this distance of the best value count as agreeing.
pub const AGREEMENT_TOL: f64 = 1e-6;
/// Share of agreeing restarts needed for [`BoundKind::CertifiedLowerBound`].
pub const CERTIFY_FRACTION: f64 = 0.5;
/// Values below this with a certified bound are reported as consistent with zero.
pub const NUMERIC_ZERO: f64 = 1e-4;
/// Eigenvalues of `ρ` at or below this are treated as outside its support.
pub const SUPPORT_TOL: f64 = 1e-13;
/// Largest symmetry group [`SymmetryGroup::generate`] will enumerate.
pub const GROUP_CAP: usize = 1000;

/// Knobs of the bi-level optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct RoofOptions {
    pub inner_restarts: usize,
    pub inner_max_iters: usize,
    /// Descent stops once the tangent gradient or the accepted step is this small.
    pub inner_tol: f64,
    /// Budget of outer iterations, one inner minimization each.
    pub outer_iters: usize,
    /// Smallest proximal step of the ascent; the step doubles after every
    /// improving iteration.
    pub step0: f64,
    pub seed: u64,
    /// Unitaries commuting with `ρ`; the witness is averaged over the group
    /// they generate after every ascent step.
    pub symmetry_generators: Option<Vec<DMatrix<C64>>>,
}

impl Default for RoofOptions {
    fn default() -> Self {
        RoofOptions {
            inner_restarts: 50,
            inner_max_iters: 500,
            inner_tol: 1e-9,
            outer_iters: 400,
            step0: 0.5,
            seed: 0,
            symmetry_generators: None,
        }
    }
}

impl RoofOptions {
    pub fn validate(&self) -> Result<()> {
        if self.inner_restarts == 0 || self.inner_max_iters == 0 || self.outer_iters == 0 {
            return Err(Error::arg("iteration and restart counts must be positive"));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(Error::arg(format!("step0 must be positive, got {}", self.step0)));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::arg("inner_tol must be positive"));
        }
        Ok(())
    }
}

/// How much a reported entanglement value can be trusted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundKind {
    /// Closed-form value.
    ExactAnalytic,
    /// Dual value whose inner minimum was reproduced by at least half of the restarts.
    CertifiedLowerBound,
    /// Dual value without restart agreement; may over-estimate.
    Heuristic,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::ExactAnalytic => "exact_analytic",
            BoundKind::CertifiedLowerBound => "certified_lower_bound",
            BoundKind::Heuristic => "heuristic",
        }
    }
}

impl std::str::FromStr for BoundKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [BoundKind::ExactAnalytic, BoundKind::CertifiedLowerBound, BoundKind::Heuristic]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown bound kind {s:?}")))
    }
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// `h(X_k)` estimate at every outer iteration.
    pub objective_history: Vec<f64>,
    /// Restarts agreeing with the best inner value, per outer iteration.
    pub restarts_converged: Vec<usize>,
    pub restarts_per_batch: usize,
    /// Outer iteration (1-based) at which the reported value was attained.
    pub best_iteration: usize,
    /// Converged fraction of the batch at `best_iteration`.
    pub converged_fraction: f64,
    /// Real dimension of the witness space the ascent moved in.
    pub witness_dimension: usize,
    /// Increase the cutting-plane model still predicted when the ascent stopped.
    pub ascent_gap: f64,
}

#[derive(Clone, Debug)]
pub struct MeasureResult {
    pub value: f64,
    pub bound_kind: BoundKind,
    pub best_witness: HermitianOperator,
    pub inner_minimizer: PureState,
    pub diagnostics: Diagnostics,
}

impl MeasureResult {
    /// Certified bound below [`NUMERIC_ZERO`]. This is not a proof of
    /// separability: a lower bound can be small while the roof is not.
    pub fn consistent_with_zero(&self) -> bool {
        self.bound_kind == BoundKind::CertifiedLowerBound && self.value < NUMERIC_ZERO
    }
}

#[derive(Clone, Debug)]
pub struct InnerMinimum {
    pub psi_star: PureState,
    /// `Tr[Xρ] − ⟨ψ*|X|ψ*⟩ + F(ψ*)`.
    pub value: f64,
    pub converged_fraction: f64,
}

fn to_op(m: &DMatrix<C64>) -> Op {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn apply(x: &Op, v: &Ket) -> Ket {
    std::array::from_fn(|i| {
        let row = &x[i];
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..DIM {
            acc += row[j] * v[j];
        }
        acc
    })
}

fn inner_re(a: &Ket, b: &Ket) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn normalize(v: &mut Ket) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= norm;
    }
}

/// A smooth-almost-everywhere function on the unit sphere of `C⁸`, possibly
/// confined to the first `active` coordinates.
trait SphereObjective: Sync {
    fn active(&self) -> usize;
    fn value(&self, u: &Ket) -> f64;
    /// Value and ambient gradient `g` with `dφ = Re Σ conj(g_b)·du_b`.
    fn value_grad(&self, u: &Ket) -> (f64, Ket);
    /// The objective with the Fill term dropped, exact on biseparable states.
    fn linear_part(&self, u: &Ket) -> f64;
    fn products(&self) -> Option<&ProductSearch>;
    fn to_psi(&self, u: &Ket) -> Ket;
    fn from_psi(&self, psi: &Ket) -> Ket;
}

/// Index of the basis state with qubit `cut` set to `a` and the other two
/// qubits, in order, set to `r`.
fn split_index(cut: usize, a: usize, r: usize) -> usize {
    let pos = 2 - cut;
    let low = r & ((1 << pos) - 1);
    ((r >> pos) << (pos + 1)) | (a << pos) | low
}

macro_rules! top_generalized {
    ($name:ident, $mat:ty, $vec:ty) => {
        /// Eigenvector of the largest eigenvalue of the pencil `(a, c)`, `c > 0`.
        fn $name(a: &$mat, c: &$mat) -> Option<$vec> {
            let l = c.cholesky()?.l();
            let left = l.solve_lower_triangular(a)?;
            let m = l.solve_lower_triangular(&left.adjoint())?;
            let eig = (m + m.adjoint()).unscale(2.0).symmetric_eigen();
            let top = eig.eigenvalues.imax();
            l.adjoint().solve_upper_triangular(&eig.eigenvectors.column(top).into_owned())
        }
    };
}

top_generalized!(top_generalized2, Matrix2<C64>, Vector2<C64>);
top_generalized!(top_generalized4, Matrix4<C64>, Vector4<C64>);

/// Maximizes `⟨ψ|A|ψ⟩/⟨ψ|C|ψ⟩` over states that are products across one cut.
///
/// Minima of the inner problem sit on the kink that `F` has along the
/// biseparable set, where descent stalls a little above them. Polishing each
/// restart's endpoint here lands it exactly on the kink.
struct ProductSearch {
    a: Op,
    c: Op,
}

impl ProductSearch {
    fn quotient(&self, psi: &Ket) -> f64 {
        inner_re(psi, &apply(&self.a, psi)) / inner_re(psi, &apply(&self.c, psi))
    }

    /// `m` compressed onto `single ⊗ C⁴` across `cut`.
    fn fix_single(m: &Op, cut: usize, single: &Vector2<C64>) -> Matrix4<C64> {
        Matrix4::from_fn(|i, j| {
            let mut acc = C64::new(0.0, 0.0);
            for x in 0..2 {
                for y in 0..2 {
                    acc += single[x].conj() * single[y] * m[split_index(cut, x, i)][split_index(cut, y, j)];
                }
            }
            acc
        })
    }

    /// `m` compressed onto `C² ⊗ rest` across `cut`.
    fn fix_rest(m: &Op, cut: usize, rest: &Vector4<C64>) -> Matrix2<C64> {
        Matrix2::from_fn(|i, j| {
            let mut acc = C64::new(0.0, 0.0);
            for x in 0..4 {
                for y in 0..4 {
                    acc += rest[x].conj() * rest[y] * m[split_index(cut, i, x)][split_index(cut, j, y)];
                }
            }
            acc
        })
    }

    fn product(cut: usize, single: &Vector2<C64>, rest: &Vector4<C64>) -> Ket {
        let mut psi = [C64::new(0.0, 0.0); DIM];
        for a in 0..2 {
            for r in 0..4 {
                psi[split_index(cut, a, r)] = single[a] * rest[r];
            }
        }
        normalize(&mut psi);
        psi
    }

    /// Alternating maximization started from the leading Schmidt pair of `psi`.
    fn refine(&self, cut: usize, psi: &Ket) -> Option<Ket> {
        let schmidt = Matrix2x4::from_fn(|a, r| psi[split_index(cut, a, r)]);
        // Leading left singular vector of the Schmidt matrix.
        let gram = schmidt * schmidt.adjoint();
        let eig = gram.symmetric_eigen();
        let mut single: Vector2<C64> = eig.eigenvectors.column(eig.eigenvalues.imax()).into_owned();
        let mut current = f64::NEG_INFINITY;
        let mut best = None;
        for _ in 0..100 {
            let rest = top_generalized4(&Self::fix_single(&self.a, cut, &single), &Self::fix_single(&self.c, cut, &single))?;
            single = top_generalized2(&Self::fix_rest(&self.a, cut, &rest), &Self::fix_rest(&self.c, cut, &rest))?;
            single.normalize_mut();
            let candidate = Self::product(cut, &single, &rest);
            let q = self.quotient(&candidate);
            best = Some(candidate);
            if q - current <= 1e-14 * (1.0 + q.abs()) {
                break;
            }
            current = q;
        }
        best
    }
}

/// `F(ψ) − ⟨ψ|X|ψ⟩`.
struct WitnessObjective {
    x: Op,
    products: ProductSearch,
}

impl WitnessObjective {
    fn new(x: Op) -> Self {
        let identity = std::array::from_fn(|i| {
            std::array::from_fn(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
        });
        WitnessObjective { x, products: ProductSearch { a: x, c: identity } }
    }
}

impl SphereObjective for WitnessObjective {
    fn active(&self) -> usize {
        DIM
    }

    fn value(&self, psi: &Ket) -> f64 {
        crate::measures::fill_amplitudes(psi) - inner_re(psi, &apply(&self.x, psi))
    }

    fn value_grad(&self, psi: &Ket) -> (f64, Ket) {
        let (fill, mut grad) = fill_with_gradient(psi);
        let x_psi = apply(&self.x, psi);
        let value = fill - inner_re(psi, &x_psi);
        for (g, xp) in grad.iter_mut().zip(x_psi.iter()) {
            *g -= xp * 2.0;
        }
        (value, grad)
    }

    fn linear_part(&self, psi: &Ket) -> f64 {
        -inner_re(psi, &apply(&self.x, psi))
    }

    fn products(&self) -> Option<&ProductSearch> {
        Some(&self.products)
    }

    fn to_psi(&self, u: &Ket) -> Ket {
        *u
    }

    fn from_psi(&self, psi: &Ket) -> Ket {
        *psi
    }
}

/// The inner problem after the substitution `ψ ∝ B u`, `B = V√Λ` over the
/// support of `ρ` (rank `r`):
/// `φ(u) = r·‖Bu‖²·F(Bu/‖Bu‖) − ⟨u|Y|u⟩`.
struct WhitenedObjective {
    y: Op,
    /// Columns beyond `rank` are zero.
    b: Op,
    /// `Λ^{−1/2}V†`; rows beyond `rank` are zero.
    b_inv: Op,
    rank: usize,
    /// Only when `ρ` has full rank: then `ψ` ranges over all of `C⁸`.
    products: Option<ProductSearch>,
}

impl WhitenedObjective {
    fn mapped(&self, u: &Ket) -> Ket {
        apply(&self.b, u)
    }
}

impl SphereObjective for WhitenedObjective {
    fn active(&self) -> usize {
        self.rank
    }

    fn value(&self, u: &Ket) -> f64 {
        let v = self.mapped(u);
        let norm_sqr: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        // Fill of the unnormalized vector is ‖v‖⁴·F(v̂).
        let weighted = crate::measures::fill_amplitudes(&v) / norm_sqr;
        self.rank as f64 * weighted - inner_re(u, &apply(&self.y, u))
    }

    fn value_grad(&self, u: &Ket) -> (f64, Ket) {
        let v = self.mapped(u);
        let norm_sqr: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let (poly, poly_grad) = fill_with_gradient(&v);
        let weighted = poly / norm_sqr;
        let r = self.rank as f64;
        // ∇_v (P/‖v‖²) = ∇P/‖v‖² − 2P·v/‖v‖⁴, pulled back through B†.
        let grad_v: Ket = std::array::from_fn(|i| (poly_grad[i] - v[i] * (2.0 * weighted)) / norm_sqr);
        let y_u = apply(&self.y, u);
        let grad: Ket = std::array::from_fn(|j| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..DIM {
                acc += self.b[i][j].conj() * grad_v[i];
            }
            acc * r - y_u[j] * 2.0
        });
        (r * weighted - inner_re(u, &y_u), grad)
    }

    fn linear_part(&self, u: &Ket) -> f64 {
        -inner_re(u, &apply(&self.y, u))
    }

    fn products(&self) -> Option<&ProductSearch> {
        self.products.as_ref()
    }

    fn to_psi(&self, u: &Ket) -> Ket {
        let mut psi = self.mapped(u);
        normalize(&mut psi);
        psi
    }

    fn from_psi(&self, psi: &Ket) -> Ket {
        let mut u = apply(&self.b_inv, psi);
        normalize(&mut u);
        u
    }
}

/// Projected gradient descent with Armijo backtracking from `start`.
fn descend<O: SphereObjective>(objective: &O, start: Ket, max_iters: usize, tol: f64) -> (Ket, f64) {
    let mut psi = start;
    let (mut value, mut grad) = objective.value_grad(&psi);
    let mut step = 0.1;
    for _ in 0..max_iters {
        let radial = inner_re(&psi, &grad);
        let tangent: Ket = std::array::from_fn(|i| grad[i] - psi[i] * radial);
        let slope = tangent.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if slope.sqrt() < tol {
            break;
        }
        let mut accepted = None;
        while step * slope.sqrt() >= tol {
            let mut trial: Ket = std::array::from_fn(|i| psi[i] - tangent[i] * step);
            normalize(&mut trial);
            let trial_value = objective.value(&trial);
            if trial_value <= value - 1e-4 * step * slope {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else { break };
        psi = next;
        (value, grad) = objective.value_grad(&psi);
        step = (step * 2.0).min(10.0);
    }
    (psi, value)
}

/// Stream key for restart `index` of a batch keyed by `base`.
pub(crate) fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair.
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_three_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.n_qubits() != 3 {
        return Err(Error::arg(format!("convex roof needs a 3-qubit state, got {} qubits", rho.n_qubits())));
    }
    Ok(())
}

fn check_witness(x: &HermitianOperator) -> Result<()> {
    if x.dim() != DIM {
        return Err(Error::arg(format!("witness must be {DIM}×{DIM}, got {0}×{0}", x.dim())));
    }
    Ok(())
}

/// `Tr[Xρ] − ⟨ψ|X|ψ⟩ + F(ψ)`.
pub fn inner_objective(x: &HermitianOperator, psi: &PureState, rho: &DensityMatrix) -> Result<f64> {
    check_witness(x)?;
    check_three_qubit(rho)?;
    if psi.n_qubits() != 3 {
        return Err(Error::arg("inner objective needs a 3-qubit pure state"));
    }
    Ok(rho.expectation(x) - x.expectation(psi) + fill_pure(psi)?)
}

/// Haar-random unit vector on the first `active` coordinates.
fn haar_start(active: usize, seed: u64) -> Ket {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = [C64::new(0.0, 0.0); DIM];
    for z in u.iter_mut().take(active) {
        *z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    }
    normalize(&mut u);
    u
}

struct Batch {
    minimizer: Ket,
    value: f64,
    converged_fraction: f64,
    /// Every restart's endpoint, in restart order.
    endpoints: Vec<(Ket, f64)>,
}

fn minimize_batch<O: SphereObjective>(objective: &O, opts: &RoofOptions, base_seed: u64) -> Batch {
    let runs: Vec<(Ket, f64)> = (0..opts.inner_restarts)
        .into_par_iter()
        .map(|r| {
            let start = haar_start(objective.active(), derive_seed(base_seed, r as u64));
            let (mut u, mut value) = descend(objective, start, opts.inner_max_iters, opts.inner_tol);
            if let Some(search) = objective.products() {
                let psi = objective.to_psi(&u);
                for cut in 0..3 {
                    let Some(product) = search.refine(cut, &psi) else { continue };
                    let candidate = objective.from_psi(&product);
                    let candidate_value = objective.linear_part(&candidate);
                    if candidate_value < value {
                        (u, value) = (candidate, candidate_value);
                    }
                }
            }
            (u, value)
        })
        .collect();
    // First minimum in restart order, so ties resolve deterministically.
    let (best_idx, best_value) = runs
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, (_, v))| if *v < acc.1 { (i, *v) } else { acc });
    let agreeing = runs.iter().filter(|(_, v)| *v <= best_value + AGREEMENT_TOL).count();
    Batch {
        minimizer: runs[best_idx].0,
        value: best_value,
        converged_fraction: agreeing as f64 / opts.inner_restarts as f64,
        endpoints: runs,
    }
}

/// Multistart estimate of `h(X) = inf_ψ {Tr[X(ρ − |ψ⟩⟨ψ|)] + F(ψ)}`.
///
/// One `u64` is drawn from `rng`; restart `r` then uses its own stream
/// derived from that draw and `r`, so the result does not depend on how the
/// restarts are scheduled.
pub fn inner_minimize<R: Rng + ?Sized>(
    x: &HermitianOperator,
    rho: &DensityMatrix,
    opts: &RoofOptions,
    rng: &mut R,
) -> Result<InnerMinimum> {
    check_witness(x)?;
    check_three_qubit(rho)?;
    opts.validate()?;
    let batch = minimize_batch(&WitnessObjective::new(to_op(x.matrix())), opts, rng.random());
    Ok(InnerMinimum {
        psi_star: PureState::normalized(3, batch.minimizer.to_vec())?,
        value: rho.expectation(x) + batch.value,
        converged_fraction: batch.converged_fraction,
    })
}

/// Finite matrix group generated by a set of unitaries.
#[derive(Clone, Debug)]
pub struct SymmetryGroup {
    elements: Vec<DMatrix<C64>>,
}

impl SymmetryGroup {
    /// Closes `generators` under multiplication, failing past [`GROUP_CAP`] elements.
    pub fn generate(generators: &[DMatrix<C64>]) -> Result<Self> {
        let Some(first) = generators.first() else {
            return Err(Error::arg("symmetry group needs at least one generator"));
        };
        let dim = first.nrows();
        for g in generators {
            if g.nrows() != dim || g.ncols() != dim {
                return Err(Error::arg("generators must be square matrices of one size"));
            }
            let defect = crate::tensor::max_abs_diff(&(g.adjoint() * g), &DMatrix::identity(dim, dim));
            if defect > 1e-10 {
                return Err(Error::arg(format!("generator is not unitary (defect {defect:e})")));
            }
        }
        let same = |a: &DMatrix<C64>, b: &DMatrix<C64>| crate::tensor::max_abs_diff(a, b) < 1e-9;
        let mut elements = vec![DMatrix::<C64>::identity(dim, dim)];
        let mut frontier = elements.clone();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for e in &frontier {
                for g in generators {
                    let candidate = g * e;
                    if !elements.iter().any(|known| same(known, &candidate)) {
                        if elements.len() >= GROUP_CAP {
                            return Err(Error::arg(format!(
                                "symmetry group exceeds {GROUP_CAP} elements; is it finite?"
                            )));
                        }
                        elements.push(candidate.clone());
                        next.push(candidate);
                    }
                }
            }
            frontier = next;
        }
        Ok(SymmetryGroup { elements })
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[DMatrix<C64>] {
        &self.elements
    }

    /// `(1/|G|) Σ_g U_g X U_g†`.
    pub fn twirl(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        let dim = self.elements[0].nrows();
        if x.dim() != dim {
            return Err(Error::arg("witness and group dimensions differ"));
        }
        let mut acc = DMatrix::<C64>::zeros(dim, dim);
        for u in &self.elements {
            acc += u * x.matrix() * u.adjoint();
        }
        Ok(HermitianOperator::from_hermitian_part(&acc.unscale(self.order() as f64)))
    }

    /// Real dimension of the space of Hermitian operators commuting with the group.
    pub fn commutant_dimension(&self) -> usize {
        let dim = self.elements[0].nrows();
        let mut basis = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                let mut m = DMatrix::<C64>::zeros(dim, dim);
                m[(i, j)] = C64::new(1.0, 0.0);
                m[(j, i)] = C64::new(1.0, 0.0);
                basis.push(m);
                if i != j {
                    let mut m = DMatrix::<C64>::zeros(dim, dim);
                    m[(i, j)] = C64::new(0.0, 1.0);
                    m[(j, i)] = C64::new(0.0, -1.0);
                    basis.push(m);
                }
            }
        }
        // Rank of the twirl map, as a real linear map on dim² real coordinates.
        let columns: Vec<Vec<f64>> = basis
            .iter()
            .map(|b| {
                let t = self.twirl(&HermitianOperator::from_hermitian_part(b)).expect("matching dims");
                t.matrix().iter().flat_map(|z| [z.re, z.im]).collect()
            })
            .collect();
        let rows = columns[0].len();
        let m = DMatrix::from_fn(rows, columns.len(), |r, c| columns[c][r]);
        m.rank(1e-9)
    }
}

/// Group average of `x` over the group generated by `generators`.
pub fn twirl(x: &HermitianOperator, generators: &[DMatrix<C64>]) -> Result<HermitianOperator> {
    SymmetryGroup::generate(generators)?.twirl(x)
}

/// Permutation matrix exchanging qubits `a` and `b` of a three-qubit register.
pub fn qubit_swap(a: usize, b: usize) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(DIM, DIM);
    for idx in 0..DIM {
        let (ba, bb) = ((idx >> (2 - a)) & 1, (idx >> (2 - b)) & 1);
        let mut out = idx & !(1 << (2 - a)) & !(1 << (2 - b));
        out |= (bb << (2 - a)) | (ba << (2 - b));
        m[(out, idx)] = C64::new(1.0, 0.0);
    }
    m
}

/// `diag(1, e^{iφ})^{⊗3}`.
pub fn local_phase(phi: f64) -> DMatrix<C64> {
    local_phases([phi; 3])
}

/// `diag(1, e^{iφ₀}) ⊗ diag(1, e^{iφ₁}) ⊗ diag(1, e^{iφ₂})`.
pub fn local_phases(phis: [f64; 3]) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(DIM, DIM);
    for idx in 0..DIM {
        let angle: f64 = (0..3).filter(|q| (idx >> (2 - q)) & 1 == 1).map(|q| phis[q]).sum();
        m[(idx, idx)] = C64::from_polar(1.0, angle);
    }
    m
}

/// Symmetries of `s|G⟩⟨G| + (1−s)|W⟩⟨W|`: the qubit permutations and the
/// local phase `diag(1, e^{2πi/3})^{⊗3}`, which fixes `|G⟩` and multiplies
/// `|W⟩` by a global phase. Their 18-element group has an 8-dimensional
/// Hermitian commutant.
pub fn ghz_w_symmetry_generators() -> Vec<DMatrix<C64>> {
    vec![qubit_swap(0, 1), qubit_swap(1, 2), local_phase(2.0 * std::f64::consts::PI / 3.0)]
}

/// Real orthonormal basis, under `⟨A, B⟩ = Re Tr[A†B]`, of the `rank × rank`
/// Hermitian matrices commuting with `group` (all of them without a group).
fn witness_basis(rank: usize, group: Option<&SymmetryGroup>) -> Result<Vec<DMatrix<C64>>> {
    let mut basis: Vec<DMatrix<C64>> = Vec::new();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..rank {
        for j in i..rank {
            let mut parts = Vec::new();
            if i == j {
                let mut m = DMatrix::zeros(rank, rank);
                m[(i, i)] = C64::new(1.0, 0.0);
                parts.push(m);
            } else {
                let mut m = DMatrix::zeros(rank, rank);
                m[(i, j)] = C64::new(h, 0.0);
                m[(j, i)] = C64::new(h, 0.0);
                parts.push(m.clone());
                m[(i, j)] = C64::new(0.0, h);
                m[(j, i)] = C64::new(0.0, -h);
                parts.push(m);
            }
            for mut m in parts {
                if let Some(group) = group {
                    m = group.twirl(&HermitianOperator::from_hermitian_part(&m))?.into_matrix();
                }
                for e in &basis {
                    let overlap = e.dotc(&m).re;
                    m -= e.scale(overlap);
                }
                let norm = m.norm();
                if norm > 1e-9 {
                    basis.push(m.unscale(norm));
                }
            }
        }
    }
    Ok(basis)
}

/// One affine majorant of the dual, `h(y) ≤ b·y + c − a·y`, supplied by the
/// state `u`.
#[derive(Clone)]
struct Cut {
    u: Ket,
    a: Vec<f64>,
    c: f64,
    idle: usize,
}

impl Cut {
    fn at(&self, y: &[f64]) -> f64 {
        self.c - self.a.iter().zip(y).map(|(a, y)| a * y).sum::<f64>()
    }
}

/// Cutting-plane model of the dual, maximized with a proximal term.
struct Bundle {
    /// `Tr[E_a]/r`, the gradient of the linear part of the dual.
    b: Vec<f64>,
    /// Cuts in the QP; idle ones are pruned.
    cuts: Vec<Cut>,
    /// Every cut ever added.
    pool: Vec<Cut>,
}

/// Cuts whose multiplier stayed at zero this many solves are dropped.
const CUT_PATIENCE: usize = 25;

impl Bundle {
    fn add(&mut self, basis: &[DMatrix<C64>], u: &Ket, fill_part: f64) {
        let a = basis
            .iter()
            .map(|e| {
                let mut acc = 0.0;
                for i in 0..e.nrows() {
                    for j in 0..e.ncols() {
                        acc += (u[i].conj() * e[(i, j)] * u[j]).re;
                    }
                }
                acc
            })
            .collect();
        let cut = Cut { u: *u, a, c: fill_part, idle: 0 };
        self.pool.push(cut.clone());
        self.cuts.push(cut);
    }

    fn linear(&self, y: &[f64]) -> f64 {
        self.b.iter().zip(y).map(|(b, y)| b * y).sum()
    }

    fn model(&self, y: &[f64]) -> f64 {
        self.linear(y) + self.cuts.iter().map(|cut| cut.at(y)).fold(f64::INFINITY, f64::min)
    }

    /// Dual estimate at `y` from the pooled cuts.
    fn score(&self, y: &[f64]) -> f64 {
        self.linear(y) + self.pool_minimum(y).1
    }

    /// Tightest pooled cut at `y`: the inner infimum over every state seen so far.
    fn pool_minimum(&self, y: &[f64]) -> (usize, f64) {
        self.pool
            .iter()
            .enumerate()
            .map(|(j, cut)| (j, cut.at(y)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
    }

    /// `argmax_y model(y) − ‖y − center‖²/(2τ)`, or `None` if the QP solver fails.
    fn proximal_step(&mut self, center: &[f64], tau: f64) -> Option<Vec<f64>> {
        use clarabel::algebra::CscMatrix;
        use clarabel::solver::{
            DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
        };
        let d = center.len();
        let m = self.cuts.len();
        let p = CscMatrix::new_from_triplets(d + 1, d + 1, (0..d).collect(), (0..d).collect(), vec![1.0 / tau; d]);
        let mut q: Vec<f64> = center.iter().map(|y| -y / tau).collect();
        q.push(-1.0);
        let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        for (j, cut) in self.cuts.iter().enumerate() {
            for (col, (a, b)) in cut.a.iter().zip(&self.b).enumerate() {
                if a - b != 0.0 {
                    rows.push(j);
                    cols.push(col);
                    vals.push(a - b);
                }
            }
            rows.push(j);
            cols.push(d);
            vals.push(1.0);
        }
        let a = CscMatrix::new_from_triplets(m, d + 1, rows, cols, vals);
        let rhs: Vec<f64> = self.cuts.iter().map(|c| c.c).collect();
        let settings = DefaultSettingsBuilder::default().verbose(false).build().ok()?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &rhs, &[SupportedConeT::NonnegativeConeT(m)], settings).ok()?;
        solver.solve();
        if !matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved) {
            return None;
        }
        let z = &solver.solution.z;
        let z_max = z.iter().copied().fold(0.0, f64::max);
        for (cut, &zj) in self.cuts.iter_mut().zip(z) {
            cut.idle = if zj > 1e-9 * z_max.max(1e-300) { 0 } else { cut.idle + 1 };
        }
        let y = solver.solution.x[..d].to_vec();
        self.cuts.retain(|c| c.idle < CUT_PATIENCE);
        Some(y)
    }
}

/// Restart endpoints added to the bundle per dual evaluation.
const CUTS_PER_BATCH: usize = 6;
/// The proximal weight adapts within `[step0, step0·PROX_RANGE]`.
const PROX_RANGE: f64 = 1e4;
/// The ascent stops once the model predicts less than this increase.
pub const ASCENT_TOL: f64 = 1e-9;

/// Evaluates the roof by maximizing the witness dual with a proximal bundle
/// method.
///
/// The dual is handled in whitened coordinates. With `ρ = V Λ V†` restricted
/// to its support of rank `r`, pure states are written `ψ ∝ V√Λ u` and
/// witnesses `X = V Λ^{−1/2} Y Λ^{−1/2} V† / r`. Then `ρ` becomes `I/r` and
///
/// ```text
/// h(Y) = Tr[Y]/r + inf_u { r⟨u|ρ|u⟩F(ψ(u)) − ⟨u|Y|u⟩ }.
/// ```
///
/// `Y` lives in the span of an orthonormal basis of the commutant of the
/// symmetry group (all Hermitian matrices without generators). Every inner
/// minimization yields affine majorants of `h` from the restart endpoints;
/// the next trial witness maximizes their minimum minus `‖Y − Ŷ‖²/(2·step0)`,
/// where `Ŷ` is the best witness so far. One inner minimization is spent per
/// outer iteration, and the ascent stops early once the model predicts less
/// than [`ASCENT_TOL`] of further progress.
///
/// Only states in the support of `ρ` enter the inner infimum. Every
/// decomposition of `ρ` lives there, so the bound is unaffected, but the
/// returned witness is only guaranteed to satisfy `⟨ψ|X|ψ⟩ ≤ F(ψ)` on that
/// support.
///
/// Each restart endpoint becomes a candidate state, and at the end every
/// iterate is rescored against all candidates collected during the run, so a
/// minimum missed by one batch but found by a later one still counts. The
/// reported value is the largest rescored `h`, floored at zero; restarts
/// agreeing with the rescored minimum decide the [`BoundKind`]. The returned
/// witness is the `X` at that iterate, shifted so that `Tr[Xρ]` equals the
/// reported value.
pub fn fill_mixed(rho: &DensityMatrix, opts: &RoofOptions) -> Result<MeasureResult> {
    check_three_qubit(rho)?;
    opts.validate()?;
    let (eigenvalues, eigenvectors) = eigh(rho.matrix())?;
    let support: Vec<usize> = (0..DIM).filter(|&k| eigenvalues[k] > SUPPORT_TOL).collect();
    let rank = support.len();
    let basis = DMatrix::from_fn(DIM, rank, |i, j| eigenvectors[(i, support[j])]);
    let mut whitening = [[C64::new(0.0, 0.0); DIM]; DIM];
    let mut unwhitening = [[C64::new(0.0, 0.0); DIM]; DIM];
    for (j, &k) in support.iter().enumerate() {
        for i in 0..DIM {
            whitening[i][j] = eigenvectors[(i, k)] * eigenvalues[k].sqrt();
            unwhitening[j][i] = eigenvectors[(i, k)].conj() / eigenvalues[k].sqrt();
        }
    }
    let rho_inv: Option<Op> = (rank == DIM).then(|| {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..DIM).map(|k| unwhitening[k][i].conj() * unwhitening[k][j]).sum())
        })
    });

    let group = match &opts.symmetry_generators {
        Some(gens) => {
            let group = SymmetryGroup::generate(gens)?;
            for u in group.elements() {
                let moved = u * rho.matrix() * u.adjoint();
                if crate::tensor::max_abs_diff(&moved, rho.matrix()) > 1e-10 {
                    return Err(Error::arg("a symmetry generator does not commute with ρ"));
                }
            }
            // Symmetries of ρ preserve its support; act there.
            Some(SymmetryGroup {
                elements: group.elements().iter().map(|u| basis.adjoint() * u * &basis).collect(),
            })
        }
        None => None,
    };
    let witness_basis = witness_basis(rank, group.as_ref())?;
    let d = witness_basis.len();
    let r = rank as f64;

    let assemble = |y: &[f64]| -> DMatrix<C64> {
        witness_basis
            .iter()
            .zip(y)
            .fold(DMatrix::zeros(rank, rank), |acc, (e, &c)| acc + e.scale(c))
    };
    let evaluate = |y_mat: &DMatrix<C64>, k: usize| -> (WhitenedObjective, Batch) {
        let mut y_pad = [[C64::new(0.0, 0.0); DIM]; DIM];
        for i in 0..rank {
            for j in 0..rank {
                y_pad[i][j] = y_mat[(i, j)];
            }
        }
        let products = rho_inv.map(|c| {
            let y_b: Op = std::array::from_fn(|i| {
                std::array::from_fn(|j| (0..DIM).map(|k| y_pad[i][k] * unwhitening[k][j]).sum())
            });
            let a = std::array::from_fn(|i| {
                std::array::from_fn(|j| (0..DIM).map(|k| unwhitening[k][i].conj() * y_b[k][j]).sum())
            });
            ProductSearch { a, c }
        });
        let objective = WhitenedObjective { y: y_pad, b: whitening, b_inv: unwhitening, rank, products };
        let batch = minimize_batch(&objective, opts, derive_seed(opts.seed, k as u64));
        (objective, batch)
    };

    let mut bundle = Bundle {
        b: witness_basis.iter().map(|e| e.trace().re / r).collect(),
        cuts: Vec::new(),
        pool: Vec::new(),
    };
    // The eigenbasis decomposition keeps the model bounded from the start.
    for k in 0..rank {
        let mut u = [C64::new(0.0, 0.0); DIM];
        u[k] = C64::new(1.0, 0.0);
        let psi = PureState::normalized(3, apply(&whitening, &u).to_vec())?;
        bundle.add(&witness_basis, &u, r * eigenvalues[support[k]] * fill_pure(&psi)?);
    }

    let mut diagnostics = Diagnostics {
        restarts_per_batch: opts.inner_restarts,
        witness_dimension: d,
        ..Diagnostics::default()
    };
    // Trial witnesses and their restart values, rescored against the final pool.
    let mut iterates: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut center = vec![0.0; d];
    let mut trial = center.clone();
    let mut tau = opts.step0;

    for k in 1..=opts.outer_iters {
        let y_mat = assemble(&trial);
        let (objective, batch) = evaluate(&y_mat, k);

        let mut endpoints: Vec<&(Ket, f64)> = batch.endpoints.iter().collect();
        endpoints.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut added: Vec<Ket> = Vec::new();
        for (u, inner_value) in endpoints {
            if added.len() == CUTS_PER_BATCH {
                break;
            }
            let duplicate = added.iter().any(|v| {
                let overlap: C64 = v.iter().zip(u).map(|(a, b)| a.conj() * b).sum();
                overlap.norm() > 1.0 - 1e-9
            });
            if !duplicate {
                bundle.add(&witness_basis, u, inner_value - objective.linear_part(u));
                added.push(*u);
            }
        }
        iterates.push((trial.clone(), batch.endpoints.iter().map(|(_, v)| *v).collect()));

        if bundle.score(&trial) > bundle.score(&center) {
            center = trial.clone();
            tau = (tau * 2.0).min(opts.step0 * PROX_RANGE);
        } else {
            tau = (tau * 0.5).max(opts.step0);
        }
        if k == opts.outer_iters {
            break;
        }
        let Some(next) = bundle.proximal_step(&center, tau) else { break };
        let predicted = bundle.model(&next) - bundle.score(&center);
        diagnostics.ascent_gap = predicted;
        if predicted < ASCENT_TOL {
            break;
        }
        trial = next;
    }

    let mut best: Option<(usize, f64, usize, f64)> = None;
    for (k, (y, restart_values)) in iterates.iter().enumerate() {
        let (cut, inner) = bundle.pool_minimum(y);
        let value = bundle.linear(y) + inner;
        let agreeing = restart_values.iter().filter(|v| **v <= inner + AGREEMENT_TOL).count();
        diagnostics.objective_history.push(value);
        diagnostics.restarts_converged.push(agreeing);
        if best.is_none_or(|(_, v, _, _)| value > v) {
            best = Some((k, value, cut, inner));
        }
    }
    let (k, value, cut, inner) = best.expect("at least one outer iteration");
    diagnostics.best_iteration = k + 1;
    diagnostics.converged_fraction = diagnostics.restarts_converged[k] as f64 / opts.inner_restarts as f64;
    let bound_kind = if diagnostics.converged_fraction >= CERTIFY_FRACTION {
        BoundKind::CertifiedLowerBound
    } else {
        BoundKind::Heuristic
    };
    // Shift Y by the inner minimum so every ⟨u|Y|u⟩ ≤ r⟨u|ρ|u⟩F(ψ(u)); the
    // matching X then satisfies F(ψ) ≥ ⟨ψ|X|ψ⟩ on the support and Tr[Xρ] = value.
    let shifted = assemble(&iterates[k].0) + DMatrix::<C64>::identity(rank, rank).scale(inner);
    let inv_root = DMatrix::from_fn(rank, rank, |i, j| {
        if i == j {
            C64::new(1.0 / eigenvalues[support[i]].sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let witness = (&basis * &inv_root * shifted * &inv_root * basis.adjoint()).unscale(r);
    let psi_star = PureState::normalized(3, apply(&whitening, &bundle.pool[cut].u).to_vec())?;
    Ok(MeasureResult {
        value: value.max(0.0),
        bound_kind,
        best_witness: HermitianOperator::from_hermitian_part(&witness),
        inner_minimizer: psi_star,
        diagnostics,
    })
}

/// `Σ pᵢ F(ψᵢ)` for an ensemble realizing `rho`: an upper bound on the roof.
pub fn decomposition_upper_bound(rho: &DensityMatrix, ensemble: &[(f64, PureState)]) -> Result<f64> {
    check_three_qubit(rho)?;
    let rebuilt = mix(ensemble)?;
    let gap = rebuilt.max_abs_diff(rho);
    if gap > 1e-8 {
        return Err(Error::arg(format!("ensemble does not reconstruct ρ (max deviation {gap:e})")));
    }
    ensemble.iter().try_fold(0.0, |acc, (w, psi)| Ok(acc + w * fill_pure(psi)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::{apply_amplitude_damping, DampingParams};
    use crate::states::{ghz_w_mixture, make_state, FamilyKind, StateFamily};
    use crate::tensor::{random_density_matrix, random_pure_state, random_unitary};
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_hermitian(seed: u64) -> HermitianOperator {
        let mut r = rng(seed);
        let m = DMatrix::from_fn(DIM, DIM, |_, _| C64::new(r.sample(StandardNormal), r.sample(StandardNormal)));
        HermitianOperator::from_hermitian_part(&m)
    }

    fn quick() -> RoofOptions {
        RoofOptions { inner_restarts: 20, outer_iters: 60, ..RoofOptions::default() }
    }

    fn damped_g(cos_theta: f64, t: f64) -> DensityMatrix {
        let psi = make_state(StateFamily::from_cos(FamilyKind::GTheta, cos_theta).unwrap());
        apply_amplitude_damping(&psi.projector(), DampingParams::from_ratio(t).unwrap()).unwrap()
    }

    fn g_theta_generators() -> Vec<DMatrix<C64>> {
        use std::f64::consts::FRAC_PI_2;
        vec![qubit_swap(0, 1), qubit_swap(1, 2), local_phases([FRAC_PI_2, -FRAC_PI_2, 0.0])]
    }

    /// Permutation operator sending qubit `q` to position `perm[q]`, built bit by bit.
    fn permutation_operator(perm: [usize; 3]) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(DIM, DIM);
        for idx in 0..DIM {
            let bits: Vec<usize> = (0..3).map(|q| (idx >> (2 - q)) & 1).collect();
            let mut out = 0;
            for q in 0..3 {
                out |= bits[q] << (2 - perm[q]);
            }
            m[(out, idx)] = C64::new(1.0, 0.0);
        }
        m
    }

    const S3: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

    #[test]
    fn inner_objective_examples() {
        let rho = ghz_w_mixture(0.3).unwrap();
        let psi = random_pure_state(3, &mut rng(1)).unwrap();
        let f = fill_pure(&psi).unwrap();
        assert!((inner_objective(&HermitianOperator::zeros(8), &psi, &rho).unwrap() - f).abs() < 1e-12);
        assert!((inner_objective(&HermitianOperator::identity(8), &psi, &rho).unwrap() - f).abs() < 1e-12);

        let x = random_hermitian(2);
        let (_, vectors) = eigh(x.matrix()).unwrap();
        let eigvec = PureState::normalized(3, vectors.column(3).iter().copied().collect()).unwrap();
        let value = inner_objective(&x, &eigvec, &eigvec.projector()).unwrap();
        assert!((value - fill_pure(&eigvec).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn inner_objective_rejects_wrong_dimensions() {
        let rho = ghz_w_mixture(0.3).unwrap();
        let psi = make_state(StateFamily::ghz());
        assert!(matches!(inner_objective(&HermitianOperator::zeros(4), &psi, &rho), Err(Error::Argument(_))));
        let two = PureState::from_bits("01").unwrap();
        assert!(inner_objective(&HermitianOperator::zeros(8), &psi, &two.projector()).is_err());
    }

    #[test]
    fn inner_minimize_trivial_witnesses() {
        let rho = ghz_w_mixture(0.5).unwrap();
        let opts = quick();
        let zero = inner_minimize(&HermitianOperator::zeros(8), &rho, &opts, &mut rng(3)).unwrap();
        assert!(zero.value.abs() < 1e-9, "{}", zero.value);
        assert!(fill_pure(&zero.psi_star).unwrap() < 1e-3);
        let shifted = HermitianOperator::identity(8).scale(-2.5);
        let min = inner_minimize(&shifted, &rho, &opts, &mut rng(4)).unwrap();
        assert!(min.value.abs() < 1e-9, "{}", min.value);
    }

    #[test]
    fn inner_minimum_never_exceeds_roof_for_mid_run_witness() {
        let rho = ghz_w_mixture(0.5).unwrap();
        let partial = fill_mixed(&rho, &RoofOptions { outer_iters: 4, ..quick() }).unwrap();
        let min = inner_minimize(&partial.best_witness, &rho, &quick(), &mut rng(5)).unwrap();
        assert!(min.value <= 7.25 / 9.0 + 1e-9, "{}", min.value);
    }

    #[test]
    fn witness_is_tight_on_full_rank_state() {
        let rho = damped_g(0.6, 0.2);
        let opts = RoofOptions { symmetry_generators: Some(g_theta_generators()), ..RoofOptions::default() };
        let result = fill_mixed(&rho, &opts).unwrap();
        assert!(result.value > 0.1);
        assert!((rho.expectation(&result.best_witness) - result.value).abs() < 1e-9);
        // A search in the original coordinates must not beat the reported witness.
        let check = inner_minimize(&result.best_witness, &rho, &RoofOptions::default(), &mut rng(6)).unwrap();
        assert!(check.value >= result.value - 1e-6, "{} vs {}", check.value, result.value);
        assert!(check.value <= result.value + 1e-6, "{} vs {}", check.value, result.value);
    }

    #[test]
    fn split_index_places_the_cut_qubit() {
        assert_eq!(split_index(0, 1, 0b10), 0b110);
        assert_eq!(split_index(1, 1, 0b10), 0b110);
        assert_eq!(split_index(1, 0, 0b11), 0b101);
        assert_eq!(split_index(2, 1, 0b01), 0b011);
    }

    #[test]
    fn product_search_finds_product_witness_peak() {
        // X = |φχ⟩⟨φχ| peaks at 1 on the product state itself.
        let phi = random_pure_state(1, &mut rng(7)).unwrap();
        let chi = random_pure_state(2, &mut rng(8)).unwrap();
        let target = crate::tensor::tensor_product(&phi, &chi).unwrap();
        let x = to_op(target.projector().matrix());
        let search = WitnessObjective::new(x);
        let start = haar_start(DIM, 9);
        let found = search.products.refine(0, &start).unwrap();
        assert!((search.products.quotient(&found) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn twirl_by_identity_is_a_no_op() {
        let x = random_hermitian(10);
        let out = twirl(&x, &[DMatrix::identity(8, 8)]).unwrap();
        assert!(crate::tensor::max_abs_diff(out.matrix(), x.matrix()) < 1e-15);
    }

    #[test]
    fn swap_twirl_matches_explicit_s3_average() {
        let x = random_hermitian(11);
        let out = twirl(&x, &[qubit_swap(0, 1), qubit_swap(1, 2), qubit_swap(0, 2)]).unwrap();
        let mut oracle = DMatrix::<C64>::zeros(DIM, DIM);
        for perm in S3 {
            let p = permutation_operator(perm);
            oracle += &p * x.matrix() * p.adjoint();
        }
        oracle /= C64::new(6.0, 0.0);
        assert!(crate::tensor::max_abs_diff(out.matrix(), &oracle) < 1e-12);
        for perm in S3 {
            let p = permutation_operator(perm);
            let moved = &p * out.matrix() * p.adjoint();
            assert!(crate::tensor::max_abs_diff(&moved, out.matrix()) < 1e-12);
        }
    }

    #[test]
    fn ghz_w_symmetry_group() {
        let group = SymmetryGroup::generate(&ghz_w_symmetry_generators()).unwrap();
        assert_eq!(group.order(), 18);
        assert_eq!(group.commutant_dimension(), 8);
        let rho = ghz_w_mixture(0.4).unwrap();
        for u in group.elements() {
            let moved = u * rho.matrix() * u.adjoint();
            assert!(crate::tensor::max_abs_diff(&moved, rho.matrix()) < 1e-12);
        }
        assert_eq!(SymmetryGroup::generate(&[qubit_swap(0, 1), qubit_swap(1, 2)]).unwrap().order(), 6);
    }

    #[test]
    fn group_generation_errors() {
        // An irrational phase generates an infinite group.
        assert!(matches!(SymmetryGroup::generate(&[local_phase(1.0)]), Err(Error::Argument(_))));
        let not_unitary = DMatrix::<C64>::identity(8, 8).scale(2.0);
        assert!(SymmetryGroup::generate(&[not_unitary]).is_err());
        assert!(SymmetryGroup::generate(&[]).is_err());
    }

    #[test]
    fn non_commuting_generator_is_rejected() {
        let rho = damped_g(0.6, 0.2);
        let opts = RoofOptions { symmetry_generators: Some(vec![local_phase(std::f64::consts::FRAC_PI_2)]), ..quick() };
        assert!(matches!(fill_mixed(&rho, &opts), Err(Error::Argument(_))));
    }

    #[test]
    fn twirled_and_plain_ascent_agree() {
        for s in [0.2, 0.7] {
            let rho = ghz_w_mixture(s).unwrap();
            let plain = fill_mixed(&rho, &RoofOptions::default()).unwrap();
            let twirled = fill_mixed(
                &rho,
                &RoofOptions { symmetry_generators: Some(ghz_w_symmetry_generators()), ..RoofOptions::default() },
            )
            .unwrap();
            assert!((plain.value - twirled.value).abs() < 2e-3);
            assert!(twirled.diagnostics.witness_dimension < plain.diagnostics.witness_dimension);
        }
    }

    #[test]
    fn pure_endpoints() {
        let g = fill_mixed(&make_state(StateFamily::ghz()).projector(), &RoofOptions::default()).unwrap();
        assert!((g.value - 1.0).abs() < 5e-3);
        let w = fill_mixed(&make_state(StateFamily::w()).projector(), &RoofOptions::default()).unwrap();
        assert!((w.value - 8.0 / 9.0).abs() < 5e-3);
        assert_eq!(w.bound_kind, BoundKind::CertifiedLowerBound);
    }

    #[test]
    fn ghz_w_mixture_curve() {
        for i in [1, 4, 5, 9] {
            let s = i as f64 / 10.0;
            let analytic = (5.0 * s * s - 4.0 * s + 8.0) / 9.0;
            let r = fill_mixed(&ghz_w_mixture(s).unwrap(), &RoofOptions::default()).unwrap();
            assert!(r.value >= analytic - 2e-2 && r.value <= analytic + 5e-3, "s={s}: {}", r.value);
        }
    }

    #[test]
    fn separable_mixture_is_zero() {
        let rho = crate::states::mix(&[
            (0.5, PureState::from_bits("000").unwrap()),
            (0.5, PureState::from_bits("111").unwrap()),
        ])
        .unwrap();
        let r = fill_mixed(&rho, &RoofOptions::default()).unwrap();
        assert!(r.value.abs() < 1e-6);
        assert!(r.consistent_with_zero());
    }

    #[test]
    fn damped_g_theta_dies_when_gmc_does() {
        let opts = RoofOptions { symmetry_generators: Some(g_theta_generators()), ..RoofOptions::default() };
        let alive = fill_mixed(&damped_g(std::f64::consts::FRAC_1_SQRT_2, 0.5), &opts).unwrap();
        assert!(alive.value > 1e-3 && alive.bound_kind == BoundKind::CertifiedLowerBound);
        let dead = fill_mixed(&damped_g(std::f64::consts::FRAC_1_SQRT_2, 0.8), &opts).unwrap();
        assert!(dead.consistent_with_zero(), "{:?} {}", dead.bound_kind, dead.value);
    }

    #[test]
    fn decomposition_bounds() {
        let ghz = make_state(StateFamily::ghz());
        let w = make_state(StateFamily::w());
        let pure = decomposition_upper_bound(&ghz.projector(), &[(1.0, ghz.clone())]).unwrap();
        assert!((pure - 1.0).abs() < 1e-12);
        let a = PureState::from_bits("000").unwrap();
        let b = PureState::from_bits("111").unwrap();
        let sep = crate::states::mix(&[(0.5, a.clone()), (0.5, b.clone())]).unwrap();
        assert!(decomposition_upper_bound(&sep, &[(0.5, a), (0.5, b)]).unwrap().abs() < 1e-12);

        let half = ghz_w_mixture(0.5).unwrap();
        let naive = decomposition_upper_bound(&half, &[(0.5, ghz.clone()), (0.5, w.clone())]).unwrap();
        assert!((naive - 17.0 / 18.0).abs() < 1e-12);
        let roof = fill_mixed(&half, &RoofOptions::default()).unwrap();
        assert!(roof.value <= naive + 1e-8);
        assert!(matches!(decomposition_upper_bound(&half, &[(1.0, ghz)]), Err(Error::Argument(_))));
    }

    #[test]
    fn reported_value_is_running_maximum() {
        let rho = damped_g(0.8, 0.2);
        let opts = RoofOptions { symmetry_generators: Some(g_theta_generators()), ..quick() };
        let r = fill_mixed(&rho, &opts).unwrap();
        let history = &r.diagnostics.objective_history;
        let running: Vec<f64> = history
            .iter()
            .scan(f64::NEG_INFINITY, |m, v| {
                *m = m.max(*v);
                Some(*m)
            })
            .collect();
        assert!(running.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(r.value, running.last().unwrap().max(0.0));
        assert_eq!(history[r.diagnostics.best_iteration - 1], *running.last().unwrap());
    }

    #[test]
    fn results_are_schedule_independent() {
        let rho = damped_g(0.8, 0.3);
        let opts = RoofOptions { symmetry_generators: Some(g_theta_generators()), seed: 42, ..quick() };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| fill_mixed(&rho, &opts).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.diagnostics, b.diagnostics);
        let other = fill_mixed(&rho, &RoofOptions { seed: 43, ..opts.clone() }).unwrap();
        assert_ne!(a.diagnostics.objective_history, other.diagnostics.objective_history);
    }

    #[test]
    fn convexity_spot_check() {
        let mut r = rng(12);
        for _ in 0..2 {
            let rho1 = random_density_matrix(3, 2, &mut r).unwrap();
            let rho2 = random_density_matrix(3, 2, &mut r).unwrap();
            let lambda: f64 = r.random();
            let mixed = DensityMatrix::new(3, rho1.matrix().scale(lambda) + rho2.matrix().scale(1.0 - lambda)).unwrap();
            let f = |rho: &DensityMatrix| fill_mixed(rho, &quick()).unwrap().value;
            assert!(f(&mixed) <= lambda * f(&rho1) + (1.0 - lambda) * f(&rho2) + 2e-2);
        }
    }

    #[test]
    fn options_validation_and_names() {
        assert!(RoofOptions::default().validate().is_ok());
        assert!(RoofOptions { inner_restarts: 0, ..RoofOptions::default() }.validate().is_err());
        assert!(RoofOptions { step0: 0.0, ..RoofOptions::default() }.validate().is_err());
        assert!(RoofOptions { inner_tol: -1.0, ..RoofOptions::default() }.validate().is_err());
        for kind in [BoundKind::ExactAnalytic, BoundKind::CertifiedLowerBound, BoundKind::Heuristic] {
            assert_eq!(kind.name().parse::<BoundKind>().unwrap(), kind);
        }
        let two_qubit = PureState::from_bits("01").unwrap().projector();
        assert!(matches!(fill_mixed(&two_qubit, &quick()), Err(Error::Argument(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn pure_states_reproduce_fill(seed in any::<u64>()) {
            let psi = random_pure_state(3, &mut rng(seed)).unwrap();
            let r = fill_mixed(&psi.projector(), &quick()).unwrap();
            prop_assert!((r.value - fill_pure(&psi).unwrap()).abs() < 5e-3);
        }

        #[test]
        fn roof_is_invariant_under_local_unitaries(seed in any::<u64>()) {
            let mut r = rng(seed);
            let rho = random_density_matrix(3, 2, &mut r).unwrap();
            let local = crate::tensor::tensor_product(
                &crate::tensor::tensor_product(&random_unitary(2, &mut r), &random_unitary(2, &mut r)),
                &random_unitary(2, &mut r),
            );
            let moved = DensityMatrix::new(3, &local * rho.matrix() * local.adjoint()).unwrap();
            let a = fill_mixed(&rho, &quick()).unwrap().value;
            let b = fill_mixed(&moved, &quick()).unwrap().value;
            prop_assert!((a - b).abs() < 2e-3, "{} vs {}", a, b);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn roof_never_exceeds_eigen_ensemble(seed in any::<u64>()) {
            let rho = random_density_matrix(3, 3, &mut rng(seed)).unwrap();
            let (values, vectors) = eigh(rho.matrix()).unwrap();
            let ensemble: Vec<(f64, PureState)> = values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v > 1e-14)
                .map(|(k, v)| (*v, PureState::normalized(3, vectors.column(k).iter().copied().collect()).unwrap()))
                .collect();
            let total: f64 = ensemble.iter().map(|(w, _)| w).sum();
            let ensemble: Vec<_> = ensemble.into_iter().map(|(w, p)| (w / total, p)).collect();
            let upper = decomposition_upper_bound(&rho, &ensemble).unwrap();
            let r = fill_mixed(&rho, &quick()).unwrap();
            prop_assert!(r.value <= upper + 1e-8);
        }
    }
}
