//! Closed-form entanglement quantifiers.
//!
//! * concurrence Fill of a three-qubit pure state: the square root of the area
//!   of the triangle whose sides are the squared one-to-other concurrences,
//!   normalized so that GHZ has Fill 1;
//! * genuine multipartite concurrence (GMC) of three-qubit X-shaped density
//!   matrices, with its closed form along damped `G(θ)` and the resulting
//!   sudden-death onset time;
//! * Wootters' two-qubit concurrence.

use nalgebra::DMatrix;

use crate::damping::DampingParams;
use crate::error::{Error, Result};
use crate::tensor::{eigh, DensityMatrix, PureState, C64};

/// Heron products in `[−HERON_CLAMP, 0)` are rounding noise and clamp to zero.
pub const HERON_CLAMP: f64 = 1e-12;
/// Default modulus below which an off-X entry counts as zero.
pub const X_FORM_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;

/// Squared one-to-other concurrences `C²_{A(BC)}, C²_{B(CA)}, C²_{C(AB)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleSides {
    pub c2_a: f64,
    pub c2_b: f64,
    pub c2_c: f64,
    /// Semi-perimeter.
    pub q_half: f64,
}

impl TriangleSides {
    pub fn new(c2_a: f64, c2_b: f64, c2_c: f64) -> Self {
        TriangleSides { c2_a, c2_b, c2_c, q_half: 0.5 * (c2_a + c2_b + c2_c) }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.c2_a, self.c2_b, self.c2_c]
    }

    /// `Q(Q−a)(Q−b)(Q−c)`, unclamped.
    pub fn heron_product(&self) -> f64 {
        let q = self.q_half;
        q * (q - self.c2_a) * (q - self.c2_b) * (q - self.c2_c)
    }

    /// Every side at most the sum of the other two, within `tol`.
    pub fn satisfies_triangle_inequality(&self, tol: f64) -> bool {
        let [a, b, c] = self.as_array();
        a <= b + c + tol && b <= a + c + tol && c <= a + b + tol
    }
}

/// `4·det ρᵢ` for qubit `qubit` of an 8-amplitude register (no normalization).
pub(crate) fn four_det_marginal(amps: &[C64], qubit: usize) -> f64 {
    let bit = 1 << (2 - qubit);
    let (mut r00, mut r11, mut r01) = (0.0, 0.0, C64::new(0.0, 0.0));
    for b in (0..8).filter(|b| b & bit == 0) {
        let (lo, hi) = (amps[b], amps[b | bit]);
        r00 += lo.norm_sqr();
        r11 += hi.norm_sqr();
        r01 += lo * hi.conj();
    }
    4.0 * (r00 * r11 - r01.norm_sqr())
}

pub(crate) fn sides_of(amps: &[C64]) -> TriangleSides {
    TriangleSides::new(four_det_marginal(amps, 0), four_det_marginal(amps, 1), four_det_marginal(amps, 2))
}

fn fill_from_sides(sides: &TriangleSides) -> Result<f64> {
    let heron = sides.heron_product();
    if heron < -HERON_CLAMP {
        return Err(Error::Numerical(format!(
            "concurrence triangle violates monogamy (Heron product {heron:e}, sides {:?})",
            sides.as_array()
        )));
    }
    Ok((16.0 / 3.0 * heron.max(0.0)).powf(0.25))
}

/// Fill of normalized amplitudes; used on the optimizer's hot path.
pub(crate) fn fill_amplitudes(amps: &[C64]) -> f64 {
    let heron = sides_of(amps).heron_product().max(0.0);
    (16.0 / 3.0 * heron).powf(0.25)
}

/// Fill and its ambient gradient `g`, such that `dF = Re Σ conj(g_b)·dψ_b`.
///
/// The extension off the unit sphere is the same polynomial formula, so only
/// the tangential part of `g` is meaningful. The gradient is zero on the
/// biseparable set where the Heron product vanishes.
pub(crate) fn fill_with_gradient(amps: &[C64; 8]) -> (f64, [C64; 8]) {
    let mut sides = [0.0; 3];
    let mut side_grads = [[C64::new(0.0, 0.0); 8]; 3];
    for (qubit, (side, grad)) in sides.iter_mut().zip(side_grads.iter_mut()).enumerate() {
        let bit = 1 << (2 - qubit);
        let (mut r00, mut r11, mut r01) = (0.0, 0.0, C64::new(0.0, 0.0));
        for b in (0..8).filter(|b| b & bit == 0) {
            let (lo, hi) = (amps[b], amps[b | bit]);
            r00 += lo.norm_sqr();
            r11 += hi.norm_sqr();
            r01 += lo * hi.conj();
        }
        *side = 4.0 * (r00 * r11 - r01.norm_sqr());
        // ∂det/∂ψ*(0,r) = ρ₁₁ψ(0,r) − ρ₀₁ψ(1,r);  ∂det/∂ψ*(1,r) = ρ₀₀ψ(1,r) − ρ₁₀ψ(0,r).
        // The real gradient of 4·det is 2·4·∂det/∂ψ*.
        for b in (0..8).filter(|b| b & bit == 0) {
            let (lo, hi) = (amps[b], amps[b | bit]);
            grad[b] = (lo * r11 - r01 * hi) * 8.0;
            grad[b | bit] = (hi * r00 - r01.conj() * lo) * 8.0;
        }
    }
    let q = 0.5 * (sides[0] + sides[1] + sides[2]);
    let u = [q, q - sides[0], q - sides[1], q - sides[2]];
    let heron = u[0] * u[1] * u[2] * u[3];
    let mut grad = [C64::new(0.0, 0.0); 8];
    if heron <= 0.0 {
        return (0.0, grad);
    }
    let fill = (16.0 / 3.0 * heron).powf(0.25);
    let d_fill_d_heron = fill / (4.0 * heron);
    // Raising side k by one raises Q and the two other factors by ½ and
    // lowers (Q − side_k) by ½.
    for k in 0..3 {
        let mut d_heron = 0.5 * u[1] * u[2] * u[3];
        for j in 1..4 {
            let others: f64 = (0..4).filter(|&m| m != j).map(|m| u[m]).product();
            d_heron += if j == k + 1 { -0.5 * others } else { 0.5 * others };
        }
        let weight = d_fill_d_heron * d_heron;
        for (g, s) in grad.iter_mut().zip(side_grads[k].iter()) {
            *g += s * weight;
        }
    }
    (fill, grad)
}

fn require_three_qubit_state(psi: &PureState) -> Result<()> {
    if psi.n_qubits() != 3 {
        return Err(Error::arg(format!("expected a 3-qubit state, got {} qubits", psi.n_qubits())));
    }
    let norm = psi.amplitudes().norm_squared();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::arg(format!("state is not normalized: ‖ψ‖² = {norm}")));
    }
    Ok(())
}

/// `C²_{i(jk)} = 4·det ρᵢ`, in `[0, 1]`.
pub fn marginal_concurrence_squared(psi: &PureState, qubit: usize) -> Result<f64> {
    require_three_qubit_state(psi)?;
    if qubit > 2 {
        return Err(Error::arg(format!("qubit index {qubit} out of range")));
    }
    Ok(four_det_marginal(psi.amplitudes().as_slice(), qubit).clamp(0.0, 1.0))
}

pub fn triangle_sides(psi: &PureState) -> Result<TriangleSides> {
    require_three_qubit_state(psi)?;
    Ok(sides_of(psi.amplitudes().as_slice()))
}

/// Concurrence Fill `[(16/3)·Q(Q−C²_A)(Q−C²_B)(Q−C²_C)]^{1/4}`.
pub fn fill_pure(psi: &PureState) -> Result<f64> {
    fill_from_sides(&triangle_sides(psi)?)
}

/// True iff every entry off the main and anti-diagonal has modulus `≤ tol`.
pub fn is_x_form(rho: &DensityMatrix, tol: f64) -> bool {
    let dim = rho.dim();
    (0..dim).all(|a| (0..dim).all(|b| a == b || a + b == dim - 1 || rho.entry(a, b).norm() <= tol))
}

/// Genuine multipartite concurrence of a three-qubit X-shaped state:
/// `2·max(0, maxⱼ[|ρ_{j,7−j}| − Σ_{k≠j} √(ρ_kk ρ_{7−k,7−k})])`, j, k ∈ 0..4.
pub fn gmc_x(rho: &DensityMatrix) -> Result<f64> {
    if rho.n_qubits() != 3 {
        return Err(Error::arg("GMC X-state formula needs a 3-qubit density matrix"));
    }
    if !is_x_form(rho, X_FORM_TOL) {
        return Err(Error::arg(
            "density matrix is not X-shaped; the closed-form GMC does not apply, use fill_mixed",
        ));
    }
    let pair_weight: Vec<f64> = (0..4)
        .map(|k| (rho.entry(k, k).re.max(0.0) * rho.entry(7 - k, 7 - k).re.max(0.0)).sqrt())
        .collect();
    let total: f64 = pair_weight.iter().sum();
    let best = (0..4)
        .map(|j| rho.entry(j, 7 - j).norm() - (total - pair_weight[j]))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((2.0 * best).max(0.0))
}

/// Closed-form GMC of `G(θ)` after damping for `t/τ ≥ 0`:
/// `max[0, |sin2θ|p³ − 6cos²θ p³q³]`.
pub fn gmc_g_theta(theta: f64, t_over_tau: f64) -> f64 {
    let (p, q) = DampingParams::from_ratio(t_over_tau.max(0.0))
        .expect("non-negative ratio")
        .coefficients();
    let p3 = p.powi(3);
    let value = (2.0 * theta).sin().abs() * p3 - 6.0 * theta.cos().powi(2) * p3 * q.powi(3);
    value.max(0.0)
}

/// Relative slack on the `|tanθ| < 3` test, so `cosθ = 1/√10` counts as the
/// excluded boundary despite rounding.
const THRESHOLD_SLACK: f64 = 1e-12;

/// Sudden-death time of damped `G(θ)` solving `|tanθ| = 3(1−e^{−t/τ})^{3/2}`.
///
/// `None` when `|tanθ| ≥ 3` (including the pure `|000⟩` limit). The pure
/// `|111⟩` limit has no genuine entanglement to begin with and yields `0`.
pub fn esd_onset_g_theta(theta: f64) -> Option<f64> {
    let (s, c) = (theta.sin().abs(), theta.cos().abs());
    // |tanθ|/3 < 1  ⇔  s < 3c, written without dividing by cosθ.
    if s >= 3.0 * c * (1.0 - THRESHOLD_SLACK) {
        return None;
    }
    let ratio = (s / (3.0 * c)).powf(2.0 / 3.0);
    Some(-(-ratio).ln_1p())
}

fn sigma_y_sigma_y() -> DMatrix<C64> {
    let o = C64::new(0.0, 0.0);
    let p = C64::new(1.0, 0.0);
    DMatrix::from_row_slice(4, 4, &[o, o, o, -p, o, o, p, o, o, p, o, o, -p, o, o, o])
}

/// Eigenvalues of `ρ` below this fraction of the largest are treated as zero.
const WOOTTERS_SUPPORT_TOL: f64 = 1e-13;

/// Wootters concurrence `max(0, λ₁−λ₂−λ₃−λ₄)`.
///
/// With `ρ = WW†` over the numerical support, the `λᵢ` are the singular
/// values of `Wᵀ(σy⊗σy)W`. Taking them directly avoids the square roots of
/// rounding noise that spoil rank-deficient states.
pub fn wootters_concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.n_qubits() != 2 {
        return Err(Error::arg("Wootters concurrence needs a 2-qubit density matrix"));
    }
    let (vals, vecs) = eigh(rho.matrix())?;
    let top = vals.iter().copied().fold(0.0, f64::max);
    let support: Vec<usize> = (0..4).filter(|&i| vals[i] > WOOTTERS_SUPPORT_TOL * top).collect();
    let w = DMatrix::from_fn(4, support.len(), |r, c| vecs[(r, support[c])] * vals[support[c]].sqrt());
    let tau = w.transpose() * sigma_y_sigma_y() * &w;
    let mut lambdas: Vec<f64> = tau.svd(false, false).singular_values.iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let lead = lambdas.first().copied().unwrap_or(0.0);
    Ok((lead - lambdas.iter().skip(1).sum::<f64>()).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::apply_amplitude_damping;
    use crate::states::{make_state, FamilyKind, StateFamily};
    use crate::tensor::{partial_trace, random_pure_state, random_unitary, tensor_product, TensorProduct};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn damped_g(theta: f64, t: f64) -> DensityMatrix {
        let psi = make_state(StateFamily::new(FamilyKind::GTheta, theta).unwrap());
        apply_amplitude_damping(&psi.projector(), DampingParams::from_ratio(t).unwrap()).unwrap()
    }

    fn bell_times_zero() -> PureState {
        let r = 0.5f64.sqrt();
        let bell = PureState::new(2, vec![C64::new(r, 0.), C64::new(0., 0.), C64::new(0., 0.), C64::new(r, 0.)]).unwrap();
        bell.tensor(&PureState::basis(1, 0).unwrap()).unwrap()
    }

    #[test]
    fn marginal_concurrences() {
        let ghz = make_state(StateFamily::ghz());
        let w = make_state(StateFamily::w());
        let ground = PureState::from_bits("000").unwrap();
        for i in 0..3 {
            assert!((marginal_concurrence_squared(&ghz, i).unwrap() - 1.0).abs() < 1e-14);
            assert!((marginal_concurrence_squared(&w, i).unwrap() - 8.0 / 9.0).abs() < 1e-14);
            assert_eq!(marginal_concurrence_squared(&ground, i).unwrap(), 0.0);
            // Cross-check with 4·det of the partial-trace marginal.
            let rho_i = partial_trace(&w.projector(), &[i]).unwrap();
            let det = rho_i.entry(0, 0) * rho_i.entry(1, 1) - rho_i.entry(0, 1) * rho_i.entry(1, 0);
            assert!((4.0 * det.re - 8.0 / 9.0).abs() < 1e-14);
        }
        assert!(marginal_concurrence_squared(&ghz, 3).is_err());
        assert!(marginal_concurrence_squared(&PureState::basis(2, 0).unwrap(), 0).is_err());
    }

    #[test]
    fn fill_endpoints() {
        assert!((fill_pure(&make_state(StateFamily::ghz())).unwrap() - 1.0).abs() < 1e-14);
        assert!((fill_pure(&make_state(StateFamily::w())).unwrap() - 8.0 / 9.0).abs() < 1e-14);
        assert_eq!(fill_pure(&bell_times_zero()).unwrap(), 0.0);
        assert_eq!(fill_pure(&PureState::from_bits("101").unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn monogamy_violation_is_reported() {
        let sides = TriangleSides::new(1.0, 0.1, 0.1);
        assert!(matches!(fill_from_sides(&sides), Err(Error::Numerical(_))));
        let rounding = TriangleSides::new(1.0, 1.0 - 1e-15, 0.0);
        assert_eq!(fill_from_sides(&rounding).unwrap(), 0.0);
    }

    #[test]
    fn fill_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let psi = random_pure_state(3, &mut rng).unwrap();
            let amps: [C64; 8] = std::array::from_fn(|i| psi.amplitude(i));
            let (f, g) = fill_with_gradient(&amps);
            assert!((f - fill_pure(&psi).unwrap()).abs() < 1e-14);
            let h = 1e-6;
            for k in 0..8 {
                for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                    let mut plus = amps;
                    let mut minus = amps;
                    plus[k] += dir * h;
                    minus[k] -= dir * h;
                    let fd = (fill_amplitudes(&plus) - fill_amplitudes(&minus)) / (2.0 * h);
                    let analytic = (g[k].conj() * dir).re;
                    assert!((fd - analytic).abs() < 1e-6, "k={k}: fd {fd} vs {analytic}");
                }
            }
        }
    }

    #[test]
    fn zero_fill_iff_a_side_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            // Random biseparable states across a random cut, plus generic states.
            let one = random_pure_state(1, &mut rng).unwrap();
            let two = random_pure_state(2, &mut rng).unwrap();
            let bisep = one.tensor(&two).unwrap();
            let cut = rng.random_range(0..3);
            let perm = random_permutation_of_cut(&bisep, cut);
            let sides = triangle_sides(&perm).unwrap();
            assert!(sides.as_array().iter().any(|&s| s.abs() < 1e-10));
            // The fourth root magnifies rounding in the vanishing side.
            assert!(fill_pure(&perm).unwrap() < 1e-6);

            let generic = random_pure_state(3, &mut rng).unwrap();
            let sides = triangle_sides(&generic).unwrap();
            assert!(sides.satisfies_triangle_inequality(1e-10));
            assert!(sides.as_array().iter().all(|&s| s > 1e-10));
            assert!(fill_pure(&generic).unwrap() > 1e-10);
        }
    }

    // Moves the single qubit of a `1 ⊗ 2` product onto position `cut`.
    fn random_permutation_of_cut(psi: &PureState, cut: usize) -> PureState {
        let amps: Vec<C64> = (0..8)
            .map(|target| {
                let bits = [(target >> 2) & 1, (target >> 1) & 1, target & 1];
                let lone = bits[cut];
                let rest: Vec<usize> = (0..3).filter(|&q| q != cut).map(|q| bits[q]).collect();
                psi.amplitude((lone << 2) | (rest[0] << 1) | rest[1])
            })
            .collect();
        PureState::new(3, amps).unwrap()
    }

    #[test]
    fn fill_is_local_unitary_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let psi = random_pure_state(3, &mut rng).unwrap();
            let u = tensor_product(
                &tensor_product(&random_unitary(2, &mut rng), &random_unitary(2, &mut rng)),
                &random_unitary(2, &mut rng),
            );
            let moved = crate::tensor::apply_unitary(&u, &psi).unwrap();
            assert!((fill_pure(&psi).unwrap() - fill_pure(&moved).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn x_form_detection() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            assert!(is_x_form(&damped_g(rng.random_range(0.0..PI), rng.random_range(0.0..4.0)), 1e-12));
        }
        let w = make_state(StateFamily::new(FamilyKind::WTheta, 0.7).unwrap());
        let damped = apply_amplitude_damping(&w.projector(), DampingParams::from_ratio(0.5).unwrap()).unwrap();
        assert!(!is_x_form(&damped, 1e-10));
        assert!(is_x_form(&DensityMatrix::maximally_mixed(3).unwrap(), 0.0));
    }

    #[test]
    fn gmc_special_cases() {
        let ghz = make_state(StateFamily::ghz()).projector();
        assert!((gmc_x(&ghz).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(gmc_x(&DensityMatrix::maximally_mixed(3).unwrap()).unwrap(), 0.0);
        assert!((gmc_g_theta(FRAC_PI_4, 0.0) - 1.0).abs() < 1e-15);
        let w = make_state(StateFamily::w()).projector();
        assert!(matches!(gmc_x(&w), Err(Error::Argument(_))));
    }

    #[test]
    fn gmc_matches_closed_form_on_grid() {
        for i in 0..20 {
            for j in 0..20 {
                let theta = PI * (i as f64 + 0.5) / 20.0;
                let t = 3.0 * j as f64 / 19.0;
                let numeric = gmc_x(&damped_g(theta, t)).unwrap();
                assert!((numeric - gmc_g_theta(theta, t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn onset_values() {
        let t = esd_onset_g_theta((0.5f64.sqrt()).acos()).unwrap();
        assert!((t - (-(1.0 - 3f64.powf(-2.0 / 3.0)).ln())).abs() < 1e-12);
        assert!((t - 0.6553).abs() < 1e-4);
        assert!(gmc_g_theta(0.5f64.sqrt().acos(), 0.6553).abs() < 1e-4);
        let t = esd_onset_g_theta(0.88f64.acos()).unwrap();
        assert!((t - 0.3838).abs() < 1e-4, "{t}");
        assert!(esd_onset_g_theta(0.17f64.acos()).is_none());
        assert!(esd_onset_g_theta((0.1f64.sqrt()).acos()).is_none());
        assert!(esd_onset_g_theta(0.32f64.acos()).is_some());
        assert!(esd_onset_g_theta(0.31f64.acos()).is_none());
        // |111⟩ dies immediately, |000⟩ never had anything to lose.
        assert_eq!(esd_onset_g_theta(0.0), Some(0.0));
        assert!(esd_onset_g_theta(PI).unwrap() < 1e-10);
        assert_eq!(esd_onset_g_theta(FRAC_PI_2), None);
    }

    #[test]
    fn no_onset_below_threshold() {
        let theta = 0.17f64.acos();
        for k in 0..=1000 {
            assert!(gmc_g_theta(theta, 10.0 * k as f64 / 1000.0) > 0.0);
        }
    }

    proptest! {
        #[test]
        fn gmc_sign_flips_at_onset(theta in 0.02f64..1.2) {
            // |tanθ| < 3 on this range.
            let onset = esd_onset_g_theta(theta).unwrap();
            prop_assert!(gmc_g_theta(theta, onset - 1e-3) > 0.0);
            prop_assert_eq!(gmc_g_theta(theta, onset + 1e-3), 0.0);
        }
    }

    fn two_qubit_damped(theta: f64, t: f64) -> DensityMatrix {
        let (c, s) = (theta.cos(), theta.sin());
        let psi = PureState::new(2, vec![C64::new(s, 0.), C64::new(0., 0.), C64::new(0., 0.), C64::new(c, 0.)]).unwrap();
        apply_amplitude_damping(&psi.projector(), DampingParams::from_ratio(t).unwrap()).unwrap()
    }

    #[test]
    fn wootters_known_values() {
        let r = 0.5f64.sqrt();
        let bell = PureState::new(2, vec![C64::new(r, 0.), C64::new(0., 0.), C64::new(0., 0.), C64::new(r, 0.)]).unwrap();
        assert!((wootters_concurrence(&bell.projector()).unwrap() - 1.0).abs() < 1e-7);
        assert!(wootters_concurrence(&PureState::from_bits("01").unwrap().projector()).unwrap() < 1e-7);
        assert!(wootters_concurrence(&DensityMatrix::maximally_mixed(3).unwrap()).is_err());
    }

    #[test]
    fn wootters_on_damped_two_qubit_states() {
        for (theta, t) in [(0.3f64, 0.1), (0.9, 0.5), (1.2, 2.0), (0.6, 1.0)] {
            let (p, q) = DampingParams::from_ratio(t).unwrap().coefficients();
            let (c, s) = (theta.cos(), theta.sin());
            let expected = (2.0 * (p * p * s * c - p * p * q * q * c * c)).max(0.0);
            let got = wootters_concurrence(&two_qubit_damped(theta, t)).unwrap();
            assert!((got - expected).abs() < 1e-12, "θ={theta} t={t}: {got} vs {expected}");
        }
    }
}
