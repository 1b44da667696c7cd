//! Independent zero-temperature amplitude damping on every qubit.
//!
//! Each system qubit exchanges its excitation with a private cavity qubit
//! that starts in `|0⟩`:
//!
//! ```text
//! |1⟩|0⟩ → p|1⟩|0⟩ + q|0⟩|1⟩,   |0⟩|0⟩ → |0⟩|0⟩,
//! p = √(e^{−t/τ}),  q = √(1 − e^{−t/τ}).
//! ```
//!
//! [`apply_amplitude_damping`] uses the equivalent Kraus pair
//! `K₀ = diag(1, p)`, `K₁ = q|0⟩⟨1|`. [`purified_evolution`] runs the unitary
//! system+cavity picture and traces the cavities out; it is the reference the
//! Kraus path is tested against.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{partial_trace_matrix, DensityMatrix, PureState, C64, MAX_QUBITS};

/// Elapsed time and decay constant, stored as the ratio `t/τ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampingParams {
    t_over_tau: f64,
}

impl DampingParams {
    pub fn new(t: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::arg(format!("decay constant τ must be positive, got {tau}")));
        }
        if !(t >= 0.0) || t.is_infinite() {
            return Err(Error::arg(format!("time must be finite and non-negative, got {t}")));
        }
        Ok(DampingParams { t_over_tau: t / tau })
    }

    /// Time in units of `τ`.
    pub fn from_ratio(t_over_tau: f64) -> Result<Self> {
        DampingParams::new(t_over_tau, 1.0)
    }

    pub fn t_over_tau(&self) -> f64 {
        self.t_over_tau
    }

    /// `(p, q)` with `p² + q² = 1`.
    pub fn coefficients(&self) -> (f64, f64) {
        let decay = (-self.t_over_tau).exp();
        // -expm1 keeps q accurate for tiny t.
        (decay.sqrt(), (-(-self.t_over_tau).exp_m1()).sqrt())
    }
}

/// `(p, q) = (√(e^{−t/τ}), √(1−e^{−t/τ}))`.
pub fn ad_coefficients(t: f64, tau: f64) -> Result<(f64, f64)> {
    Ok(DampingParams::new(t, tau)?.coefficients())
}

/// Applies the single-qubit damping map to every qubit of `rho`.
pub fn apply_amplitude_damping(rho: &DensityMatrix, params: DampingParams) -> Result<DensityMatrix> {
    let n = rho.n_qubits();
    let dim = rho.dim();
    if rho.matrix().nrows() != 1 << n {
        return Err(Error::arg("density matrix dimension does not match its qubit count"));
    }
    let (p, q) = params.coefficients();
    let q2 = q * q;
    let mut m = rho.matrix().clone();
    let mut next = DMatrix::<C64>::zeros(dim, dim);
    for qubit in 0..n {
        let bit = 1 << (n - 1 - qubit);
        for a in 0..dim {
            for b in 0..dim {
                let mut factor = 1.0;
                if a & bit != 0 {
                    factor *= p;
                }
                if b & bit != 0 {
                    factor *= p;
                }
                let mut value = m[(a, b)] * factor;
                if a & bit == 0 && b & bit == 0 {
                    value += m[(a | bit, b | bit)] * q2;
                }
                next[(a, b)] = value;
            }
        }
        std::mem::swap(&mut m, &mut next);
    }
    Ok(DensityMatrix::from_parts(n, m))
}

/// Two-qubit unitary on (system, cavity) completing the damping interaction:
/// `|00⟩→|00⟩, |10⟩→p|10⟩+q|01⟩, |01⟩→−q|10⟩+p|01⟩, |11⟩→|11⟩`.
fn exchange_unitary(p: f64, q: f64) -> [[f64; 4]; 4] {
    // Rows index the output basis |sc⟩, columns the input.
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, p, q, 0.0],
        [0.0, -q, p, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn apply_two_qubit(state: &mut [C64], n_total: usize, first: usize, second: usize, u: &[[f64; 4]; 4]) {
    let b1 = 1 << (n_total - 1 - first);
    let b2 = 1 << (n_total - 1 - second);
    for base in 0..state.len() {
        if base & (b1 | b2) != 0 {
            continue;
        }
        let idx = [base, base | b2, base | b1, base | b1 | b2];
        let old = idx.map(|i| state[i]);
        for (row, &i) in idx.iter().enumerate() {
            state[i] = (0..4).map(|col| old[col] * u[row][col]).sum();
        }
    }
}

/// Runs the joint system+cavity evolution from `psi0 ⊗ |0…0⟩` and returns
/// the reduced state of the system qubits.
pub fn purified_evolution(psi0: &PureState, params: DampingParams) -> Result<DensityMatrix> {
    let n = psi0.n_qubits();
    let total = 2 * n;
    if total > MAX_QUBITS {
        return Err(Error::arg(format!(
            "purification of {n} qubits needs {total} qubits, more than {MAX_QUBITS}"
        )));
    }
    // System qubits occupy the high bits, cavities the low bits, so the joint
    // amplitude of |s⟩|0…0⟩ sits at index s·2ⁿ.
    let mut joint = vec![C64::new(0.0, 0.0); 1 << total];
    for (s, amp) in psi0.amplitudes().iter().enumerate() {
        joint[s << n] = *amp;
    }
    let (p, q) = params.coefficients();
    let u = exchange_unitary(p, q);
    for i in 0..n {
        apply_two_qubit(&mut joint, total, i, n + i, &u);
    }
    let v = nalgebra::DVector::from_vec(joint);
    let full = &v * v.adjoint();
    let keep: Vec<usize> = (0..n).collect();
    let reduced = partial_trace_matrix(&full, total, &keep)?;
    Ok(DensityMatrix::from_parts(n, reduced))
}
