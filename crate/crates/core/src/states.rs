//! Initial-state families for the three-qubit dynamics, plus finite mixtures.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{DensityMatrix, PureState, C64};

/// Which three-qubit family a [`StateFamily`] builds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// `cosθ|111⟩ + sinθ|000⟩`
    GTheta,
    /// `cosθ|100⟩ + (sinθ/√2)(|010⟩ + |001⟩)`
    WTheta,
    /// `cosθ|011⟩ + (sinθ/√2)(|101⟩ + |110⟩)`
    WBarTheta,
    /// `cosθ|111⟩ + sinθ|W⟩`
    SigmaTheta,
    /// `(|000⟩ + |111⟩)/√2`
    Ghz,
    /// `(|100⟩ + |010⟩ + |001⟩)/√3`
    W,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 6] = [
        FamilyKind::GTheta,
        FamilyKind::WTheta,
        FamilyKind::WBarTheta,
        FamilyKind::SigmaTheta,
        FamilyKind::Ghz,
        FamilyKind::W,
    ];

    pub fn uses_theta(self) -> bool {
        !matches!(self, FamilyKind::Ghz | FamilyKind::W)
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::GTheta => "g-theta",
            FamilyKind::WTheta => "w-theta",
            FamilyKind::WBarTheta => "wbar-theta",
            FamilyKind::SigmaTheta => "sigma-theta",
            FamilyKind::Ghz => "ghz",
            FamilyKind::W => "w",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = FamilyKind::ALL.iter().map(|k| k.name()).collect();
                Error::arg(format!("unknown state family {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// A family together with its mixing angle (radians; ignored for GHZ and W).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateFamily {
    pub kind: FamilyKind,
    pub theta: f64,
}

impl StateFamily {
    pub fn new(kind: FamilyKind, theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::arg("theta must be finite"));
        }
        Ok(StateFamily { kind, theta })
    }

    /// Parameterized by `cosθ ∈ [−1, 1]` with `θ ∈ [0, π]`.
    pub fn from_cos(kind: FamilyKind, cos_theta: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&cos_theta) {
            return Err(Error::arg(format!("cos θ must lie in [-1, 1], got {cos_theta}")));
        }
        StateFamily::new(kind, cos_theta.acos())
    }

    pub fn ghz() -> Self {
        StateFamily { kind: FamilyKind::Ghz, theta: 0.0 }
    }

    pub fn w() -> Self {
        StateFamily { kind: FamilyKind::W, theta: 0.0 }
    }
}

/// Exact three-qubit amplitude vector of `family`.
pub fn make_state(family: StateFamily) -> PureState {
    let (c, s) = (family.theta.cos(), family.theta.sin());
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let r3 = 1.0 / 3f64.sqrt();
    let mut amps = [0.0f64; 8];
    match family.kind {
        FamilyKind::GTheta => {
            amps[0b111] = c;
            amps[0b000] = s;
        }
        FamilyKind::WTheta => {
            amps[0b100] = c;
            amps[0b010] = s * r2;
            amps[0b001] = s * r2;
        }
        FamilyKind::WBarTheta => {
            amps[0b011] = c;
            amps[0b101] = s * r2;
            amps[0b110] = s * r2;
        }
        FamilyKind::SigmaTheta => {
            amps[0b111] = c;
            amps[0b100] = s * r3;
            amps[0b010] = s * r3;
            amps[0b001] = s * r3;
        }
        FamilyKind::Ghz => {
            amps[0b000] = r2;
            amps[0b111] = r2;
        }
        FamilyKind::W => {
            amps[0b100] = r3;
            amps[0b010] = r3;
            amps[0b001] = r3;
        }
    }
    PureState::new(3, amps.iter().map(|&a| C64::new(a, 0.0)).collect())
        .expect("family amplitudes are normalized")
}

/// `Σᵢ pᵢ |ψᵢ⟩⟨ψᵢ|`.
pub fn mix(components: &[(f64, PureState)]) -> Result<DensityMatrix> {
    let Some((_, first)) = components.first() else {
        return Err(Error::arg("mixture needs at least one component"));
    };
    let n = first.n_qubits();
    let mut total = 0.0;
    let mut m = DMatrix::zeros(first.dim(), first.dim());
    for (weight, psi) in components {
        if !(*weight >= 0.0) {
            return Err(Error::arg(format!("mixture weight {weight} is negative")));
        }
        if psi.n_qubits() != n {
            return Err(Error::arg("mixture components have different qubit counts"));
        }
        total += weight;
        let a = psi.amplitudes();
        m += (a * a.adjoint()).scale(*weight);
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::arg(format!("mixture weights sum to {total}, not 1")));
    }
    DensityMatrix::new(n, m)
}

/// `s|G⟩⟨G| + (1−s)|W⟩⟨W|`.
pub fn ghz_w_mixture(s: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::arg(format!("mixing weight must lie in [0, 1], got {s}")));
    }
    mix(&[(s, make_state(StateFamily::ghz())), (1.0 - s, make_state(StateFamily::w()))])
}
