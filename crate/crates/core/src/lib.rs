//! Genuine tripartite entanglement of three qubits under local amplitude
//! damping.
//!
//! The crate builds the initial-state families ([`states`]), evolves them
//! through independent zero-temperature damping ([`damping`]), and quantifies
//! what is left with closed-form measures ([`measures`]) and with the
//! convex-roof extension of concurrence Fill evaluated through its
//! witness/Legendre dual ([`roof`]). [`experiments`] strings these together
//! into time series, sudden-death onset searches and CSV/SVG output.

pub mod damping;
pub mod experiments;
pub mod error;
pub mod measures;
pub mod roof;
pub mod states;
pub mod tensor;

pub use error::{Error, Result};
