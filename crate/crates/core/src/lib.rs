//! Dissipative dynamics of a qubit whose tunneling is assisted by a control
//! oscillator and which is coupled to an Ohmic bath at zero temperature.
//!
//! The pipeline runs bottom-up:
//!
//! - [`model`]: physical parameters and the bare Ohmic density.
//! - [`renorm`]: the self-consistent tunneling renormalization `η` and the
//!   dressed qubit-bath coupling density.
//! - [`spectral`]: the bare kernels `γ`, `R` and their Poisson-dressed
//!   counterparts `Γ`, `Σ`.
//! - [`dynamics`]: non-equilibrium fidelity, effective Rabi frequency,
//!   quality factor and the coherent-incoherent boundary.
//! - [`response`]: equilibrium susceptibility `χ''` and correlation `C(t)`.
//! - [`oracle`]: exact closed forms of the dissipationless limit and a
//!   truncated exact-diagonalization propagator of the untransformed model.

pub mod dynamics;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod renorm;
pub mod response;
pub mod series;
pub mod spectral;

#[cfg(test)]
pub(crate) mod testutil;

pub use dynamics::{PhaseBoundary, QualityFactor};
pub use model::{ModelParams, NumericsConfig};
pub use renorm::RenormalizedModel;
pub use series::{SeriesMeta, SpectrumSeries, TimeSeries};
pub use spectral::SpectralKernels;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{field} must be a positive frequency, got {value}")]
    NonPositiveFrequency { field: &'static str, value: f64 },
    #[error("{field} must be a non-negative coupling, got {value}")]
    NegativeCoupling { field: &'static str, value: f64 },
    #[error("invalid value for {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("{module}: no convergence after {iterations} iterations")]
    NoConvergence { module: &'static str, iterations: usize },
    #[error("dissipationless limit (alpha = 0): the spectral kernel is a sum of delta peaks")]
    DissipationlessLimit,
    #[error("no positive solution of omega - eta*delta - Sigma(omega) = 0 (incoherent phase)")]
    NoCoherentSolution,
    #[error("coherent phase persists at alpha = {alpha_hi}; critical coupling not bracketed in [0, 1)")]
    BoundaryNotBracketed { alpha_hi: f64 },
    #[error("chi'' is only defined for omega >= 0, got {omega}")]
    NegativeFrequencyRequest { omega: f64 },
    #[error("truncated Hilbert space dimension {dim} exceeds budget {budget}")]
    TruncationBudgetExceeded { dim: usize, budget: usize },
    #[error("exact diagonalization not converged: incrementing cutoffs changed P(t) by {deviation:.3e} (tolerance {tol:.3e})")]
    TruncationNotConverged { deviation: f64, tol: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

impl Error {
    /// Module that raised a numerical failure, `None` for input validation errors.
    pub fn numerical_module(&self) -> Option<&'static str> {
        match self {
            Error::NoConvergence { module, .. } => Some(module),
            Error::DissipationlessLimit | Error::NoCoherentSolution | Error::BoundaryNotBracketed { .. } => Some("dynamics"),
            Error::TruncationBudgetExceeded { .. } | Error::TruncationNotConverged { .. } => Some("oracle"),
            _ => None,
        }
    }
}
