//! Physical parameters of the oscillator-assisted spin-boson model and the
//! bare Ohmic bath.
//!
//! The qubit bias is fixed at zero. The oscillator coupling is stored as the
//! dimensionless `λ = g0²/ω0²`; `g0` is accepted at the interface and
//! converted on validation.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Validated physical inputs. Frequencies share one unit, by default `ω_c = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Bare tunneling splitting Δ.
    pub delta: f64,
    /// Control oscillator frequency ω0.
    pub omega0: f64,
    /// Oscillator coupling λ = g0²/ω0².
    #[serde(rename = "lambda_")]
    pub lambda: f64,
    /// Ohmic coupling α.
    pub alpha: f64,
    /// Bath cutoff ω_c.
    pub omegac: f64,
}

/// Parameter document as it appears at the interface: exactly one of
/// `lambda_` and `g0` must be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsInput {
    pub delta: Option<f64>,
    pub omega0: Option<f64>,
    #[serde(rename = "lambda_", alias = "lambda")]
    pub lambda: Option<f64>,
    pub g0: Option<f64>,
    pub alpha: Option<f64>,
    pub omegac: Option<f64>,
}

impl ParamsInput {
    /// Fields set in `other` take precedence. Setting either coupling in
    /// `other` clears the other one inherited from `self`.
    pub fn overlay(&self, other: &ParamsInput) -> ParamsInput {
        let (lambda, g0) =
            if other.lambda.is_some() || other.g0.is_some() { (other.lambda, other.g0) } else { (self.lambda, self.g0) };
        ParamsInput {
            delta: other.delta.or(self.delta),
            omega0: other.omega0.or(self.omega0),
            lambda,
            g0,
            alpha: other.alpha.or(self.alpha),
            omegac: other.omegac.or(self.omegac),
        }
    }

    pub fn validate(&self) -> Result<ModelParams> {
        fn required(v: Option<f64>, field: &'static str) -> Result<f64> {
            v.ok_or_else(|| Error::InvalidParameter { field, reason: "missing".into() })
        }
        let omega0 = required(self.omega0, "omega0")?;
        let lambda = match (self.lambda, self.g0) {
            (Some(l), None) => l,
            (None, Some(g0)) => {
                if !(omega0 > 0.0) {
                    return Err(Error::NonPositiveFrequency { field: "omega0", value: omega0 });
                }
                if !g0.is_finite() {
                    return Err(Error::InvalidParameter { field: "g0", reason: "not finite".into() });
                }
                (g0 / omega0).powi(2)
            }
            (None, None) => 0.0,
            (Some(_), Some(_)) => {
                return Err(Error::InvalidParameter { field: "g0", reason: "give either lambda_ or g0, not both".into() })
            }
        };
        ModelParams {
            delta: required(self.delta, "delta")?,
            omega0,
            lambda,
            alpha: required(self.alpha, "alpha")?,
            omegac: self.omegac.unwrap_or(1.0),
        }
        .validate()
    }
}

impl From<ModelParams> for ParamsInput {
    fn from(p: ModelParams) -> Self {
        ParamsInput {
            delta: Some(p.delta),
            omega0: Some(p.omega0),
            lambda: Some(p.lambda),
            g0: None,
            alpha: Some(p.alpha),
            omegac: Some(p.omegac),
        }
    }
}

impl ModelParams {
    pub fn new(delta: f64, omega0: f64, lambda: f64, alpha: f64, omegac: f64) -> Result<Self> {
        ModelParams { delta, omega0, lambda, alpha, omegac }.validate()
    }

    /// Builds parameters from the oscillator coupling `g0` instead of `λ`.
    pub fn with_g0(delta: f64, omega0: f64, g0: f64, alpha: f64, omegac: f64) -> Result<Self> {
        ParamsInput {
            delta: Some(delta),
            omega0: Some(omega0),
            lambda: None,
            g0: Some(g0),
            alpha: Some(alpha),
            omegac: Some(omegac),
        }
        .validate()
    }

    /// Checks every field; negated comparisons also reject NaN.
    pub fn validate(self) -> Result<Self> {
        for (field, value) in [("delta", self.delta), ("omega0", self.omega0), ("omegac", self.omegac)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveFrequency { field, value });
            }
        }
        for (field, value) in [("alpha", self.alpha), ("lambda_", self.lambda)] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativeCoupling { field, value });
            }
        }
        Ok(self)
    }

    /// Oscillator coupling `g0 = ω0·√λ`.
    pub fn g0(&self) -> f64 {
        self.omega0 * self.lambda.sqrt()
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

/// Numerical controls shared by every stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    /// Poisson probability mass allowed beyond the truncation order.
    pub poisson_tail_tol: f64,
    /// Subdivision limit of the adaptive (principal-value) quadrature.
    pub pv_grid: usize,
    /// Relative tolerance on the η fixed point.
    pub fixed_point_tol: f64,
    /// Frequency window `W` in units of ω_c.
    pub freq_window: f64,
    /// Relative tolerance of adaptive quadrature.
    pub quad_rel_tol: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig { poisson_tail_tol: 1e-12, pv_grid: 4000, fixed_point_tol: 1e-12, freq_window: 40.0, quad_rel_tol: 1e-9 }
    }
}

impl NumericsConfig {
    pub fn validate(self) -> Result<Self> {
        for (field, value) in [
            ("poisson_tail_tol", self.poisson_tail_tol),
            ("fixed_point_tol", self.fixed_point_tol),
            ("quad_rel_tol", self.quad_rel_tol),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter { field, reason: format!("tolerance must be > 0, got {value}") });
            }
        }
        if !(self.freq_window >= 10.0) || !self.freq_window.is_finite() {
            return Err(Error::InvalidParameter {
                field: "freq_window",
                reason: format!("must be >= 10, got {}", self.freq_window),
            });
        }
        if self.pv_grid < 8 {
            return Err(Error::InvalidParameter { field: "pv_grid", reason: "need at least 8 panels".into() });
        }
        Ok(self)
    }

    /// Absolute frequency window `W = freq_window·ω_c`.
    pub fn window(&self, params: &ModelParams) -> f64 {
        self.freq_window * params.omegac
    }
}

/// Ohmic coupling density `Σ_k g_k² δ(ω−ω_k) = 2αω e^{−ω/ω_c}` (zero for ω ≤ 0).
pub fn ohmic_density(params: &ModelParams, omega: f64) -> f64 {
    if omega > 0.0 {
        2.0 * params.alpha * omega * (-omega / params.omegac).exp()
    } else {
        0.0
    }
}

/// Bare bath spectral density `G(ω) = Σ_k g_k²/4 δ(ω−ω_k) = (α/2) ω e^{−ω/ω_c}`.
pub fn bare_bath_density(params: &ModelParams, omega: f64) -> f64 {
    0.25 * ohmic_density(params, omega)
}

/// Validates a raw parameter set.
pub fn validate(params: ModelParams) -> Result<ModelParams> {
    params.validate()
}
