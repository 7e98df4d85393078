//! Independent ground truth.
//!
//! - Exact closed forms of the dissipationless (independent-boson) limit.
//! - A truncated exact propagator of the untransformed Hamiltonian with a
//!   discretized Ohmic bath, see [`ed`].

mod chebyshev;
pub mod ed;

use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::{Error, Result};

pub use ed::{compare_with_analytic, ed_dynamics, ed_dynamics_checked, EdConvergence, EdRun, OracleComparison};

/// Exact `C(t)` of the independent-boson limit,
/// `e^{λ(cos ω_0 t − 1)} cos(Δt + λ sin ω_0 t)`.
pub fn ibm_correlation(params: &ModelParams, t: f64) -> f64 {
    let (l, w0) = (params.lambda, params.omega0);
    (l * ((w0 * t).cos() - 1.0)).exp() * (params.delta * t + l * (w0 * t).sin()).cos()
}

/// Exact lab-frame `⟨σ_z(t)⟩` of the independent-boson limit from
/// `|↑⟩|0_a⟩`: `e^{−λ(1 − cos ω_0 t)} cos(Δt)`.
pub fn ibm_population(params: &ModelParams, t: f64) -> f64 {
    (-params.lambda * (1.0 - (params.omega0 * t).cos())).exp() * (params.delta * t).cos()
}

/// How the bath interval is cut into bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// Equal-width bins on `[0, range]`.
    Linear,
    /// First bin `[0, 10⁻³·range]`, then geometric bins up to `range`.
    Logarithmic,
}

/// Frame in which the truncated Hamiltonian is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// The untransformed Hamiltonian with `(g_0/2)(a + a†)σ_x`.
    Lab,
    /// Rotated by `e^{S_1}`, `S_1 = (g_0/2ω_0)(a† − a)σ_x`: the oscillator
    /// coupling is absorbed and the bath couples to `σ_z e^{−Xσ_x}`,
    /// `X = (g_0/ω_0)(a† − a)`. The initial state is the same product state.
    Displaced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationSpec {
    /// Oscillator Fock cutoff (states `0..n_osc`).
    pub n_osc: usize,
    pub n_bath_modes: usize,
    /// Per-mode Fock cutoff (occupations `0..n_fock_per_mode`).
    pub n_fock_per_mode: usize,
    /// Cap on the total number of bath quanta; `None` keeps the product basis.
    pub max_bath_excitations: Option<usize>,
    pub discretization: Discretization,
    /// Upper end of the discretized interval in units of `ω_c`.
    pub range: f64,
    /// Largest admissible Hilbert-space dimension.
    pub budget: usize,
    pub frame: Frame,
    /// Truncation tolerance of the Chebyshev series in each propagation step.
    pub step_tol: f64,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        TruncationSpec {
            n_osc: 6,
            n_bath_modes: 80,
            n_fock_per_mode: 3,
            max_bath_excitations: Some(2),
            discretization: Discretization::Linear,
            range: 4.0,
            budget: 2_000_000,
            frame: Frame::Displaced,
            step_tol: 1e-14,
        }
    }
}

impl TruncationSpec {
    pub fn validate(self) -> Result<Self> {
        let positive = |field: &'static str, v: usize| {
            if v == 0 {
                Err(Error::InvalidParameter { field, reason: "must be at least 1".into() })
            } else {
                Ok(())
            }
        };
        positive("n_osc", self.n_osc)?;
        positive("n_bath_modes", self.n_bath_modes)?;
        positive("n_fock_per_mode", self.n_fock_per_mode)?;
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::InvalidParameter { field: "range", reason: "must be positive".into() });
        }
        if !(self.step_tol > 0.0) {
            return Err(Error::InvalidParameter { field: "step_tol", reason: "must be positive".into() });
        }
        if self.n_fock_per_mode > 255 {
            return Err(Error::InvalidParameter { field: "n_fock_per_mode", reason: "must be at most 255".into() });
        }
        Ok(self)
    }

    /// Every cutoff raised by one: the refinement used by the convergence check.
    pub fn refined(&self) -> TruncationSpec {
        TruncationSpec {
            n_osc: self.n_osc + 1,
            n_fock_per_mode: self.n_fock_per_mode + 1,
            max_bath_excitations: self.max_bath_excitations.map(|m| m + 1),
            ..*self
        }
    }
}

/// One discrete bath mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathMode {
    pub omega: f64,
    pub g: f64,
}

/// `∫_0^x ω e^{−ω/ω_c} dω` and `∫_0^x ω² e^{−ω/ω_c} dω`.
fn bin_moments(x: f64, omegac: f64) -> (f64, f64) {
    let u = x / omegac;
    let e = (-u).exp();
    let first = omegac * omegac * (1.0 - (1.0 + u) * e);
    let second = omegac.powi(3) * (2.0 - (u * u + 2.0 * u + 2.0) * e);
    (first, second)
}

pub fn bin_edges(params: &ModelParams, trunc: &TruncationSpec) -> Vec<f64> {
    let n = trunc.n_bath_modes;
    let top = trunc.range * params.omegac;
    match trunc.discretization {
        Discretization::Linear => (0..=n).map(|k| if k == n { top } else { top * k as f64 / n as f64 }).collect(),
        Discretization::Logarithmic => {
            let mut edges = vec![0.0];
            if n == 1 {
                edges.push(top);
                return edges;
            }
            let first = 1e-3 * top;
            let ratio = (top / first).powf(1.0 / (n - 1) as f64);
            for k in 0..n {
                edges.push(if k + 1 == n { top } else { first * ratio.powi(k as i32) });
            }
            edges
        }
    }
}

/// Density-matched modes: `g_k² = ∫_bin 2αω e^{−ω/ω_c} dω`, `ω_k` the
/// centroid of the bin under the same weight.
pub fn discretize_bath(params: &ModelParams, trunc: &TruncationSpec) -> Vec<BathMode> {
    let edges = bin_edges(params, trunc);
    edges
        .windows(2)
        .map(|e| {
            let (m1a, m2a) = bin_moments(e[0], params.omegac);
            let (m1b, m2b) = bin_moments(e[1], params.omegac);
            let first = m1b - m1a;
            let omega = if first > 0.0 { (m2b - m2a) / first } else { 0.5 * (e[0] + e[1]) };
            BathMode { omega, g: (2.0 * params.alpha * first).sqrt() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::simpson;
    use approx::assert_relative_eq;

    fn params(alpha: f64) -> ModelParams {
        ModelParams::new(0.2, 1.0, 0.25, alpha, 1.0).unwrap()
    }

    #[test]
    fn ibm_closed_forms() {
        let p = ModelParams::new(0.1, 1.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(ibm_correlation(&p, 0.0), 1.0);
        let t = std::f64::consts::PI;
        assert_relative_eq!(ibm_correlation(&p, t), (-2.0f64).exp() * (0.1 * t).cos(), max_relative = 1e-14);
        let p0 = p.with_lambda(0.0);
        assert_relative_eq!(ibm_correlation(&p0, 3.7), (0.1 * 3.7f64).cos(), max_relative = 1e-15);
        assert_eq!(ibm_population(&p, 0.0), 1.0);
    }

    #[test]
    fn bath_weights_match_density() {
        for disc in [Discretization::Linear, Discretization::Logarithmic] {
            let trunc = TruncationSpec { n_bath_modes: 37, discretization: disc, ..TruncationSpec::default() };
            let modes = discretize_bath(&params(0.05), &trunc);
            let sum: f64 = modes.iter().map(|m| m.g * m.g).sum();
            let exact = 2.0 * 0.05 * (1.0 - 5.0 * (-4.0f64).exp());
            assert!((sum - exact).abs() < 1e-10, "{sum} vs {exact}");
            let edges = bin_edges(&params(0.05), &trunc);
            for (m, e) in modes.iter().zip(edges.windows(2)) {
                assert!(m.omega > e[0] && m.omega < e[1]);
            }
        }
    }

    #[test]
    fn single_bin_and_zero_coupling() {
        let one = TruncationSpec { n_bath_modes: 1, ..TruncationSpec::default() };
        let modes = discretize_bath(&params(0.3), &one);
        let direct = simpson(|w| w * (-w).exp(), 0.0, 4.0, 1e-13);
        assert_relative_eq!(modes[0].g * modes[0].g, 2.0 * 0.3 * direct, max_relative = 1e-11);
        let centroid = simpson(|w| w * w * (-w).exp(), 0.0, 4.0, 1e-13) / direct;
        assert_relative_eq!(modes[0].omega, centroid, max_relative = 1e-11);
        assert!(discretize_bath(&params(0.0), &TruncationSpec::default()).iter().all(|m| m.g == 0.0));
    }

    #[test]
    fn truncation_validation() {
        assert!(TruncationSpec { n_osc: 0, ..TruncationSpec::default() }.validate().is_err());
        assert!(TruncationSpec { step_tol: 0.0, ..TruncationSpec::default() }.validate().is_err());
        let r = TruncationSpec::default().refined();
        assert_eq!((r.n_osc, r.n_fock_per_mode, r.max_bath_excitations), (7, 4, Some(3)));
    }
}
