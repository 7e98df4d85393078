//! Bare and oscillator-dressed self-energy kernels.
//!
//! The bare kernels come from the dressed coupling density `g(ω)`:
//! `γ(ω) = π g(ω)` and `R(ω) = P∫ g(x)/(ω−x) dx`. The oscillator dresses
//! both with Poisson weights `w_l = e^{−λ} λ^l / l!` over sidebands shifted by
//! `l ω0`:
//!
//! ```text
//! Γ(ω) = Σ_l w_l γ(ω − l ω0),    Σ(ω) = Σ_l w_l R(ω − l ω0)
//! ```

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{ModelParams, NumericsConfig};
use crate::quad;
use crate::renorm::{self, density_breakpoints, effective_coupling_density, RenormalizedModel};
use crate::Result;

/// Poisson weights `e^{−λ} λ^l / l!` for `l = 0..=lmax`.
pub fn poisson_weights(lambda: f64, lmax: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(lmax + 1);
    let mut current = (-lambda).exp();
    w.push(current);
    for l in 1..=lmax {
        current *= lambda / l as f64;
        w.push(current);
    }
    w
}

/// Smallest `L` with `Σ_{l>L} e^{−λ} λ^l / l! < tail_tol`.
///
/// The tail is summed from the far end so it does not suffer the
/// cancellation of `1 − Σ_{l≤L}`.
pub fn poisson_lmax(lambda: f64, tail_tol: f64) -> usize {
    if lambda == 0.0 {
        return 0;
    }
    let horizon = (lambda + 40.0 * lambda.sqrt() + 60.0).ceil() as usize;
    let w = poisson_weights(lambda, horizon);
    let mut tail = 0.0;
    let mut tails = vec![0.0; horizon + 1];
    for l in (0..=horizon).rev() {
        tails[l] = tail;
        tail += w[l];
    }
    tails.iter().position(|t| *t < tail_tol).unwrap_or(horizon)
}

/// Kernels of the dressed model, ready for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralKernels {
    pub model: RenormalizedModel,
    pub lmax: usize,
    pub poisson_weights: Vec<f64>,
}

impl SpectralKernels {
    pub fn new(model: RenormalizedModel) -> SpectralKernels {
        let lmax = poisson_lmax(model.params.lambda, model.numerics.poisson_tail_tol);
        SpectralKernels { poisson_weights: poisson_weights(model.params.lambda, lmax), lmax, model }
    }

    /// Solves η and builds the kernels in one step.
    pub fn from_params(params: &ModelParams, cfg: &NumericsConfig) -> Result<SpectralKernels> {
        Ok(SpectralKernels::new(renorm::solve_eta(params, cfg)?))
    }

    pub fn params(&self) -> &ModelParams {
        &self.model.params
    }

    pub fn numerics(&self) -> &NumericsConfig {
        &self.model.numerics
    }

    pub fn eta_delta(&self) -> f64 {
        self.model.eta_delta
    }

    /// Total retained Poisson weight.
    pub fn weight_sum(&self) -> f64 {
        self.poisson_weights.iter().sum()
    }

    fn sidebands(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let w0 = self.model.params.omega0;
        self.poisson_weights.iter().enumerate().map(move |(l, w)| (l as f64 * w0, *w))
    }

    /// Upper end of the support of `Γ` and `χ''`: `W + lmax·ω0`.
    pub fn support_end(&self) -> f64 {
        self.model.window() + self.lmax as f64 * self.model.params.omega0
    }

    /// Breakpoints resolving every sideband of the dressed kernels on
    /// `[0, support_end]`.
    pub fn sideband_breakpoints(&self) -> Vec<f64> {
        let base = density_breakpoints(self.eta_delta(), self.model.params.omegac, self.model.window());
        let mut pts = Vec::with_capacity(base.len() * (self.lmax + 1));
        for (shift, _) in self.sidebands() {
            pts.extend(base.iter().map(|x| x + shift));
        }
        quad::clean_breakpoints(&pts)
    }

    /// `Γ(ω) = Σ_l w_l γ(ω − lω0)`.
    pub fn big_gamma(&self, omega: f64) -> f64 {
        self.sidebands().fold(0.0, |acc, (shift, w)| acc + w * gamma(&self.model, omega - shift))
    }

    /// `Σ(ω) = Σ_l w_l R(ω − lω0)`.
    pub fn big_sigma(&self, omega: f64) -> f64 {
        self.sidebands().fold(0.0, |acc, (shift, w)| acc + w * r_shift(&self.model, omega - shift))
    }

    /// Modulated spectral density `G_sa(ω) = Γ(ω)/π`.
    pub fn modulated_bath_density(&self, omega: f64) -> f64 {
        self.big_gamma(omega) / PI
    }

    /// Effective spectral density without the oscillator, `G_sb(ω) = γ(ω)/π`.
    pub fn sb_bath_density(&self, omega: f64) -> f64 {
        gamma(&self.model, omega) / PI
    }

    /// `Σ` reconstructed from `Γ` alone: `(1/π) P∫ Γ(x)/(ω−x) dx` over the
    /// support of `Γ`. Independent of the per-sideband `R` evaluations.
    pub fn sigma_from_gamma(&self, omega: f64) -> f64 {
        let cfg = self.numerics();
        quad::principal_value(
            |x| self.big_gamma(x),
            omega,
            &self.sideband_breakpoints(),
            cfg.quad_rel_tol,
            cfg.pv_grid * (self.lmax + 1),
        )
        .value
            / PI
    }

    /// Evaluates `Γ` and `Σ` on a declared grid.
    pub fn tabulate(&self, omegas: &[f64]) -> KernelTable {
        let values: Vec<(f64, f64)> = omegas.par_iter().map(|&w| (self.big_gamma(w), self.big_sigma(w))).collect();
        KernelTable {
            omegas: omegas.to_vec(),
            gamma: values.iter().map(|v| v.0).collect(),
            sigma: values.iter().map(|v| v.1).collect(),
        }
    }
}

/// `γ(ω) = π Σ_k V_k² δ(ω−ω_k)`.
pub fn gamma(model: &RenormalizedModel, omega: f64) -> f64 {
    PI * effective_coupling_density(model, omega)
}

/// `R(ω) = P∫_0^W g(x)/(ω−x) dx`, by subtraction when `0 < ω < W`.
pub fn r_shift(model: &RenormalizedModel, omega: f64) -> f64 {
    if model.params.alpha == 0.0 {
        return 0.0;
    }
    let cfg = &model.numerics;
    quad::principal_value(
        |x| effective_coupling_density(model, x),
        omega,
        &density_breakpoints(model.eta_delta, model.params.omegac, model.window()),
        cfg.quad_rel_tol,
        cfg.pv_grid,
    )
    .value
}

/// `Γ` and `Σ` memoized on a grid. Lookups off the grid are computed
/// exactly, never interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub omegas: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl KernelTable {
    fn index(&self, omega: f64) -> Option<usize> {
        self.omegas.binary_search_by(|w| w.total_cmp(&omega)).ok()
    }

    pub fn big_gamma(&self, kernels: &SpectralKernels, omega: f64) -> f64 {
        self.index(omega).map_or_else(|| kernels.big_gamma(omega), |i| self.gamma[i])
    }

    pub fn big_sigma(&self, kernels: &SpectralKernels, omega: f64) -> f64 {
        self.index(omega).map_or_else(|| kernels.big_sigma(omega), |i| self.sigma[i])
    }
}
