//! Equilibrium susceptibility and the symmetrized correlation function.
//!
//! With the oscillator treated as uncorrelated with the rest, the
//! dissipative part of the σ_z susceptibility is a Poisson-weighted sum of
//! shifted copies of the spin-boson line shape
//!
//! ```text
//! A_R(u) = (1/π) γ(u) / ([u − ηΔ − R(u)]² + γ²(u)),
//! χ''(ω) = Σ_l w_l A_R(ω − lω_0),   ω ≥ 0,
//! ```
//!
//! and `C(t) = ∫_0^∞ χ''(ω) cos(ωt) dω`. Because every term is a shift of
//! the same kernel, `C(t)` is evaluated from one frozen cosine rule for
//! `A_R` and the sideband phases `e^{ilω_0 t}` applied analytically.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{peak_breakpoints, positive_roots};
use crate::quad::{self, CosineRule};
use crate::renorm::density_breakpoints;
use crate::series::{check_grid, SeriesMeta, SpectrumSeries, TimeSeries};
use crate::spectral::{gamma, r_shift, SpectralKernels};
use crate::{Error, Result};

/// Spin-boson line shape `A_R(u)`; zero for `u ≤ 0`.
pub fn sbm_line_shape(kernels: &SpectralKernels, u: f64) -> f64 {
    let g = gamma(&kernels.model, u);
    if g == 0.0 {
        return 0.0;
    }
    let h = u - kernels.eta_delta() - r_shift(&kernels.model, u);
    g / (PI * (h * h + g * g))
}

/// Positive zeros of `u − ηΔ − R(u)`: the centres of the line shape.
pub fn sbm_line_centres(kernels: &SpectralKernels) -> Vec<f64> {
    let b = kernels.eta_delta();
    positive_roots(&|u| u - b - r_shift(&kernels.model, u), b, 4.0 * b)
}

fn line_shape_breakpoints(kernels: &SpectralKernels) -> Vec<f64> {
    let m = &kernels.model;
    let w = m.window();
    let mut pts = density_breakpoints(m.eta_delta, m.params.omegac, w);
    for r in sbm_line_centres(kernels) {
        let width = gamma(m, r).max(1e-6 * m.eta_delta);
        pts.extend(peak_breakpoints(r, width, 0.0, w));
    }
    quad::clean_breakpoints(&pts)
}

/// `χ''(ω)` for `ω ≥ 0` and `α > 0`.
pub fn chi_im(kernels: &SpectralKernels, omega: f64) -> Result<f64> {
    if omega < 0.0 || omega.is_nan() {
        return Err(Error::NegativeFrequencyRequest { omega });
    }
    if kernels.params().alpha == 0.0 {
        return Err(Error::DissipationlessLimit);
    }
    let omega0 = kernels.params().omega0;
    Ok(kernels
        .poisson_weights
        .iter()
        .enumerate()
        .fold(0.0, |acc, (l, w)| acc + w * sbm_line_shape(kernels, omega - l as f64 * omega0)))
}

/// A delta line of the dissipationless susceptibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub position: f64,
    pub weight: f64,
}

/// At α = 0 the susceptibility is `Σ_l w_l δ(ω − Δ − lω_0)`.
pub fn ibm_lines(kernels: &SpectralKernels) -> Vec<SpectralLine> {
    let p = kernels.params();
    kernels
        .poisson_weights
        .iter()
        .enumerate()
        .map(|(l, &weight)| SpectralLine { position: p.delta + l as f64 * p.omega0, weight })
        .collect()
}

fn response_meta(kernels: &SpectralKernels) -> SeriesMeta {
    let mut meta = SeriesMeta::from_kernels(kernels);
    let b = kernels.eta_delta();
    meta.decay_rate = Some(kernels.big_gamma(b));
    match crate::dynamics::omega_eff(kernels) {
        Ok(w) => {
            meta.omega_eff = Some(w);
            meta.coherent = Some(true);
        }
        Err(_) => meta.coherent = Some(false),
    }
    meta
}

/// `χ''` sampled on a non-negative, strictly increasing grid.
pub fn susceptibility(kernels: &SpectralKernels, omegas: &[f64]) -> Result<SpectrumSeries> {
    check_grid(omegas, "omega grid")?;
    if let Some(&w) = omegas.iter().find(|w| **w < 0.0) {
        return Err(Error::NegativeFrequencyRequest { omega: w });
    }
    if kernels.params().alpha == 0.0 {
        return Err(Error::DissipationlessLimit);
    }
    let chi: Vec<f64> = omegas.par_iter().map(|&w| chi_im(kernels, w).expect("validated grid")).collect();
    Ok(SpectrumSeries { omegas: omegas.to_vec(), chi, meta: response_meta(kernels) })
}

/// Frozen cosine rule of `A_R` on `[0, W]`, resolving phases up to `t_max`.
pub fn line_shape_rule(kernels: &SpectralKernels, t_max: f64) -> CosineRule {
    let pts = line_shape_breakpoints(kernels);
    let cfg = kernels.numerics();
    CosineRule::build(|u| sbm_line_shape(kernels, u), &pts, t_max, cfg.quad_rel_tol, cfg.pv_grid.max(4 * pts.len()))
}

/// `C(t) = ∫_0^∞ χ''(ω) cos(ωt) dω`; the α = 0 branch is the exact line sum.
pub fn correlation(kernels: &SpectralKernels, times: &[f64]) -> Result<TimeSeries> {
    check_grid(times, "times")?;
    let p = *kernels.params();
    if p.alpha == 0.0 {
        let lines = ibm_lines(kernels);
        let values =
            times.iter().map(|t| lines.iter().fold(0.0, |acc, line| acc + line.weight * (line.position * t).cos())).collect();
        let mut meta = SeriesMeta::from_kernels(kernels);
        meta.omega_eff = Some(p.delta);
        meta.decay_rate = Some(0.0);
        meta.coherent = Some(true);
        meta.notes.push("alpha = 0: Poisson sum of undamped sideband lines".into());
        return TimeSeries::new(times.to_vec(), values, meta);
    }
    let t_max = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let rule = line_shape_rule(kernels, t_max);
    let mut meta = response_meta(kernels);
    if !rule.converged {
        meta.notes.push(format!("line-shape quadrature not converged (error estimate {:.3e})", rule.abs_err));
    }
    let weights = &kernels.poisson_weights;
    let values: Vec<f64> = times
        .par_iter()
        .map(|&t| {
            let (c, s) = (rule.cos_transform(t), rule.sin_transform(t));
            weights.iter().enumerate().fold(0.0, |acc, (l, w)| {
                let phase = l as f64 * p.omega0 * t;
                acc + w * (phase.cos() * c - phase.sin() * s)
            })
        })
        .collect();
    TimeSeries::new(times.to_vec(), values, meta)
}

/// `|∫_0^∞ χ'' dω − 1|`, integrating the full sum directly.
pub fn sum_rule(kernels: &SpectralKernels) -> Result<f64> {
    if kernels.params().alpha == 0.0 {
        return Ok((kernels.weight_sum() - 1.0).abs());
    }
    let omega0 = kernels.params().omega0;
    let base = line_shape_breakpoints(kernels);
    let mut pts = Vec::with_capacity(base.len() * kernels.lmax.max(1));
    for l in 0..kernels.poisson_weights.len() {
        pts.extend(base.iter().map(|u| u + l as f64 * omega0));
    }
    let pts = quad::clean_breakpoints(&pts);
    let cfg = kernels.numerics();
    let total = quad::integrate(|w| chi_im(kernels, w).unwrap_or(0.0), &pts, cfg.quad_rel_tol, cfg.pv_grid.max(4 * pts.len()));
    Ok((total.value - 1.0).abs())
}
