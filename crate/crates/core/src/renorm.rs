//! Self-consistent tunneling renormalization.
//!
//! After the bath-polaron transformation the qubit tunnels with `ηΔ`, where
//!
//! ```text
//! η = exp[−α ∫_0^W ω e^{−ω/ω_c} / (ω + ηΔ)² dω]
//! ```
//!
//! and each bath mode couples to the qubit with `V_k = g_k (ηΔ/ω_k) ξ_k`,
//! `ξ_k = ω_k/(ω_k + ηΔ)`. In the continuum this gives the dressed density
//! `Σ_k V_k² δ(ω−ω_k) = 2αω e^{−ω/ω_c} (ηΔ)²/(ω+ηΔ)²`.

use serde::{Deserialize, Serialize};

use crate::model::{ohmic_density, ModelParams, NumericsConfig};
use crate::{quad, Error, Result};

const DEFAULT_DAMPING: f64 = 0.5;
const MAX_ITERATIONS: usize = 200_000;

/// Output of the self-consistency stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormalizedModel {
    pub params: ModelParams,
    pub numerics: NumericsConfig,
    /// Renormalization factor η ∈ (0, 1].
    pub eta: f64,
    /// Renormalized splitting ηΔ.
    pub eta_delta: f64,
    /// Constant energy shift Ξ of the transformed Hamiltonian. Reported only.
    pub energy_shift: f64,
    pub converged_in: usize,
}

/// Breakpoints for integrands varying on the scale `b` near the origin and
/// on `ω_c` further out: `[0, b/4, b, 4b, 16b, …, ω_c, 2ω_c, …, W]`.
pub(crate) fn density_breakpoints(b: f64, omegac: f64, window: f64) -> Vec<f64> {
    let mut pts = vec![0.0, window];
    if b > 0.0 && b < window {
        pts.push(0.25 * b);
        let mut x = b;
        while x < omegac {
            pts.push(x);
            x *= 4.0;
        }
    }
    let mut x = omegac;
    while x < window {
        pts.push(x);
        x *= 2.0;
    }
    quad::clean_breakpoints(&pts).into_iter().filter(|x| *x <= window).collect()
}

/// `I(η) = ∫_0^W ω e^{−ω/ω_c}/(ω+ηΔ)² dω`.
pub fn eta_integral(params: &ModelParams, cfg: &NumericsConfig, eta: f64) -> f64 {
    let b = eta * params.delta;
    let wc = params.omegac;
    let window = cfg.window(params);
    let tol = cfg.quad_rel_tol.min(1e-11);
    quad::integrate(|w| w * (-w / wc).exp() / ((w + b) * (w + b)), &density_breakpoints(b, wc, window), tol, cfg.pv_grid).value
}

/// Solves for η by damped fixed-point iteration from η = 1 with damping 0.5.
pub fn solve_eta(params: &ModelParams, cfg: &NumericsConfig) -> Result<RenormalizedModel> {
    solve_eta_with(params, cfg, DEFAULT_DAMPING, MAX_ITERATIONS)
}

/// Fixed-point iteration `η ← (1−d)η + d·exp(−α I(η))`. Stops at the first
/// iterate whose residual `|η − exp(−α I(η))|` is below `fixed_point_tol·η`.
pub fn solve_eta_with(params: &ModelParams, cfg: &NumericsConfig, damping: f64, max_iters: usize) -> Result<RenormalizedModel> {
    let params = params.validate()?;
    let cfg = cfg.validate()?;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidParameter { field: "damping", reason: format!("must lie in (0, 1], got {damping}") });
    }
    let mut eta = 1.0;
    let mut iterations = 0;
    if params.alpha > 0.0 {
        loop {
            let image = (-params.alpha * eta_integral(&params, &cfg, eta)).exp();
            if (eta - image).abs() < cfg.fixed_point_tol * eta {
                break;
            }
            if iterations >= max_iters || !(image > 0.0) {
                return Err(Error::NoConvergence { module: "renorm", iterations });
            }
            eta = (1.0 - damping) * eta + damping * image;
            iterations += 1;
        }
    }
    let eta_delta = eta * params.delta;
    Ok(RenormalizedModel {
        params,
        numerics: cfg,
        eta,
        eta_delta,
        energy_shift: energy_shift(&params, &cfg, eta_delta),
        converged_in: iterations,
    })
}

/// `Ξ = −g0²/(4ω0) − Σ_k g_k²/(4ω_k) ξ_k(2−ξ_k)`.
fn energy_shift(params: &ModelParams, cfg: &NumericsConfig, eta_delta: f64) -> f64 {
    let oscillator = -0.25 * params.lambda * params.omega0;
    if params.alpha == 0.0 {
        return oscillator;
    }
    let wc = params.omegac;
    let bath = quad::integrate(
        |w| {
            let xi = w / (w + eta_delta);
            (-w / wc).exp() * xi * (2.0 - xi)
        },
        &density_breakpoints(eta_delta, wc, cfg.window(params)),
        cfg.quad_rel_tol,
        cfg.pv_grid,
    )
    .value;
    oscillator - 0.5 * params.alpha * bath
}

impl RenormalizedModel {
    /// `ξ(ω) = ω/(ω + ηΔ)`.
    pub fn xi(&self, omega: f64) -> f64 {
        omega / (omega + self.eta_delta)
    }

    /// Dressed coupling `V_k = g_k (ηΔ/ω_k) ξ_k` of a discrete mode.
    pub fn mode_coupling(&self, g_k: f64, omega_k: f64) -> f64 {
        g_k * self.eta_delta / omega_k * self.xi(omega_k)
    }

    pub fn window(&self) -> f64 {
        self.numerics.window(&self.params)
    }

    /// Residual `|η − exp(−α I(η))|` of the stored solution.
    pub fn residual(&self) -> f64 {
        (self.eta - (-self.params.alpha * eta_integral(&self.params, &self.numerics, self.eta)).exp()).abs()
    }
}

/// Dressed qubit-bath density `Σ_k V_k² δ(ω−ω_k)` on `(0, W]`, zero elsewhere.
pub fn effective_coupling_density(model: &RenormalizedModel, omega: f64) -> f64 {
    if omega <= 0.0 || omega > model.window() {
        return 0.0;
    }
    let ratio = model.eta_delta / (omega + model.eta_delta);
    ohmic_density(&model.params, omega) * ratio * ratio
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::bare_bath_density;
    use crate::testutil;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg() -> NumericsConfig {
        NumericsConfig::default()
    }

    /// η from bisection on `η − exp(−α I(η))` with the closed-form integral.
    fn eta_by_bisection(p: &ModelParams) -> f64 {
        let f = |eta: f64| eta - (-p.alpha * testutil::eta_integral_closed(eta * p.delta, p.omegac)).exp();
        let (mut lo, mut hi) = (1e-300, 1.0);
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn dissipationless_eta_is_one() {
        let p = ModelParams::new(0.1, 0.5, 1.0, 0.0, 1.0).unwrap();
        let m = solve_eta(&p, &cfg()).unwrap();
        assert_eq!(m.eta, 1.0);
        assert_eq!(m.eta_delta, 0.1);
        assert_eq!(m.converged_in, 0);
        assert_relative_eq!(m.energy_shift, -0.125, max_relative = 1e-15);
    }

    #[test]
    fn integral_matches_closed_form() {
        let p = ModelParams::new(0.01, 1.0, 0.0, 0.3, 1.0).unwrap();
        for eta in [1.0, 0.3, 1e-3, 1e-12] {
            let num = eta_integral(&p, &cfg(), eta);
            assert_relative_eq!(num, testutil::eta_integral_closed(eta * p.delta, 1.0), max_relative = 1e-11);
        }
    }

    #[test]
    fn fixed_point_agrees_with_bisection() {
        let p = ModelParams::new(0.01, 1.0, 0.0, 0.1, 1.0).unwrap();
        let m = solve_eta(&p, &cfg()).unwrap();
        assert!((m.eta - eta_by_bisection(&p)).abs() < 1e-10);
        assert!(m.residual() < cfg().fixed_point_tol * m.eta);
        assert!(m.eta > 0.0 && m.eta < 1.0);
    }

    #[test]
    fn result_does_not_depend_on_damping() {
        let p = ModelParams::new(0.05, 1.0, 0.0, 0.4, 1.0).unwrap();
        let reference = solve_eta(&p, &cfg()).unwrap().eta;
        for d in [0.2, 0.8, 1.0] {
            let eta = solve_eta_with(&p, &cfg(), d, 100_000).unwrap().eta;
            assert!((eta - reference).abs() < 1e-10 * reference, "damping {d}");
        }
    }

    #[test]
    fn too_few_iterations_reported() {
        let p = ModelParams::new(0.01, 1.0, 0.0, 0.5, 1.0).unwrap();
        assert_eq!(solve_eta_with(&p, &cfg(), 0.5, 3), Err(Error::NoConvergence { module: "renorm", iterations: 3 }));
    }

    #[test]
    fn scaling_limit_power_law() {
        // ηΔ ∝ Δ^{1/(1−α)} for Δ ≪ ω_c; slope from a least-squares fit over one decade.
        for alpha in [0.1, 0.3, 0.5] {
            let deltas = [0.001, 0.002, 0.005, 0.01];
            let pts: Vec<(f64, f64)> = deltas
                .iter()
                .map(|&d| {
                    let p = ModelParams::new(d, 1.0, 0.0, alpha, 1.0).unwrap();
                    (d.ln(), solve_eta(&p, &cfg()).unwrap().eta_delta.ln())
                })
                .collect();
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let slope =
                pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
            let expected = 1.0 / (1.0 - alpha);
            assert!((slope / expected - 1.0).abs() < 0.03, "alpha {alpha}: slope {slope} vs {expected}");
        }
    }

    #[test]
    fn eta_decreases_with_alpha() {
        let mut last = 1.0;
        for k in 1..=9 {
            let p = ModelParams::new(0.1, 1.0, 0.0, 0.1 * k as f64, 1.0).unwrap();
            let eta = solve_eta(&p, &cfg()).unwrap().eta;
            assert!(eta < last);
            last = eta;
        }
    }

    #[test]
    fn density_at_renormalized_splitting() {
        let p = ModelParams::new(0.1, 1.0, 0.0, 0.2, 1.0).unwrap();
        let m = solve_eta(&p, &cfg()).unwrap();
        let b = m.eta_delta;
        assert_relative_eq!(effective_coupling_density(&m, b), 2.0 * 0.2 * b * (-b).exp() / 4.0, max_relative = 1e-14);
        assert_eq!(effective_coupling_density(&m, 0.0), 0.0);
        assert_eq!(effective_coupling_density(&m, -0.3), 0.0);
    }

    #[test]
    fn density_with_independent_eta() {
        let p = ModelParams::new(0.1, 1.0, 0.0, 0.2, 1.0).unwrap();
        let m = solve_eta(&p, &cfg()).unwrap();
        let b = eta_by_bisection(&p) * p.delta;
        let w: f64 = 0.5;
        let direct = 2.0 * 0.2 * w * (-w).exp() * b * b / ((w + b) * (w + b));
        assert_relative_eq!(effective_coupling_density(&m, w), direct, max_relative = 1e-9);
    }

    #[test]
    fn discrete_couplings_reproduce_density() {
        // Σ_k V_k² over a fine bin equals the bin integral of the density.
        let p = ModelParams::new(0.1, 1.0, 0.0, 0.2, 1.0).unwrap();
        let m = solve_eta(&p, &cfg()).unwrap();
        let (lo, hi) = (0.30, 0.31);
        let n = 200;
        let h = (hi - lo) / n as f64;
        let sum: f64 = (0..n)
            .map(|k| {
                let wk = lo + (k as f64 + 0.5) * h;
                let gk = (ohmic_density(&p, wk) * h).sqrt();
                m.mode_coupling(gk, wk).powi(2)
            })
            .sum();
        let exact = testutil::simpson(|w| effective_coupling_density(&m, w), lo, hi, 1e-14);
        assert_relative_eq!(sum, exact, max_relative = 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn dressed_density_ratio(delta in 0.005f64..0.5, alpha in 0.01f64..0.6, wc in 0.5f64..3.0, w in 1e-4f64..8.0) {
            let p = ModelParams::new(delta, 1.0, 0.0, alpha, wc).unwrap();
            let m = solve_eta(&p, &cfg()).unwrap();
            let b = m.eta_delta;
            let via_bare = 4.0 * bare_bath_density(&p, w) * (b / (w + b)).powi(2);
            let got = effective_coupling_density(&m, w);
            prop_assert!((got - via_bare).abs() <= 1e-14 * via_bare);
            prop_assert!(got <= ohmic_density(&p, w));
        }

        #[test]
        fn fixed_point_matches_bisection(delta in 0.005f64..0.5, alpha in 0.01f64..0.7, wc in 0.5f64..3.0) {
            let p = ModelParams::new(delta, 1.0, 0.0, alpha, wc).unwrap();
            let m = solve_eta(&p, &cfg()).unwrap();
            prop_assert!((m.eta - eta_by_bisection(&p)).abs() < 1e-10);
        }
    }
}
