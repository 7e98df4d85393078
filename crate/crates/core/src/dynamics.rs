//! Non-equilibrium population dynamics and the coherent-incoherent boundary.
//!
//! Starting from the qubit polarized along `σ_z` with the oscillator and
//! bath in their vacua (in the transformed frame), the fidelity is
//!
//! ```text
//! F(t) = 1/2 + (1/2π) ∫ Γ(ω) cos(ωt) dω / ([ω − ηΔ − Σ(ω)]² + Γ²(ω))
//! ```
//!
//! and `P(t) = 2F(t) − 1`. The integrand is a set of narrow Lorentzians
//! around the zeros of `h(ω) = ω − ηΔ − Σ(ω)`; the smallest positive zero is
//! the effective Rabi frequency `ω_eff`. When no positive zero exists the
//! qubit is in the incoherent phase.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{ModelParams, NumericsConfig};
use crate::quad::{self, CosineRule};
use crate::series::{check_grid, SeriesMeta, TimeSeries};
use crate::spectral::SpectralKernels;
use crate::{Error, Result};

/// Multiples of the local width around each pole used as breakpoints.
const PEAK_WINDOWS: [f64; 6] = [0.25, 1.0, 4.0, 16.0, 64.0, 256.0];
/// Default upper end of the α bracket for the phase boundary.
pub const ALPHA_UPPER: f64 = 0.99;
/// Default bracket width of the α bisection.
pub const ALPHA_BRACKET_TOL: f64 = 1e-3;
/// Times beyond this many `1/Γ(ηΔ)` are flagged in the metadata.
pub const VALIDITY_DECAY_TIMES: f64 = 50.0;

/// Brackets of sign changes of `h` on `[0, upper]`, sampled on a log grid
/// near the scale `scale` and a coarser geometric grid above `4·scale`.
pub(crate) fn sign_change_brackets<F>(h: &F, scale: f64, upper: f64) -> Vec<(f64, f64)>
where
    F: Fn(f64) -> f64 + Sync,
{
    let mut grid = vec![0.0];
    let mut x = 1e-6 * scale;
    while x < 4.0 * scale {
        grid.push(x);
        x *= 1.02;
    }
    let start = 4.0 * scale;
    if upper > start {
        let ratio = ((upper / start).ln() / 200.0).exp().max(1.02);
        let mut x = start;
        while x < upper {
            grid.push(x);
            x *= ratio;
        }
    }
    grid.push(upper.max(4.0 * scale));
    let values: Vec<f64> = grid.par_iter().map(|&w| h(w)).collect();
    let mut brackets = Vec::new();
    for i in 0..grid.len() - 1 {
        let (a, b) = (values[i], values[i + 1]);
        if a == 0.0 && i > 0 {
            brackets.push((grid[i], grid[i]));
        } else if (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0) {
            brackets.push((grid[i], grid[i + 1]));
        }
    }
    brackets
}

/// All positive zeros of `h` found by the sign scan, refined by bisection.
pub(crate) fn positive_roots<F>(h: &F, scale: f64, upper: f64) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    sign_change_brackets(h, scale, upper)
        .into_iter()
        .map(|(lo, hi)| if lo == hi { lo } else { quad::bisect(h, lo, hi, 1e-14 * scale) })
        .filter(|r| *r > 0.0)
        .collect()
}

/// `h(ω) = ω − ηΔ − Σ(ω)`.
pub fn pole_function(kernels: &SpectralKernels, omega: f64) -> f64 {
    omega - kernels.eta_delta() - kernels.big_sigma(omega)
}

fn scan_upper(kernels: &SpectralKernels) -> f64 {
    let p = kernels.params();
    let b = kernels.eta_delta();
    b + p.lambda * p.omega0 + (2.0 * b).max(p.omega0)
}

/// All positive zeros of `ω − ηΔ − Σ(ω)` in increasing order.
pub fn omega_eff_roots(kernels: &SpectralKernels) -> Vec<f64> {
    if kernels.params().alpha == 0.0 {
        return vec![kernels.params().delta];
    }
    positive_roots(&|w| pole_function(kernels, w), kernels.eta_delta(), scan_upper(kernels))
}

/// Effective Rabi frequency: the smallest positive zero of `ω − ηΔ − Σ(ω)`.
pub fn omega_eff(kernels: &SpectralKernels) -> Result<f64> {
    omega_eff_roots(kernels).first().copied().ok_or(Error::NoCoherentSolution)
}

/// `Q = ω_eff / Γ(ηΔ)` with its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityFactor {
    pub omega_eff: f64,
    /// Engineered decay rate `Γ(ηΔ)`.
    pub decay_rate: f64,
    /// Infinite when the decay rate vanishes (α = 0).
    pub q: f64,
    /// Every positive zero found; `omega_eff` is the first.
    pub roots: Vec<f64>,
}

pub fn quality_factor(kernels: &SpectralKernels) -> Result<QualityFactor> {
    let roots = omega_eff_roots(kernels);
    let omega_eff = *roots.first().ok_or(Error::NoCoherentSolution)?;
    let decay_rate = kernels.big_gamma(kernels.eta_delta());
    let q = if decay_rate > 0.0 { omega_eff / decay_rate } else { f64::INFINITY };
    Ok(QualityFactor { omega_eff, decay_rate, q, roots })
}

/// Whether a positive `ω_eff` exists at the given parameters.
pub fn is_coherent(params: &ModelParams, cfg: &NumericsConfig) -> Result<bool> {
    let kernels = SpectralKernels::from_params(params, cfg)?;
    Ok(omega_eff(&kernels).is_ok())
}

/// Critical coupling at one λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalCoupling {
    pub lambda: f64,
    pub alpha_c: f64,
    /// Coherent at `bracket.0`, incoherent at `bracket.1`.
    pub bracket: (f64, f64),
}

/// Bisection on α ∈ [0, `alpha_upper`] for the loss of a positive `ω_eff`.
/// The α in `params` is ignored; η is re-solved at every probe.
pub fn alpha_critical_with(
    params: &ModelParams,
    lambda: f64,
    cfg: &NumericsConfig,
    alpha_upper: f64,
    bracket_tol: f64,
) -> Result<CriticalCoupling> {
    let base = params.with_lambda(lambda).with_alpha(0.0).validate()?;
    if is_coherent(&base.with_alpha(alpha_upper), cfg)? {
        return Err(Error::BoundaryNotBracketed { alpha_hi: alpha_upper });
    }
    let (mut lo, mut hi) = (0.0, alpha_upper);
    while hi - lo > bracket_tol {
        let mid = 0.5 * (lo + hi);
        if is_coherent(&base.with_alpha(mid), cfg)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalCoupling { lambda, alpha_c: 0.5 * (lo + hi), bracket: (lo, hi) })
}

pub fn alpha_critical(params: &ModelParams, lambda: f64, cfg: &NumericsConfig) -> Result<CriticalCoupling> {
    alpha_critical_with(params, lambda, cfg, ALPHA_UPPER, ALPHA_BRACKET_TOL)
}

/// Coherent-incoherent boundary `α_c(λ)` over a λ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundary {
    pub lambda_grid: Vec<f64>,
    pub alpha_c: Vec<f64>,
    pub brackets: Vec<(f64, f64)>,
    pub bracket_tol: f64,
}

/// Evaluates [`alpha_critical`] on every λ; cells are independent.
pub fn phase_boundary(params: &ModelParams, lambdas: &[f64], cfg: &NumericsConfig) -> Result<PhaseBoundary> {
    check_grid(lambdas, "lambda grid")?;
    let cells: Vec<Result<CriticalCoupling>> = lambdas.par_iter().map(|&l| alpha_critical(params, l, cfg)).collect();
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PhaseBoundary {
        lambda_grid: lambdas.to_vec(),
        alpha_c: cells.iter().map(|c| c.alpha_c).collect(),
        brackets: cells.iter().map(|c| c.bracket).collect(),
        bracket_tol: ALPHA_BRACKET_TOL,
    })
}

/// Spectral function of the population, `(1/π) Γ / ([ω − ηΔ − Σ]² + Γ²)`.
pub fn spectral_weight(kernels: &SpectralKernels, omega: f64) -> f64 {
    let g = kernels.big_gamma(omega);
    if g == 0.0 {
        return 0.0;
    }
    let h = pole_function(kernels, omega);
    g / (PI * (h * h + g * g))
}

/// Breakpoints around `center` at multiples of `width`, clipped to `[lo, hi]`.
pub(crate) fn peak_breakpoints(center: f64, width: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = vec![center];
    for k in PEAK_WINDOWS {
        pts.push(center - k * width);
        pts.push(center + k * width);
    }
    pts.into_iter().filter(|x| *x >= lo && *x <= hi).collect()
}

/// Frozen cosine rule for the population spectral function up to `t_max`.
pub fn population_rule(kernels: &SpectralKernels, t_max: f64) -> Result<CosineRule> {
    if kernels.params().alpha == 0.0 {
        return Err(Error::DissipationlessLimit);
    }
    let end = kernels.support_end();
    let mut pts = kernels.sideband_breakpoints();
    for r in omega_eff_roots(kernels) {
        let width = kernels.big_gamma(r).max(1e-6 * kernels.eta_delta());
        pts.extend(peak_breakpoints(r, width, 0.0, end));
    }
    let cfg = kernels.numerics();
    let pts = quad::clean_breakpoints(&pts);
    let max_panels = cfg.pv_grid.max(4 * pts.len());
    Ok(CosineRule::build(|w| spectral_weight(kernels, w), &pts, t_max, cfg.quad_rel_tol, max_panels))
}

/// `|P(0) − 1|`: the total weight of the printed spectral integral.
pub fn population_sum_rule(kernels: &SpectralKernels) -> Result<f64> {
    Ok((population_rule(kernels, 0.0)?.total - 1.0).abs())
}

fn dynamics_meta(kernels: &SpectralKernels) -> SeriesMeta {
    let mut meta = SeriesMeta::from_kernels(kernels);
    let b = kernels.eta_delta();
    meta.decay_rate = Some(kernels.big_gamma(b));
    match omega_eff(kernels) {
        Ok(w) => {
            meta.omega_eff = Some(w);
            meta.coherent = Some(true);
        }
        Err(_) => {
            meta.coherent = Some(false);
            meta.notes.push(
                "incoherent phase: no positive root of omega - eta*delta - Sigma; the integral omits the weight of the negative-frequency pole"
                    .into(),
            );
        }
    }
    meta
}

/// `P(t) = ⟨σ_z(t)⟩` on the given times.
pub fn population(kernels: &SpectralKernels, times: &[f64]) -> Result<TimeSeries> {
    check_grid(times, "times")?;
    let p = kernels.params();
    if p.alpha == 0.0 {
        let mut meta = SeriesMeta::from_kernels(kernels);
        meta.omega_eff = Some(p.delta);
        meta.decay_rate = Some(0.0);
        meta.coherent = Some(true);
        meta.notes.push("alpha = 0: free Rabi oscillation at delta".into());
        let values = times.iter().map(|t| (p.delta * t).cos()).collect();
        return TimeSeries::new(times.to_vec(), values, meta);
    }
    let t_max = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let mut meta = dynamics_meta(kernels);
    if let Some(rate) = meta.decay_rate.filter(|r| *r > 0.0) {
        let cap = VALIDITY_DECAY_TIMES / rate;
        if t_max > cap {
            log::warn!("t_max = {t_max} exceeds the validity cap {cap} = 50/Gamma(eta*delta)");
            meta.notes.push(format!("times beyond {cap:.6e} exceed 50/Gamma(eta*delta); quadrature error may dominate"));
        }
    }
    let rule = population_rule(kernels, t_max)?;
    if !rule.converged {
        meta.notes.push(format!("spectral quadrature not converged (error estimate {:.3e})", rule.abs_err));
    }
    let values: Vec<f64> = times.par_iter().map(|&t| rule.cos_transform(t)).collect();
    TimeSeries::new(times.to_vec(), values, meta)
}

/// Fidelity `F(t) = [1 + P(t)]/2`. At α = 0 this is `[1 + cos(Δt)]/2`.
pub fn fidelity(kernels: &SpectralKernels, times: &[f64]) -> Result<TimeSeries> {
    Ok(population(kernels, times)?.map(|p| 0.5 * (1.0 + p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renorm::solve_eta;
    use crate::series::linspace;
    use crate::spectral::{gamma, r_shift};
    use crate::testutil;
    use approx::assert_relative_eq;

    fn kernels(delta: f64, omega0: f64, lambda: f64, alpha: f64) -> SpectralKernels {
        let p = ModelParams::new(delta, omega0, lambda, alpha, 1.0).unwrap();
        SpectralKernels::from_params(&p, &NumericsConfig::default()).unwrap()
    }

    #[test]
    fn dissipationless_fidelity_is_free_rabi() {
        let k = kernels(0.2, 0.5, 1.5, 0.0);
        let ts = linspace(0.0, 100.0, 201);
        let f = fidelity(&k, &ts).unwrap();
        for (t, v) in ts.iter().zip(&f.values) {
            assert_relative_eq!(*v, 0.5 * (1.0 + (0.2 * t).cos()), epsilon = 1e-15);
        }
        assert!(matches!(population_rule(&k, 1.0), Err(Error::DissipationlessLimit)));
        assert_eq!(omega_eff(&k).unwrap(), 0.2);
        let q = quality_factor(&k).unwrap();
        assert!(q.q.is_infinite());
    }

    #[test]
    fn omega_eff_below_renormalized_splitting() {
        let k = kernels(0.01, 0.5, 0.0, 0.1);
        let b = k.eta_delta();
        let w = omega_eff(&k).unwrap();
        assert!(w < b && w > 0.5 * b);
        assert!(pole_function(&k, w).abs() < 1e-10 * b);
        // Σ = R is negative on (0, ηΔ], checked against the closed form.
        for x in linspace(0.01 * b, b, 25) {
            assert!(testutil::r_shift_closed(x, b, 0.1, 1.0) < 0.0);
        }
    }

    #[test]
    fn scaling_regime_quality_factor() {
        let k = kernels(0.01, 0.5, 0.0, 0.1);
        let q = quality_factor(&k).unwrap();
        assert!(q.q > 5.4 && q.q < 6.8, "Q = {}", q.q);
        let b = k.eta_delta();
        let via_closed_form = q.omega_eff / (PI * 0.1 * b / 2.0 * (-b).exp());
        assert_relative_eq!(q.q, via_closed_form, max_relative = 1e-12);
    }

    #[test]
    fn quality_factor_grows_with_lambda() {
        let mut last = 0.0;
        for lambda in linspace(0.0, 2.0, 9) {
            let q = quality_factor(&kernels(0.01, 0.5, lambda, 0.1)).unwrap().q;
            assert!(q >= last, "λ = {lambda}: {q} < {last}");
            last = q;
        }
    }

    #[test]
    fn incoherent_phase_has_no_root() {
        let k = kernels(0.01, 0.5, 0.0, 0.7);
        assert_eq!(omega_eff(&k), Err(Error::NoCoherentSolution));
        assert_eq!(quality_factor(&k), Err(Error::NoCoherentSolution));
    }

    #[test]
    fn sbm_critical_coupling() {
        let p = ModelParams::new(0.01, 0.5, 0.0, 0.1, 1.0).unwrap();
        let c = alpha_critical(&p, 0.0, &NumericsConfig::default()).unwrap();
        assert!((c.alpha_c - 0.5).abs() < 0.05, "α_c = {}", c.alpha_c);
        assert!(c.bracket.1 - c.bracket.0 < ALPHA_BRACKET_TOL);
        // Continuity across the boundary.
        let cfg = NumericsConfig::default();
        assert!(is_coherent(&p.with_alpha(c.bracket.0), &cfg).unwrap());
        assert!(!is_coherent(&p.with_alpha(c.bracket.1), &cfg).unwrap());
    }

    #[test]
    fn critical_coupling_stable_under_refinement() {
        let p = ModelParams::new(0.1, 0.5, 0.0, 0.1, 1.0).unwrap();
        let coarse = alpha_critical(&p, 0.0, &NumericsConfig::default()).unwrap();
        let fine_cfg = NumericsConfig { quad_rel_tol: 1e-11, freq_window: 60.0, ..NumericsConfig::default() };
        let fine = alpha_critical(&p, 0.0, &fine_cfg).unwrap();
        assert!((coarse.alpha_c - fine.alpha_c).abs() <= ALPHA_BRACKET_TOL);
    }

    #[test]
    fn boundary_moves_out_with_lambda() {
        let p = ModelParams::new(0.01, 0.5, 0.0, 0.1, 1.0).unwrap();
        let pb = phase_boundary(&p, &[0.0, 0.2, 0.4, 0.6], &NumericsConfig::default()).unwrap();
        for w in pb.alpha_c.windows(2) {
            assert!(w[1] >= w[0] - ALPHA_BRACKET_TOL, "{:?}", pb.alpha_c);
        }
        assert!(pb.alpha_c[3] > pb.alpha_c[0]);
    }

    #[test]
    fn unbracketed_boundary_is_flagged() {
        let p = ModelParams::new(0.01, 0.5, 0.0, 0.1, 1.0).unwrap();
        let r = alpha_critical(&p, 2.0, &NumericsConfig::default());
        assert_eq!(r, Err(Error::BoundaryNotBracketed { alpha_hi: ALPHA_UPPER }));
    }

    #[test]
    fn population_sum_rule_holds() {
        for (delta, omega0, lambda, alpha) in [(0.1, 0.5, 0.0, 0.1), (0.1, 0.5, 1.0, 0.1), (0.05, 1.0, 2.0, 0.3)] {
            let k = kernels(delta, omega0, lambda, alpha);
            let r = population_sum_rule(&k).unwrap();
            assert!(r < 1e-3, "{delta} {omega0} {lambda} {alpha}: {r}");
        }
    }

    /// Successive extrema of a sampled series: (time, value).
    fn extrema(ts: &[f64], vs: &[f64]) -> Vec<(f64, f64)> {
        (1..vs.len() - 1)
            .filter(|&i| (vs[i] - vs[i - 1]) * (vs[i + 1] - vs[i]) < 0.0)
            .map(|i| {
                // Parabolic refinement through three samples.
                let (a, b, c) = (vs[i - 1], vs[i], vs[i + 1]);
                let h = ts[i] - ts[i - 1];
                let denom = a - 2.0 * b + c;
                let off = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
                (ts[i] + off * h, b - 0.25 * (a - c) * off)
            })
            .collect()
    }

    #[test]
    fn damped_oscillation_matches_pole() {
        // Frequency of extrema = ω_eff; envelope decays with the pole width
        // Γ(ω_eff)/h'(ω_eff), which tends to Γ(ηΔ) as α → 0.
        let k = kernels(0.1, 0.5, 0.0, 0.03);
        let q = quality_factor(&k).unwrap();
        let w = q.omega_eff;
        let ts = linspace(0.0, 8.0 * 2.0 * PI / w, 4001);
        let p = population(&k, &ts).unwrap();
        let ex = extrema(&ts, &p.values);
        let half_periods: Vec<f64> = ex.windows(2).map(|e| e[1].0 - e[0].0).collect();
        let mean_half = half_periods.iter().sum::<f64>() / half_periods.len() as f64;
        assert!((PI / mean_half / w - 1.0).abs() < 0.02);
        // Envelope fit: least squares of ln|P_ext| against t.
        let pts: Vec<(f64, f64)> = ex.iter().skip(1).map(|(t, v)| (*t, v.abs().ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope =
            pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let rate = -slope;
        assert!((rate / q.decay_rate - 1.0).abs() < 0.05, "rate {rate} vs Γ(ηΔ) {}", q.decay_rate);
        let d = 1e-6 * w;
        let hp = (pole_function(&k, w + d) - pole_function(&k, w - d)) / (2.0 * d);
        let pole_width = k.big_gamma(w) / hp;
        assert!((rate / pole_width - 1.0).abs() < 0.02, "rate {rate} vs pole width {pole_width}");
    }

    #[test]
    fn log_decrement_at_moderate_coupling() {
        let k = kernels(0.1, 0.5, 0.0, 0.1);
        let q = quality_factor(&k).unwrap();
        let w = q.omega_eff;
        let ts = linspace(0.0, 6.0 * 2.0 * PI / w, 3001);
        let p = population(&k, &ts).unwrap();
        let ex = extrema(&ts, &p.values);
        let decrements: Vec<f64> = ex.windows(2).skip(1).map(|e| (e[0].1.abs() / e[1].1.abs()).ln()).collect();
        let mean = decrements.iter().sum::<f64>() / decrements.len() as f64;
        let d = 1e-6 * w;
        let hp = (pole_function(&k, w + d) - pole_function(&k, w - d)) / (2.0 * d);
        let with_residue = PI * k.big_gamma(w) / hp / w;
        let printed = PI * q.decay_rate / w;
        assert!((mean / with_residue - 1.0).abs() < 0.03, "{mean} vs {with_residue}");
        // O(α) residue correction at α = 0.1.
        assert!((mean / printed - 1.0).abs() < 0.15, "{mean} vs {printed}");
    }

    #[test]
    fn fidelity_bounds_and_start() {
        let k = kernels(0.1, 0.5, 1.0, 0.1);
        let ts = linspace(0.0, 200.0, 401);
        let f = fidelity(&k, &ts).unwrap();
        assert!((f.values[0] - 1.0).abs() < 1e-3);
        for v in &f.values {
            assert!(*v > -1e-6 && *v < 1.0 + 1e-6);
        }
        assert_eq!(f.meta.coherent, Some(true));
        assert!(f.meta.omega_eff.is_some());
    }

    #[test]
    fn spectral_weight_uses_same_kernels() {
        let p = ModelParams::new(0.1, 0.5, 0.0, 0.1, 1.0).unwrap();
        let m = solve_eta(&p, &NumericsConfig::default()).unwrap();
        let k = SpectralKernels::new(m);
        let w = 0.07;
        let g = gamma(&m, w);
        let h = w - m.eta_delta - r_shift(&m, w);
        assert_relative_eq!(spectral_weight(&k, w), g / (PI * (h * h + g * g)), max_relative = 1e-14);
    }
}
