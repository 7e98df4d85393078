//! Sampled observables with the metadata needed to reproduce them.

use serde::{Deserialize, Serialize};

use crate::model::{ModelParams, NumericsConfig};
use crate::spectral::SpectralKernels;
use crate::{Error, Result};

/// Run metadata attached to every series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub params: ModelParams,
    pub numerics: NumericsConfig,
    pub eta: f64,
    pub eta_delta: f64,
    pub energy_shift: f64,
    pub lmax: usize,
    /// Effective Rabi frequency, `None` in the incoherent phase or when not computed.
    #[serde(default)]
    pub omega_eff: Option<f64>,
    /// `Γ(ηΔ)`.
    #[serde(default)]
    pub decay_rate: Option<f64>,
    #[serde(default)]
    pub coherent: Option<bool>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl SeriesMeta {
    pub fn from_kernels(kernels: &SpectralKernels) -> SeriesMeta {
        let m = &kernels.model;
        SeriesMeta {
            params: m.params,
            numerics: m.numerics,
            eta: m.eta,
            eta_delta: m.eta_delta,
            energy_shift: m.energy_shift,
            lmax: kernels.lmax,
            omega_eff: None,
            decay_rate: None,
            coherent: None,
            notes: Vec::new(),
        }
    }
}

/// Observable sampled on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: SeriesMeta,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, meta: SeriesMeta) -> Result<TimeSeries> {
        check_grid(&times, "times")?;
        if times.len() != values.len() {
            return Err(Error::InvalidGrid(format!("{} times but {} values", times.len(), values.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite sample {v}")));
        }
        Ok(TimeSeries { times, values, meta })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries { times: self.times.clone(), values: self.values.iter().map(|v| f(*v)).collect(), meta: self.meta.clone() }
    }

    pub fn max_abs_diff(&self, other: &TimeSeries) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `χ''(ω)` sampled on a grid of non-negative frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSeries {
    pub omegas: Vec<f64>,
    pub chi: Vec<f64>,
    pub meta: SeriesMeta,
}

/// Rejects empty, non-finite or non-increasing grids.
pub fn check_grid(grid: &[f64], name: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} is empty")));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid(format!("{name} has non-finite entries")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

/// `count` points from `start` to `stop`, both included.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (count - 1) as f64;
            (0..count).map(|i| if i + 1 == count { stop } else { start + step * i as f64 }).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_is_inclusive() {
        assert_eq!(linspace(0.0, 2.0, 9).len(), 9);
        assert_eq!(linspace(0.0, 2.0, 9)[8], 2.0);
        assert_eq!(linspace(0.0, 2.0, 9)[2], 0.5);
        assert_eq!(linspace(3.0, 4.0, 1), vec![3.0]);
    }

    #[test]
    fn grids_must_increase() {
        assert!(check_grid(&[0.0, 1.0, 1.0], "t").is_err());
        assert!(check_grid(&[], "t").is_err());
        assert!(check_grid(&[0.0, f64::NAN], "t").is_err());
        assert!(check_grid(&[0.0, 0.5], "t").is_ok());
    }
}
