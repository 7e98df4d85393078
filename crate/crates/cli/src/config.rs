//! Configuration file, flag overlay and unit conversion.

use std::fmt;
use std::fs;

use anyhow::{Context, Result};
use serde::Deserialize;

use sbsim_core::model::ParamsInput;
use sbsim_core::oracle::{Discretization, Frame, TruncationSpec};
use sbsim_core::{ModelParams, NumericsConfig};

use crate::{Common, Coupling, TruncationFlags};

/// Invalid user input outside the core validation (exit code 2).
#[derive(Debug, Clone)]
pub struct ValidationError(pub String);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    /// Grids in units of ω_c (times in 1/ω_c).
    Omegac,
    /// Frequency grids in units of Δ, time grids in units of 1/Δ.
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FrameArg {
    Lab,
    Displaced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DiscretizationArg {
    Linear,
    Logarithmic,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    params: ParamsInput,
    #[serde(default)]
    numerics: NumericsConfig,
    #[serde(default)]
    truncation: TruncationSpec,
}

/// Validated inputs of one run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: ModelParams,
    pub numerics: NumericsConfig,
    pub truncation: TruncationSpec,
    pub unit: Unit,
}

impl Resolved {
    /// Multiplies a frequency grid given in the chosen unit into `ω_c` units.
    pub fn frequency_scale(&self) -> f64 {
        match self.unit {
            Unit::Omegac => 1.0,
            Unit::Delta => self.params.delta,
        }
    }
}

fn load_config(common: &Common) -> Result<ConfigFile> {
    match &common.config {
        None => Ok(ConfigFile::default()),
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| ValidationError(format!("config {}: {e}", path.display())).into())
        }
    }
}

/// Config file overlaid by flags. `coupling` is `None` where λ is an axis.
/// `defaults` fill fields that neither the file nor the flags set.
pub fn resolve(
    common: &Common,
    coupling: Option<&Coupling>,
    trunc: Option<&TruncationFlags>,
    defaults: ParamsInput,
) -> Result<Resolved> {
    let file = load_config(common)?;
    let flags = ParamsInput {
        delta: common.delta,
        omega0: common.omega0,
        lambda: coupling.and_then(|c| c.lambda),
        g0: coupling.and_then(|c| c.g0),
        alpha: common.alpha,
        omegac: common.omegac,
    };
    let params = defaults.overlay(&file.params).overlay(&flags).validate()?;
    let mut numerics = file.numerics;
    if let Some(v) = common.quad_rel_tol {
        numerics.quad_rel_tol = v;
    }
    if let Some(v) = common.freq_window {
        numerics.freq_window = v;
    }
    if let Some(v) = common.poisson_tail_tol {
        numerics.poisson_tail_tol = v;
    }
    if let Some(v) = common.fixed_point_tol {
        numerics.fixed_point_tol = v;
    }
    if let Some(v) = common.pv_grid {
        numerics.pv_grid = v;
    }
    let numerics = numerics.validate()?;
    let mut truncation = file.truncation;
    if let Some(t) = trunc {
        if let Some(v) = t.n_osc {
            truncation.n_osc = v;
        }
        if let Some(v) = t.n_bath_modes {
            truncation.n_bath_modes = v;
        }
        if let Some(v) = t.n_fock {
            truncation.n_fock_per_mode = v;
        }
        if t.product_basis {
            truncation.max_bath_excitations = None;
        } else if let Some(v) = t.max_exc {
            truncation.max_bath_excitations = Some(v);
        }
        if let Some(f) = t.frame {
            truncation.frame = match f {
                FrameArg::Lab => Frame::Lab,
                FrameArg::Displaced => Frame::Displaced,
            };
        }
        if let Some(d) = t.discretization {
            truncation.discretization = match d {
                DiscretizationArg::Linear => Discretization::Linear,
                DiscretizationArg::Logarithmic => Discretization::Logarithmic,
            };
        }
        if let Some(v) = t.range {
            truncation.range = v;
        }
        if let Some(v) = t.budget {
            truncation.budget = v;
        }
    }
    let truncation = truncation.validate()?;
    Ok(Resolved { params, numerics, truncation, unit: common.unit })
}
