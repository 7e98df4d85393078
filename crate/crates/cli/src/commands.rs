//! One function per subcommand; each builds a [`Table`] and emits it.

use std::f64::consts::PI;

use anyhow::Result;
use clap::ValueEnum;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use sbsim_core::model::{bare_bath_density, ParamsInput};
use sbsim_core::oracle::{self, ed::ed_convergence_study};
use sbsim_core::{dynamics, response, Error, ModelParams, SeriesMeta, SpectralKernels};

use crate::axis::Axis;
use crate::config::{resolve, Resolved, ValidationError};
use crate::output::{emit, Format, Table};
use crate::{AxisName, Cli, Command, Observable};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn base_meta(command: &str, r: &Resolved) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("tool".into(), json!("sbsim"));
    m.insert("version".into(), json!(VERSION));
    m.insert("command".into(), json!(command));
    m.insert("unit".into(), json!(r.unit));
    m.insert("params".into(), json!(r.params));
    m.insert("numerics".into(), json!(r.numerics));
    m
}

fn with_series(mut m: Map<String, Value>, meta: &SeriesMeta) -> Value {
    if let Value::Object(series) = json!(meta) {
        for (k, v) in series {
            m.entry(k).or_insert(v);
        }
    }
    if meta.coherent == Some(false) {
        m.insert("incoherent".into(), json!(true));
    }
    Value::Object(m)
}

fn kernels(r: &Resolved) -> Result<SpectralKernels> {
    Ok(SpectralKernels::from_params(&r.params, &r.numerics)?)
}

fn format_for(cli: &Cli) -> Format {
    cli.common.format.unwrap_or_else(|| match &cli.common.out {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => Format::Json,
        _ => Format::Csv,
    })
}

pub fn run(cli: &Cli) -> Result<()> {
    let table = match &cli.command {
        Command::Spectrum { coupling, omega } => {
            spectrum(&resolve(&cli.common, Some(coupling), None, ParamsInput::default())?, omega)?
        }
        Command::Fidelity { coupling, t } => fidelity(&resolve(&cli.common, Some(coupling), None, ParamsInput::default())?, t)?,
        Command::Susceptibility { coupling, omega } => {
            susceptibility(&resolve(&cli.common, Some(coupling), None, ParamsInput::default())?, omega)?
        }
        Command::Correlation { coupling, t, with_population } => {
            correlation(&resolve(&cli.common, Some(coupling), None, ParamsInput::default())?, t, *with_population)?
        }
        Command::Qfactor { coupling } => qfactor(&resolve(&cli.common, Some(coupling), None, ParamsInput::default())?)?,
        Command::PhaseBoundary { lambda } => {
            let defaults = ParamsInput { alpha: Some(0.0), ..ParamsInput::default() };
            phase_boundary(&resolve(&cli.common, None, None, defaults)?, lambda)?
        }
        Command::OracleCompare { coupling, truncation, t, tol, convergence_tol } => {
            let r = resolve(&cli.common, Some(coupling), Some(truncation), ParamsInput::default())?;
            oracle_compare(&r, t.as_ref(), *tol, *convergence_tol)?
        }
        Command::Sweep { coupling, axis, observable } => {
            let name = AxisName::from_str(&axis[0], true).map_err(|_| {
                ValidationError(format!("unknown axis '{}'; use delta, omega0, lambda, alpha or omegac", axis[0]))
            })?;
            let grid: Axis = axis[1].parse().map_err(|e| ValidationError(format!("axis {}: {e}", axis[0])))?;
            // The swept field needs no value of its own.
            let mut defaults = ParamsInput::default();
            set_field(&mut defaults, name, grid.values[0]);
            let coupling = (name != AxisName::Lambda).then_some(coupling);
            sweep(&resolve(&cli.common, coupling, None, defaults)?, name, &grid, *observable)?
        }
    };
    emit(&table, format_for(cli), cli.common.out.as_deref())
}

fn spectrum(r: &Resolved, omega: &Axis) -> Result<Table> {
    let k = kernels(r)?;
    let f = r.frequency_scale();
    let omegas = omega.scaled(f);
    let rows: Vec<[f64; 5]> = omegas
        .par_iter()
        .map(|&w| {
            [k.big_gamma(w), k.big_sigma(w), k.modulated_bath_density(w), k.sb_bath_density(w), bare_bath_density(&r.params, w)]
        })
        .collect();
    let col = |i: usize| rows.iter().map(move |row| row[i] / f);
    let meta = with_series(base_meta("spectrum", r), &SeriesMeta::from_kernels(&k));
    Ok(Table::new(meta)
        .column("omega", omega.values.clone())
        .column("Gamma", col(0))
        .column("Sigma", col(1))
        .column("G_sa", col(2))
        .column("G_sb", col(3))
        .column("G", col(4)))
}

fn fidelity(r: &Resolved, t: &Axis) -> Result<Table> {
    let k = kernels(r)?;
    let f = r.frequency_scale();
    let p = dynamics::population(&k, &t.scaled(1.0 / f))?;
    let meta = with_series(base_meta("fidelity", r), &p.meta);
    Ok(Table::new(meta)
        .column("t", t.values.clone())
        .column("F", p.values.iter().map(|v| 0.5 * (1.0 + v)))
        .column("P", p.values.clone()))
}

fn susceptibility(r: &Resolved, omega: &Axis) -> Result<Table> {
    let k = kernels(r)?;
    let f = r.frequency_scale();
    if r.params.alpha == 0.0 {
        let lines = response::ibm_lines(&k);
        let mut meta = SeriesMeta::from_kernels(&k);
        meta.notes.push("alpha = 0: delta lines at delta + l*omega0 with Poisson weights".into());
        let meta = with_series(base_meta("susceptibility", r), &meta);
        return Ok(Table::new(meta)
            .column("position", lines.iter().map(|l| l.position / f))
            .column("weight", lines.iter().map(|l| l.weight)));
    }
    let s = response::susceptibility(&k, &omega.scaled(f))?;
    let meta = with_series(base_meta("susceptibility", r), &s.meta);
    Ok(Table::new(meta).column("omega", omega.values.clone()).column("chi", s.chi.iter().map(|c| c * f)))
}

fn correlation(r: &Resolved, t: &Axis, with_population: bool) -> Result<Table> {
    let k = kernels(r)?;
    let times = t.scaled(1.0 / r.frequency_scale());
    let c = response::correlation(&k, &times)?;
    let meta = with_series(base_meta("correlation", r), &c.meta);
    let mut table = Table::new(meta).column("t", t.values.clone()).column("C", c.values.clone());
    if with_population {
        table = table.column("P", dynamics::population(&k, &times)?.values);
    }
    Ok(table)
}

fn qfactor(r: &Resolved) -> Result<Table> {
    let k = kernels(r)?;
    let f = r.frequency_scale();
    let q = dynamics::quality_factor(&k)?;
    let mut meta = SeriesMeta::from_kernels(&k);
    meta.omega_eff = Some(q.omega_eff);
    meta.decay_rate = Some(q.decay_rate);
    meta.coherent = Some(true);
    let mut m = base_meta("qfactor", r);
    m.insert("roots".into(), json!(q.roots.iter().map(|w| w / f).collect::<Vec<_>>()));
    Ok(Table::new(with_series(m, &meta))
        .column("lambda", [r.params.lambda])
        .column("omega_eff", [q.omega_eff / f])
        .column("decay_rate", [q.decay_rate / f])
        .column("q", [q.q]))
}

fn phase_boundary(r: &Resolved, lambda: &Axis) -> Result<Table> {
    sbsim_core::series::check_grid(&lambda.values, "lambda grid")?;
    let cells: Vec<Result<Option<dynamics::CriticalCoupling>, Error>> = lambda
        .values
        .par_iter()
        .map(|&l| match dynamics::alpha_critical(&r.params, l, &r.numerics) {
            Ok(c) => Ok(Some(c)),
            Err(Error::BoundaryNotBracketed { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let cells = cells.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut m = base_meta("phase-boundary", r);
    m.insert("alpha_upper".into(), json!(dynamics::ALPHA_UPPER));
    m.insert("bracket_tol".into(), json!(dynamics::ALPHA_BRACKET_TOL));
    m.insert("note".into(), json!("alpha in params is ignored; rows with bracketed = 0 stay coherent up to alpha_upper"));
    Ok(Table::new(Value::Object(m))
        .column("lambda", lambda.values.clone())
        .column("alpha_c", cells.iter().map(|c| c.map_or(f64::NAN, |c| c.alpha_c)))
        .column("alpha_lo", cells.iter().map(|c| c.map_or(dynamics::ALPHA_UPPER, |c| c.bracket.0)))
        .column("alpha_hi", cells.iter().map(|c| c.map_or(f64::NAN, |c| c.bracket.1)))
        .column("bracketed", cells.iter().map(|c| if c.is_some() { 1.0 } else { 0.0 })))
}

fn oracle_compare(r: &Resolved, t: Option<&Axis>, tol: f64, convergence_tol: Option<f64>) -> Result<Table> {
    let k = kernels(r)?;
    let f = r.frequency_scale();
    let times: Vec<f64> = match t {
        Some(axis) => axis.scaled(1.0 / f),
        None => {
            let w = dynamics::omega_eff(&k).unwrap_or(r.params.delta);
            sbsim_core::series::linspace(0.0, 3.0 * 2.0 * PI / w, 101)
        }
    };
    let analytic = dynamics::population(&k, &times)?;
    let (ed, convergence) = match convergence_tol {
        Some(ctol) => {
            let study = ed_convergence_study(&r.params, &r.truncation, &times, ctol)?;
            if !study.converged() {
                return Err(Error::TruncationNotConverged { deviation: study.deviation(), tol: ctol }.into());
            }
            (study.base.clone(), Some(study))
        }
        None => (oracle::ed_dynamics(&r.params, &r.truncation, &times)?, None),
    };
    let diff: Vec<f64> = analytic.values.iter().zip(&ed.population).map(|(a, b)| (a - b).abs()).collect();
    let max_abs_diff = diff.iter().fold(0.0f64, |m, d| m.max(*d));
    let pass = max_abs_diff <= tol;
    eprintln!(
        "oracle-compare: {} max_abs_diff={max_abs_diff:.6e} tol={tol} frame={:?} dim={}",
        if pass { "PASS" } else { "FAIL" },
        r.truncation.frame,
        ed.dim
    );
    let mut m = base_meta("oracle-compare", r);
    m.insert("truncation".into(), json!(r.truncation));
    m.insert("ed_dim".into(), json!(ed.dim));
    m.insert("ed_norm_drift".into(), json!(ed.norm_drift));
    m.insert("ed_energy_drift".into(), json!(ed.energy_drift));
    m.insert("max_abs_diff".into(), json!(max_abs_diff));
    m.insert("tol".into(), json!(tol));
    m.insert("pass".into(), json!(pass));
    if let Some(study) = convergence {
        m.insert("oscillator_refinement_deviation".into(), json!(study.oscillator_deviation));
        m.insert("bath_refinement_deviation".into(), json!(study.bath_deviation));
    }
    Ok(Table::new(with_series(m, &analytic.meta))
        .column("t", times.iter().map(|t| t * f))
        .column("P_analytic", analytic.values.clone())
        .column("P_ed", ed.population.clone())
        .column("absdiff", diff))
}

fn set_field(p: &mut ParamsInput, name: AxisName, v: f64) {
    match name {
        AxisName::Delta => p.delta = Some(v),
        AxisName::Omega0 => p.omega0 = Some(v),
        AxisName::Lambda => p.lambda = Some(v),
        AxisName::Alpha => p.alpha = Some(v),
        AxisName::Omegac => p.omegac = Some(v),
    }
}

fn with_field(p: &ModelParams, name: AxisName, v: f64) -> Result<ModelParams> {
    let mut q = *p;
    match name {
        AxisName::Delta => q.delta = v,
        AxisName::Omega0 => q.omega0 = v,
        AxisName::Lambda => q.lambda = v,
        AxisName::Alpha => q.alpha = v,
        AxisName::Omegac => q.omegac = v,
    }
    Ok(q.validate()?)
}

/// One sweep cell: observable columns plus the per-cell metadata.
type Cell = (Vec<f64>, Value);

fn cell_meta(k: &SpectralKernels, omega_eff: Option<f64>) -> Value {
    json!({
        "eta": k.model.eta,
        "eta_delta": k.model.eta_delta,
        "lmax": k.lmax,
        "omega_eff": omega_eff,
        "coherent": omega_eff.is_some(),
    })
}

fn sweep_cell(r: &Resolved, params: &ModelParams, observable: Observable) -> Result<Cell, Error> {
    let f = r.frequency_scale();
    if observable == Observable::AlphaC {
        return match dynamics::alpha_critical(params, params.lambda, &r.numerics) {
            Ok(c) => Ok((vec![c.alpha_c, 1.0], json!({ "bracket": [c.bracket.0, c.bracket.1] }))),
            Err(Error::BoundaryNotBracketed { alpha_hi }) => Ok((vec![f64::NAN, 0.0], json!({ "bracket": [alpha_hi, null] }))),
            Err(e) => Err(e),
        };
    }
    let k = SpectralKernels::from_params(params, &r.numerics)?;
    let omega_eff = dynamics::omega_eff(&k).ok();
    let meta = cell_meta(&k, omega_eff);
    let coherent = if omega_eff.is_some() { 1.0 } else { 0.0 };
    let values = match observable {
        Observable::Qfactor => match dynamics::quality_factor(&k) {
            Ok(q) => vec![q.omega_eff / f, q.decay_rate / f, q.q, 1.0],
            Err(Error::NoCoherentSolution) => vec![f64::NAN, k.big_gamma(k.eta_delta()) / f, f64::NAN, 0.0],
            Err(e) => return Err(e),
        },
        Observable::OmegaEff => vec![omega_eff.map_or(f64::NAN, |w| w / f), coherent],
        Observable::Eta => vec![k.model.eta, k.model.eta_delta / f],
        Observable::SumRule => {
            if params.alpha == 0.0 {
                vec![0.0, response::sum_rule(&k)?]
            } else {
                vec![dynamics::population_sum_rule(&k)?, response::sum_rule(&k)?]
            }
        }
        Observable::AlphaC => unreachable!("handled above"),
    };
    Ok((values, meta))
}

fn sweep(r: &Resolved, name: AxisName, grid: &Axis, observable: Observable) -> Result<Table> {
    sbsim_core::series::check_grid(&grid.values, "sweep axis")?;
    if observable == Observable::AlphaC && name == AxisName::Alpha {
        return Err(ValidationError("alpha-c cannot be swept over alpha".into()).into());
    }
    let params = grid.values.iter().map(|&v| with_field(&r.params, name, v)).collect::<Result<Vec<_>>>()?;
    let cells: Vec<Result<Cell, Error>> = params.par_iter().map(|p| sweep_cell(r, p, observable)).collect();
    let cells = cells.into_iter().collect::<Result<Vec<_>, _>>()?;
    let names: &[&str] = match observable {
        Observable::Qfactor => &["omega_eff", "decay_rate", "q", "coherent"],
        Observable::OmegaEff => &["omega_eff", "coherent"],
        Observable::Eta => &["eta", "eta_delta"],
        Observable::AlphaC => &["alpha_c", "bracketed"],
        Observable::SumRule => &["population_sum_rule", "chi_sum_rule"],
    };
    let axis_name = name.to_possible_value().expect("named axis").get_name().to_string();
    let mut m = base_meta("sweep", r);
    m.insert("axis".into(), json!(axis_name));
    m.insert("observable".into(), json!(observable.to_possible_value().expect("named observable").get_name()));
    m.insert("cells".into(), Value::Array(cells.iter().map(|c| c.1.clone()).collect()));
    let mut table = Table::new(Value::Object(m)).column(&axis_name, grid.values.clone());
    for (i, n) in names.iter().enumerate() {
        table = table.column(n, cells.iter().map(|c| c.0[i]));
    }
    Ok(table)
}
