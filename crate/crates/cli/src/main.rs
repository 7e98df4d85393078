//! `sbsim`: data files for the fidelity, susceptibility, quality-factor and
//! phase-boundary studies, plus the exact-diagonalization cross-check.

mod axis;
mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::axis::Axis;
use crate::config::Unit;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "sbsim", version, about = "Oscillator-steered spin-boson dynamics")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand; flags override the config file.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON file `{"params": {...}, "numerics": {...}, "truncation": {...}}`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Unit of frequency grids (and inverse unit of time grids) on input and output.
    #[arg(long, value_enum, default_value_t = Unit::Omegac, global = true)]
    pub unit: Unit,
    /// Output file; stdout when absent. A `<out>.meta.json` sidecar is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; defaults to json for `.json` paths and csv otherwise.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Bare tunneling splitting Δ.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Oscillator frequency ω0.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub omega0: Option<f64>,
    /// Ohmic coupling α.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Bath cutoff ω_c.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub omegac: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub quad_rel_tol: Option<f64>,
    /// Integration window W in units of ω_c.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub freq_window: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub poisson_tail_tol: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub fixed_point_tol: Option<f64>,
    /// Maximum panel count of the adaptive quadratures.
    #[arg(long, global = true)]
    pub pv_grid: Option<usize>,
}

/// Oscillator coupling, given either as λ or as g0.
#[derive(Debug, Clone, Args)]
pub struct Coupling {
    /// λ = g0²/ω0².
    #[arg(long, conflicts_with = "g0", allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub g0: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TruncationFlags {
    #[arg(long)]
    pub n_osc: Option<usize>,
    #[arg(long)]
    pub n_bath_modes: Option<usize>,
    #[arg(long)]
    pub n_fock: Option<usize>,
    /// Cap on the total number of bath quanta.
    #[arg(long, conflicts_with = "product_basis")]
    pub max_exc: Option<usize>,
    /// Drop the excitation cap and keep the full product basis.
    #[arg(long)]
    pub product_basis: bool,
    #[arg(long, value_enum)]
    pub frame: Option<config::FrameArg>,
    #[arg(long, value_enum)]
    pub discretization: Option<config::DiscretizationArg>,
    /// Upper end of the discretized bath in units of ω_c.
    #[arg(long)]
    pub range: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AxisName {
    Delta,
    Omega0,
    Lambda,
    Alpha,
    Omegac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Observable {
    Qfactor,
    OmegaEff,
    Eta,
    AlphaC,
    SumRule,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernels Γ, Σ and the bath densities on a frequency grid.
    Spectrum {
        #[command(flatten)]
        coupling: Coupling,
        #[arg(long, default_value = "0:3:601")]
        omega: Axis,
    },
    /// Fidelity F(t) and population P(t).
    Fidelity {
        #[command(flatten)]
        coupling: Coupling,
        #[arg(long = "t", default_value = "0:200:401")]
        t: Axis,
    },
    /// χ''(ω); at α = 0 the delta lines (position, weight).
    Susceptibility {
        #[command(flatten)]
        coupling: Coupling,
        #[arg(long, default_value = "0:3:601")]
        omega: Axis,
    },
    /// Correlation C(t), optionally next to P(t).
    Correlation {
        #[command(flatten)]
        coupling: Coupling,
        #[arg(long = "t", default_value = "0:200:401")]
        t: Axis,
        /// Add the population P(t) as a third column.
        #[arg(long)]
        with_population: bool,
    },
    /// ω_eff, Γ(ηΔ) and Q = ω_eff/Γ(ηΔ).
    Qfactor {
        #[command(flatten)]
        coupling: Coupling,
    },
    /// Critical coupling α_c on a λ grid.
    PhaseBoundary {
        #[arg(long, default_value = "0")]
        lambda: Axis,
    },
    /// Analytic P(t) against the truncated exact propagation.
    OracleCompare {
        #[command(flatten)]
        coupling: Coupling,
        #[command(flatten)]
        truncation: TruncationFlags,
        /// Time grid; defaults to three periods of ω_eff with 101 points.
        #[arg(long = "t")]
        t: Option<Axis>,
        /// Max-abs tolerance of the pass/fail summary.
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        /// Also refine the cutoffs and fail if P(t) moves by more than this.
        #[arg(long)]
        convergence_tol: Option<f64>,
    },
    /// One observable over one parameter axis.
    Sweep {
        #[command(flatten)]
        coupling: Coupling,
        /// Axis name and grid, e.g. `--axis lambda 0:2:9`.
        #[arg(long, num_args = 2, value_names = ["NAME", "GRID"], required = true)]
        axis: Vec<String>,
        #[arg(long, value_enum)]
        observable: Observable,
    },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("SBSIM_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| config::ValidationError(format!("SBSIM_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Exit 2 for invalid input, 3 for numerical failure (naming the module), 1 otherwise.
fn exit_code(err: &anyhow::Error) -> (u8, String) {
    if let Some(e) = err.downcast_ref::<sbsim_core::Error>() {
        return match e.numerical_module() {
            Some(module) => (3, format!("numerical failure in {module}: {e}")),
            None => (2, format!("invalid input: {e}")),
        };
    }
    if err.downcast_ref::<config::ValidationError>().is_some() {
        return (2, format!("invalid input: {err:#}"));
    }
    (1, format!("error: {err:#}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| commands::run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, msg) = exit_code(&err);
            eprintln!("sbsim: {msg}");
            ExitCode::from(code)
        }
    }
}
