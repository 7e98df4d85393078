//! Truncated exact propagation of the full qubit–oscillator–bath Hamiltonian
//!
//! ```text
//! H = −(Δ/2)σ_x + ω_0 a†a + (g_0/2)(a† + a)σ_x + Σ_k ω_k b_k†b_k + Σ_k (g_k/2)(b_k† + b_k)σ_z
//! ```
//!
//! on `qubit ⊗ oscillator ⊗ bath`, with the bath restricted to occupation
//! vectors below a per-mode cutoff and optionally a total-excitation cap.
//! The state is stored as `ψ[s·n_b + j]` with `s` the qubit-oscillator
//! index and `j` the bath index, so every term is a small dense system
//! matrix times a sparse bath matrix.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chebyshev::{expectation, norm, propagate, Operator};
use super::{discretize_bath, Frame, TruncationSpec};
use crate::dynamics::population;
use crate::model::{ModelParams, NumericsConfig};
use crate::series::check_grid;
use crate::spectral::SpectralKernels;
use crate::{Error, Result};

/// Number of occupation vectors of `modes` modes with entries `< per_mode`
/// and total `≤ max_total`.
fn count_bath_states(modes: usize, per_mode: usize, max_total: usize) -> u128 {
    // ways[t] = number of prefixes with total t.
    let mut ways = vec![0u128; max_total + 1];
    ways[0] = 1;
    for _ in 0..modes {
        let mut next = vec![0u128; max_total + 1];
        for (t, w) in ways.iter().enumerate().filter(|(_, w)| **w > 0) {
            for n in 0..per_mode.min(max_total - t + 1) {
                next[t + n] = next[t + n].saturating_add(*w);
            }
        }
        ways = next;
    }
    ways.iter().fold(0u128, |a, b| a.saturating_add(*b))
}

/// Bath occupation vectors in lexicographic order; the vacuum is first.
struct BathBasis {
    modes: usize,
    states: Vec<u8>,
}

impl BathBasis {
    fn new(modes: usize, per_mode: usize, max_total: usize) -> BathBasis {
        let mut states = Vec::new();
        let mut cur = vec![0u8; modes];
        fn rec(k: usize, left: usize, per_mode: usize, cur: &mut Vec<u8>, out: &mut Vec<u8>) {
            if k == cur.len() {
                out.extend_from_slice(cur);
                return;
            }
            for n in 0..per_mode.min(left + 1) {
                cur[k] = n as u8;
                rec(k + 1, left - n, per_mode, cur, out);
            }
            cur[k] = 0;
        }
        rec(0, max_total, per_mode, &mut cur, &mut states);
        BathBasis { modes, states }
    }

    fn len(&self) -> usize {
        self.states.len() / self.modes
    }

    fn state(&self, j: usize) -> &[u8] {
        &self.states[j * self.modes..(j + 1) * self.modes]
    }
}

/// Symmetric sparse matrix in compressed rows.
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Csr {
    fn mul(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let range = self.row_ptr[r]..self.row_ptr[r + 1];
            *yr = self.cols[range.clone()]
                .iter()
                .zip(&self.vals[range])
                .fold(Complex64::new(0.0, 0.0), |acc, (c, v)| acc + *v * x[*c as usize]);
        }
    }
}

/// Rows of a small dense matrix with exact zeros dropped.
fn sparse_rows(m: &DMatrix<f64>) -> Vec<Vec<(usize, f64)>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).filter(|&j| m[(i, j)] != 0.0).map(|j| (j, m[(i, j)])).collect()).collect()
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `H = H_sys ⊗ 1 + 1 ⊗ H_bath + C ⊗ X_bath` in structured form.
struct EdHamiltonian {
    ns: usize,
    nb: usize,
    h_sys: Vec<Vec<(usize, f64)>>,
    coupling: Vec<Vec<(usize, f64)>>,
    bath_energy: Vec<f64>,
    bath_x: Csr,
    bounds: (f64, f64),
    /// `(1 ⊗ X_bath)x`, reused across applications.
    scratch: Mutex<Vec<Complex64>>,
}

impl EdHamiltonian {
    fn new(params: &ModelParams, trunc: &TruncationSpec) -> Result<EdHamiltonian> {
        let n = trunc.n_osc;
        let per_mode = trunc.n_fock_per_mode;
        let max_total = trunc.max_bath_excitations.unwrap_or(trunc.n_bath_modes * (per_mode - 1));
        let nb = count_bath_states(trunc.n_bath_modes, per_mode, max_total);
        let dim = nb.saturating_mul(2 * n as u128);
        if dim > trunc.budget as u128 {
            return Err(Error::TruncationBudgetExceeded { dim: dim.min(usize::MAX as u128) as usize, budget: trunc.budget });
        }

        let a = DMatrix::from_fn(n, n, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 });
        let num = DMatrix::from_fn(n, n, |i, j| if i == j { i as f64 } else { 0.0 });
        let id_osc = DMatrix::<f64>::identity(n, n);
        let id2 = DMatrix::<f64>::identity(2, 2);
        let sx = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let sz = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let g0 = params.g0();
        let mut h_sys = kron(&sx, &id_osc) * (-0.5 * params.delta) + kron(&id2, &num) * params.omega0;
        let coupling = match trunc.frame {
            Frame::Lab => {
                h_sys += kron(&sx, &(&a + a.transpose())) * (0.5 * g0);
                kron(&sz, &id_osc)
            }
            Frame::Displaced => {
                let x = (a.transpose() - &a) * (g0 / params.omega0);
                let e_minus = (-&x).exp();
                let e_plus = e_minus.transpose();
                let p_plus = (&id2 + &sx) * 0.5;
                let p_minus = (&id2 - &sx) * 0.5;
                let e = kron(&p_plus, &e_minus) + kron(&p_minus, &e_plus);
                kron(&sz, &id_osc) * e
            }
        };

        let modes = discretize_bath(params, trunc);
        let basis = BathBasis::new(trunc.n_bath_modes, per_mode, max_total);
        debug_assert_eq!(basis.len() as u128, nb);
        let nb = basis.len();
        let index: HashMap<&[u8], u32> = (0..nb).map(|j| (basis.state(j), j as u32)).collect();
        let bath_energy: Vec<f64> =
            (0..nb).map(|j| basis.state(j).iter().zip(&modes).map(|(o, m)| *o as f64 * m.omega).sum()).collect();
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nb];
        let mut raised = vec![0u8; trunc.n_bath_modes];
        for j in 0..nb {
            let state = basis.state(j);
            let total: usize = state.iter().map(|o| *o as usize).sum();
            if total >= max_total {
                continue;
            }
            for (k, mode) in modes.iter().enumerate() {
                if (state[k] as usize) + 1 >= per_mode || mode.g == 0.0 {
                    continue;
                }
                raised.copy_from_slice(state);
                raised[k] += 1;
                let i = index[raised.as_slice()];
                let v = 0.5 * mode.g * ((state[k] as f64) + 1.0).sqrt();
                rows[i as usize].push((j as u32, v));
                rows[j].push((i, v));
            }
        }
        let mut row_ptr = Vec::with_capacity(nb + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            cols.extend(row.iter().map(|e| e.0));
            vals.extend(row.iter().map(|e| e.1));
            row_ptr.push(cols.len());
        }
        // ‖C ⊗ X‖ ≤ ‖C‖₂ · max row sum of the symmetric X.
        let x_norm = (0..nb).map(|r| vals[row_ptr[r]..row_ptr[r + 1]].iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let c_norm = SymmetricEigen::new(coupling.clone()).eigenvalues.amax();
        let sys = SymmetricEigen::new(h_sys.clone()).eigenvalues;
        let e_max = bath_energy.iter().copied().fold(0.0, f64::max);
        let spread = c_norm * x_norm;
        let (lo, hi) = (sys.min() - spread, sys.max() + e_max + spread);
        let pad = 1e-3 * (hi - lo) + 1e-12;
        Ok(EdHamiltonian {
            ns: 2 * n,
            nb,
            h_sys: sparse_rows(&h_sys),
            coupling: sparse_rows(&coupling),
            bath_energy,
            bath_x: Csr { row_ptr, cols, vals },
            bounds: (lo - pad, hi + pad),
            scratch: Mutex::new(vec![Complex64::new(0.0, 0.0); 2 * n * nb]),
        })
    }

    fn population(&self, psi: &[Complex64]) -> f64 {
        let half = self.ns / 2 * self.nb;
        let up: f64 = psi[..half].iter().map(|z| z.norm_sqr()).sum();
        let down: f64 = psi[half..].iter().map(|z| z.norm_sqr()).sum();
        up - down
    }
}

impl Operator for EdHamiltonian {
    fn dim(&self) -> usize {
        self.ns * self.nb
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let nb = self.nb;
        let mut xb = self.scratch.lock().expect("scratch lock");
        xb.par_chunks_mut(nb).zip(x.par_chunks(nb)).for_each(|(out, inp)| self.bath_x.mul(inp, out));
        y.par_chunks_mut(nb).enumerate().for_each(|(s, ys)| {
            let xs = &x[s * nb..(s + 1) * nb];
            ys.iter_mut().zip(xs).zip(&self.bath_energy).for_each(|((o, v), e)| *o = *e * v);
            for &(t, h) in &self.h_sys[s] {
                ys.iter_mut().zip(&x[t * nb..(t + 1) * nb]).for_each(|(o, v)| *o += h * v);
            }
            for &(t, c) in &self.coupling[s] {
                ys.iter_mut().zip(&xb[t * nb..(t + 1) * nb]).for_each(|(o, v)| *o += c * v);
            }
        });
    }

    fn spectral_bounds(&self) -> (f64, f64) {
        self.bounds
    }
}

/// `⟨σ_z(t)⟩` from the truncated propagation with conservation diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdRun {
    pub times: Vec<f64>,
    pub population: Vec<f64>,
    /// `max_t |‖ψ(t)‖ − 1|`.
    pub norm_drift: f64,
    /// `max_t |⟨H⟩(t) − ⟨H⟩(0)|`.
    pub energy_drift: f64,
    pub dim: usize,
    /// Hamiltonian applications spent on the propagation.
    pub matvecs: usize,
    pub truncation: TruncationSpec,
}

impl EdRun {
    pub fn max_abs_diff(&self, other: &EdRun) -> f64 {
        self.population.iter().zip(&other.population).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Propagates `|↑⟩|0_a⟩|{0_k}⟩` to the given times; negative times are
/// reached by backward propagation.
pub fn ed_dynamics(params: &ModelParams, trunc: &TruncationSpec, times: &[f64]) -> Result<EdRun> {
    check_grid(times, "times")?;
    let params = params.validate()?;
    let trunc = trunc.validate()?;
    let h = EdHamiltonian::new(&params, &trunc)?;
    let dim = h.dim();
    let mut psi0 = vec![Complex64::new(0.0, 0.0); dim];
    psi0[0] = Complex64::new(1.0, 0.0);
    let mut scratch = vec![Complex64::new(0.0, 0.0); dim];
    let e0 = expectation(&h, &psi0, &mut scratch);

    let mut population = vec![0.0; times.len()];
    let (mut norm_drift, mut energy_drift) = (0.0f64, 0.0f64);
    let split = times.partition_point(|t| *t < 0.0);
    let backward: Vec<f64> = times[..split].iter().rev().map(|t| -t).collect();
    let forward = &times[split..];
    let mut steps = 0;
    for (targets, sign) in [(backward.as_slice(), -1.0), (forward, 1.0)] {
        if targets.is_empty() {
            continue;
        }
        steps += propagate(&h, &psi0, targets, sign, trunc.step_tol, |i, psi| {
            let slot = if sign < 0.0 { split - 1 - i } else { split + i };
            population[slot] = h.population(psi);
            norm_drift = norm_drift.max((norm(psi) - 1.0).abs());
            energy_drift = energy_drift.max((expectation(&h, psi, &mut scratch) - e0).abs());
        });
    }
    Ok(EdRun { times: times.to_vec(), population, norm_drift, energy_drift, dim, matvecs: steps, truncation: trunc })
}

/// Base run plus refinements of the oscillator and of the bath cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdConvergence {
    pub base: EdRun,
    /// `max_t |ΔP|` with `n_osc + 1`.
    pub oscillator_deviation: f64,
    /// `max_t |ΔP|` with `n_fock_per_mode + 1` and the excitation cap `+ 1`.
    pub bath_deviation: f64,
    pub tol: f64,
}

impl EdConvergence {
    pub fn deviation(&self) -> f64 {
        self.oscillator_deviation.max(self.bath_deviation)
    }

    pub fn converged(&self) -> bool {
        self.deviation() <= self.tol
    }
}

pub fn ed_convergence_study(params: &ModelParams, trunc: &TruncationSpec, times: &[f64], tol: f64) -> Result<EdConvergence> {
    let refined = trunc.refined();
    let osc = TruncationSpec { n_osc: refined.n_osc, ..*trunc };
    let bath =
        TruncationSpec { n_fock_per_mode: refined.n_fock_per_mode, max_bath_excitations: refined.max_bath_excitations, ..*trunc };
    let base = ed_dynamics(params, trunc, times)?;
    let oscillator_deviation = ed_dynamics(params, &osc, times)?.max_abs_diff(&base);
    let bath_deviation = ed_dynamics(params, &bath, times)?.max_abs_diff(&base);
    Ok(EdConvergence { base, oscillator_deviation, bath_deviation, tol })
}

/// [`ed_dynamics`] that fails with `TruncationNotConverged` when raising the
/// cutoffs moves `P(t)` by more than `tol`.
pub fn ed_dynamics_checked(params: &ModelParams, trunc: &TruncationSpec, times: &[f64], tol: f64) -> Result<EdConvergence> {
    let study = ed_convergence_study(params, trunc, times, tol)?;
    if !study.converged() {
        return Err(Error::TruncationNotConverged { deviation: study.deviation(), tol });
    }
    Ok(study)
}

/// Analytic `P(t)` against the truncated propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub times: Vec<f64>,
    pub analytic: Vec<f64>,
    pub ed: Vec<f64>,
    pub abs_diff: Vec<f64>,
    pub max_abs_diff: f64,
    pub ed_dim: usize,
    pub frame: Frame,
}

impl OracleComparison {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_abs_diff <= tol
    }
}

pub fn compare_with_analytic(
    params: &ModelParams,
    cfg: &NumericsConfig,
    trunc: &TruncationSpec,
    times: &[f64],
) -> Result<OracleComparison> {
    let kernels = SpectralKernels::from_params(params, cfg)?;
    let analytic = population(&kernels, times)?.values;
    let run = ed_dynamics(params, trunc, times)?;
    let abs_diff: Vec<f64> = analytic.iter().zip(&run.population).map(|(a, b)| (a - b).abs()).collect();
    let max_abs_diff = abs_diff.iter().fold(0.0f64, |m, d| m.max(*d));
    Ok(OracleComparison {
        times: times.to_vec(),
        analytic,
        ed: run.population,
        abs_diff,
        max_abs_diff,
        ed_dim: run.dim,
        frame: trunc.frame,
    })
}
