//! Chebyshev propagation of `e^{−iHτ}ψ` for a real symmetric `H` with known
//! spectral bounds.
//!
//! With `H = a·H̃ + b`, `spec(H̃) ⊂ [−1, 1]`,
//! `e^{−iHτ} = e^{−ibτ} [J_0(aτ) + 2 Σ_{k≥1} (−i)^k J_k(aτ) T_k(H̃)]`,
//! and the Bessel coefficients decay faster than exponentially once
//! `k > aτ`, so the series is cut where they drop below the tolerance.

use num_complex::Complex64;

/// Real symmetric operator acting on complex vectors.
pub(crate) trait Operator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
    /// Interval guaranteed to contain the spectrum.
    fn spectral_bounds(&self) -> (f64, f64);
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

pub(crate) fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn expectation<O: Operator>(op: &O, psi: &[Complex64], scratch: &mut [Complex64]) -> f64 {
    op.apply(psi, scratch);
    dot(psi, scratch).re
}

/// `J_0(x), …, J_kmax(x)` for `x ≥ 0` by Miller's backward recurrence,
/// normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub(crate) fn bessel_j(x: f64, kmax: usize) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; kmax + 1];
        out[0] = 1.0;
        return out;
    }
    let start = {
        let n = kmax.max(x.ceil() as usize) + 40 + (10.0 * x.cbrt()) as usize;
        n + n % 2
    };
    let mut out = vec![0.0; kmax + 1];
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    for k in (0..=start).rev() {
        // cur = J_k (unnormalized), next = J_{k+1}.
        if k <= kmax {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            out.iter_mut().for_each(|v| *v *= s);
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Largest single step in units of the scaled spectral radius.
const MAX_PHASE: f64 = 400.0;

/// Applies `e^{−i·sign·Hτ}` to `psi` in place; returns the number of matvecs.
fn step<O: Operator>(op: &O, psi: &mut [Complex64], tau: f64, sign: f64, tol: f64, work: &mut [Vec<Complex64>; 3]) -> usize {
    let (lo, hi) = op.spectral_bounds();
    let a = 0.5 * (hi - lo);
    let b = 0.5 * (hi + lo);
    let x = a * tau;
    let kmax = (x + 20.0 + 10.0 * x.cbrt()).ceil() as usize;
    let j = bessel_j(x, kmax);
    let order = (0..=kmax).rev().find(|&k| j[k].abs() > 1e-3 * tol).unwrap_or(0).max(1);
    let [prev, cur, next] = work;
    let inv_a = 1.0 / a;
    // T_0 ψ and T_1 ψ = H̃ψ.
    prev.copy_from_slice(psi);
    op.apply(prev, cur);
    cur.iter_mut().zip(prev.iter()).for_each(|(c, p)| *c = (*c - b * p) * inv_a);
    let minus_i = Complex64::new(0.0, -sign);
    let mut phase = minus_i;
    let mut out: Vec<Complex64> = prev.iter().map(|p| j[0] * p).collect();
    out.iter_mut().zip(cur.iter()).for_each(|(o, c)| *o += 2.0 * j[1] * phase * c);
    for k in 2..=order {
        op.apply(cur, next);
        next.iter_mut().zip(cur.iter()).zip(prev.iter()).for_each(|((n, c), p)| *n = 2.0 * (*n - b * c) * inv_a - p);
        phase *= minus_i;
        let coef = 2.0 * j[k] * phase;
        out.iter_mut().zip(next.iter()).for_each(|(o, n)| *o += coef * n);
        std::mem::swap(prev, cur);
        std::mem::swap(cur, next);
    }
    let global = Complex64::from_polar(1.0, -sign * b * tau);
    psi.iter_mut().zip(&out).for_each(|(p, o)| *p = global * o);
    order
}

/// Propagates `ψ` to every time in `targets` (non-negative, increasing) under
/// `e^{−i·sign·Ht}` and hands each state to `observe`. Returns the number of
/// operator applications.
pub(crate) fn propagate<O, F>(op: &O, psi0: &[Complex64], targets: &[f64], sign: f64, tol: f64, mut observe: F) -> usize
where
    O: Operator,
    F: FnMut(usize, &[Complex64]),
{
    let (lo, hi) = op.spectral_bounds();
    let max_tau = MAX_PHASE / (0.5 * (hi - lo)).max(1e-300);
    let mut psi = psi0.to_vec();
    let n = psi.len();
    let mut work = [vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n]];
    let mut t = 0.0;
    let mut matvecs = 0;
    for (i, &target) in targets.iter().enumerate() {
        while target - t > 0.0 {
            let tau = (target - t).min(max_tau);
            matvecs += step(op, &mut psi, tau, sign, tol, &mut work);
            t = if tau == target - t { target } else { t + tau };
        }
        observe(i, &psi);
    }
    matvecs
}
