//! Independent reference routines used only by tests. Nothing here shares a
//! code path with the production integrators.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E1(x)` for `x > 0`.
pub fn e1(x: f64) -> f64 {
    assert!(x > 0.0);
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // Modified Lentz on the continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Exponential integral `Ei(x)` for `x ≠ 0`.
pub fn ei(x: f64) -> f64 {
    if x < 0.0 {
        return -e1(-x);
    }
    assert!(x > 0.0 && x < 60.0);
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..500 {
        term *= x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add < 1e-18 * sum {
            break;
        }
    }
    EULER_GAMMA + x.ln() + sum
}

/// `∫_0^∞ ω e^{−ω/ω_c}/(ω+b)² dω = (1+β)e^β E1(β) − 1`, `β = b/ω_c`.
pub fn eta_integral_closed(b: f64, omegac: f64) -> f64 {
    let beta = b / omegac;
    (1.0 + beta) * beta.exp() * e1(beta) - 1.0
}

/// Closed form of `R(ω) = P∫_0^∞ g(x)/(ω−x) dx` for
/// `g(x) = 2α b² x e^{−x/ω_c}/(x+b)²`, via partial fractions and Ei/E1.
pub fn r_shift_closed(omega: f64, b: f64, alpha: f64, omegac: f64) -> f64 {
    let beta = b / omegac;
    let u = omega / omegac;
    let a_coef = u / (u + beta).powi(2);
    let c_coef = -beta / (u + beta);
    let exp_e1 = beta.exp() * e1(beta);
    let pv_exp = if u == 0.0 { 0.0 } else { (-u).exp() * ei(u) };
    let bracket = a_coef * (pv_exp + exp_e1) + c_coef * (1.0 / beta - exp_e1);
    2.0 * alpha * beta * beta * omegac * bracket
}

fn simpson_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Classic recursive adaptive Simpson rule.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Simpson over geometric panels `[0, s/2^k, ..., s, 2s, 4s, ..., b]`.
pub fn simpson_graded<F: Fn(f64) -> f64>(f: F, scale: f64, b: f64, tol: f64) -> f64 {
    let mut pts = vec![0.0];
    let mut x = scale * 2f64.powi(-20);
    while x < b {
        pts.push(x);
        x *= 2.0;
    }
    pts.push(b);
    pts.windows(2).map(|w| simpson(&f, w[0], w[1], tol / pts.len() as f64)).sum()
}

/// `P∫_a^b g(x)/(pole−x) dx` by symmetric excision of `(pole−ε, pole+ε)`
/// and Richardson extrapolation in `ε`. The excised piece is odd in `ε`
/// (`2g'ε + g'''ε³/9 + …`), so the table removes `ε`, `ε³`, `ε⁵`.
pub fn pv_by_excision<G: Fn(f64) -> f64>(g: &G, pole: f64, a: f64, b: f64) -> f64 {
    let f = |x: f64| g(x) / (pole - x);
    let eps0 = 0.05 * (pole - a).min(b - pole);
    let excised = |eps: f64| simpson_pieces(&f, a, pole - eps, 1e-13) + simpson_pieces(&f, pole + eps, b, 1e-13);
    let levels = 4;
    let mut table: Vec<f64> = (0..levels).map(|k| excised(eps0 / 2f64.powi(k as i32))).collect();
    for order in [1, 3, 5] {
        let factor = 2f64.powi(order);
        table = table.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
    }
    table[0]
}

fn simpson_pieces<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let n = 64;
    let h = (b - a) / n as f64;
    (0..n).map(|k| simpson(f, a + h * k as f64, a + h * (k + 1) as f64, tol)).sum()
}

/// Poisson weight via log-factorial accumulation.
pub fn poisson_weight(lambda: f64, l: usize) -> f64 {
    if lambda == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    let log_fact: f64 = (1..=l).map(|k| (k as f64).ln()).sum();
    (-lambda + l as f64 * lambda.ln() - log_fact).exp()
}

#[test]
fn exponential_integrals_reference_values() {
    // Abramowitz & Stegun tables.
    assert!((e1(0.5) - 0.559_773_594_776_160_8).abs() < 1e-14);
    assert!((e1(2.0) - 0.048_900_510_708_061_2).abs() < 1e-14);
    assert!((ei(1.0) - 1.895_117_816_355_936_8).abs() < 1e-13);
    assert!((ei(-1.0) + 0.219_383_934_395_520_3).abs() < 1e-14);
}
