//! Adaptive Gauss-Kronrod quadrature, principal-value integrals by
//! subtraction, and frozen cosine-transform rules.
//!
//! All spectral integrands in this crate are smooth between a known set of
//! breakpoints (kinks at the Poisson sideband origins, narrow Lorentzian
//! peaks at the poles), so the integrators take an explicit breakpoint list
//! and refine globally from there.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525478426,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// 10-point Gauss weights for the odd Kronrod abscissae XGK[1], XGK[3], ...
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Phase advance of `cos(ωt)` allowed across one panel of a [`CosineRule`].
const PHASE_PER_PANEL: f64 = 8.0;

/// The 21 Kronrod abscissae and weights mapped onto `[a, b]`.
pub fn gk21_rule(a: f64, b: f64) -> [(f64, f64); 21] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 21];
    for i in 0..10 {
        out[2 * i] = (c - h * XGK[i], h * WGK[i]);
        out[2 * i + 1] = (c + h * XGK[i], h * WGK[i]);
    }
    out[20] = (c, h * WGK[10]);
    out
}

/// One panel of a finished adaptive integration.
#[derive(Debug, Clone)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub value: f64,
    pub err: f64,
    /// `∫|f|` over the panel.
    pub mass: f64,
    /// Integrand at the [`gk21_rule`] nodes of the panel.
    pub fvals: [f64; 21],
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
        let rule = gk21_rule(a, b);
        let mut fvals = [0.0; 21];
        for (slot, (x, _)) in fvals.iter_mut().zip(rule.iter()) {
            *slot = f(*x);
        }
        let h = 0.5 * (b - a);
        let mut kronrod = 0.0;
        let mut mass = 0.0;
        for (fv, (_, w)) in fvals.iter().zip(rule.iter()) {
            kronrod += w * fv;
            mass += w * fv.abs();
        }
        let mut gauss = 0.0;
        for (j, wg) in WG.iter().enumerate() {
            let i = 2 * j + 1;
            gauss += wg * (fvals[2 * i] + fvals[2 * i + 1]);
        }
        gauss *= h;
        let mean = kronrod / (b - a);
        let resasc: f64 = fvals.iter().zip(rule.iter()).map(|(fv, (_, w))| w * (fv - mean).abs()).sum();
        let mut err = (kronrod - gauss).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
        }
        if mass > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * mass);
        }
        Panel { a, b, value: kronrod, err, mass, fvals }
    }

    fn splittable(&self) -> bool {
        let mid = 0.5 * (self.a + self.b);
        mid > self.a && mid < self.b && (self.b - self.a) > 1e-15 * self.a.abs().max(self.b.abs())
    }
}

struct Worst(Panel);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.0.err == other.0.err
    }
}
impl Eq for Worst {}
impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.err.total_cmp(&other.0.err).then_with(|| other.0.a.total_cmp(&self.0.a))
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
    /// `∫|f|`; the tolerance is relative to this.
    pub mass: f64,
    pub converged: bool,
    /// Final partition in increasing order.
    pub panels: Vec<Panel>,
}

/// Sorted, deduplicated, finite copy of a breakpoint list.
pub fn clean_breakpoints(points: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = points.iter().copied().filter(|x| x.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Adaptive G10K21 integration of `f` over `[bp.first, bp.last]`, starting
/// from the panels delimited by `breakpoints` and bisecting the panel with
/// the largest error estimate until the total error is below
/// `rel_tol·∫|f|` or `max_panels` is reached.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breakpoints: &[f64], rel_tol: f64, max_panels: usize) -> Integral {
    let pts = clean_breakpoints(breakpoints);
    assert!(pts.len() >= 2, "integration needs two distinct breakpoints");

    let mut heap = BinaryHeap::new();
    let mut frozen = Vec::new();
    for w in pts.windows(2) {
        heap.push(Worst(Panel::new(&f, w[0], w[1])));
    }
    let totals = |heap: &BinaryHeap<Worst>, frozen: &Vec<Panel>| {
        heap.iter().map(|w| &w.0).chain(frozen.iter()).fold((0.0, 0.0), |(e, m), p| (e + p.err, m + p.mass))
    };
    let (mut err, mut mass) = totals(&heap, &frozen);
    let mut converged = err <= rel_tol * mass;
    let mut n = heap.len() + frozen.len();
    while !converged && n < max_panels.max(pts.len()) {
        let Some(Worst(worst)) = heap.pop() else { break };
        if !worst.splittable() {
            frozen.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let left = Panel::new(&f, worst.a, mid);
        let right = Panel::new(&f, mid, worst.b);
        err += left.err + right.err - worst.err;
        mass += left.mass + right.mass - worst.mass;
        heap.push(Worst(left));
        heap.push(Worst(right));
        n += 1;
        if n % 64 == 0 {
            // Running sums drift; resum occasionally.
            let (e, m) = totals(&heap, &frozen);
            err = e;
            mass = m;
        }
        converged = err <= rel_tol * mass;
    }
    let mut panels: Vec<Panel> = heap.into_iter().map(|w| w.0).chain(frozen).collect();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).sum();
    let abs_err = panels.iter().map(|p| p.err).sum();
    let mass = panels.iter().map(|p| p.mass).sum();
    Integral { value, abs_err, mass, converged: converged || abs_err <= rel_tol * mass, panels }
}

/// Principal value `P∫_a^b g(x)/(pole − x) dx` with `a`, `b` the extreme
/// breakpoints.
///
/// Inside `(a, b)` the pole is removed by subtraction:
/// `∫ (g(x) − g(pole))/(pole − x) dx + g(pole)·ln((pole − a)/(b − pole))`,
/// leaving a smooth integrand. Outside, the integral is ordinary.
pub fn principal_value<G: Fn(f64) -> f64>(g: G, pole: f64, breakpoints: &[f64], rel_tol: f64, max_panels: usize) -> Integral {
    let pts = clean_breakpoints(breakpoints);
    let (a, b) = (pts[0], pts[pts.len() - 1]);
    if !(pole > a && pole < b) {
        return integrate(|x| g(x) / (pole - x), &pts, rel_tol, max_panels);
    }
    let gp = g(pole);
    let mut with_pole = pts;
    with_pole.push(pole);
    let mut out = integrate(
        |x| {
            let d = pole - x;
            if d == 0.0 {
                0.0
            } else {
                (g(x) - gp) / d
            }
        },
        &with_pole,
        rel_tol,
        max_panels,
    );
    if gp != 0.0 {
        out.value += gp * ((pole - a) / (b - pole)).ln();
    }
    out
}

/// Frozen quadrature for `∫ f(ω) cos(ωt) dω`, valid for `|t| ≤ t_max`.
///
/// The partition comes from an adaptive integration of `f` alone. Panels
/// carrying non-negligible mass are then cut so that `cos(ωt)` advances at
/// most [`PHASE_PER_PANEL`] radians across each, and `f` is sampled once at
/// every node. Evaluating the transform at a new `t` costs one pass over the
/// stored nodes.
#[derive(Debug, Clone, Default)]
pub struct CosineRule {
    pub nodes: Vec<f64>,
    /// Quadrature weight times `f(node)`.
    pub weights: Vec<f64>,
    pub t_max: f64,
    /// `∫ f` estimated by the rule (the transform at `t = 0`).
    pub total: f64,
    pub abs_err: f64,
    pub converged: bool,
}

impl CosineRule {
    pub fn build<F>(f: F, breakpoints: &[f64], t_max: f64, rel_tol: f64, max_panels: usize) -> CosineRule
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let base = integrate(&f, breakpoints, rel_tol, max_panels);
        let floor = rel_tol * base.mass / base.panels.len().max(1) as f64;
        let t_max = t_max.abs();

        // Panels that need no further cut keep their samples.
        let mut pieces: Vec<(f64, f64, Option<[f64; 21]>)> = Vec::new();
        for p in &base.panels {
            let cuts = if p.mass > floor { ((p.b - p.a) * t_max / PHASE_PER_PANEL).ceil() as usize } else { 1 };
            if cuts <= 1 {
                pieces.push((p.a, p.b, Some(p.fvals)));
            } else {
                let h = (p.b - p.a) / cuts as f64;
                for k in 0..cuts {
                    let lo = p.a + h * k as f64;
                    let hi = if k + 1 == cuts { p.b } else { lo + h };
                    pieces.push((lo, hi, None));
                }
            }
        }
        let sampled: Vec<[(f64, f64); 21]> = pieces
            .par_iter()
            .map(|(a, b, fvals)| {
                let rule = gk21_rule(*a, *b);
                let mut out = [(0.0, 0.0); 21];
                for (i, (x, w)) in rule.iter().enumerate() {
                    let fx = match fvals {
                        Some(v) => v[i],
                        None => f(*x),
                    };
                    out[i] = (*x, w * fx);
                }
                out
            })
            .collect();
        let mut nodes = Vec::with_capacity(sampled.len() * 21);
        let mut weights = Vec::with_capacity(sampled.len() * 21);
        for piece in sampled {
            for (x, w) in piece {
                nodes.push(x);
                weights.push(w);
            }
        }
        let total = weights.iter().sum();
        CosineRule { nodes, weights, t_max, total, abs_err: base.abs_err, converged: base.converged }
    }

    pub fn cos_transform(&self, t: f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * (x * t).cos()).sum()
    }

    pub fn sin_transform(&self, t: f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * (x * t).sin()).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Plain bisection on a bracket with `f(lo)` and `f(hi)` of opposite sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> f64 {
    let mut flo = f(lo);
    while hi - lo > x_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_width() {
        let s: f64 = gk21_rule(-1.0, 3.0).iter().map(|(_, w)| w).sum();
        assert_relative_eq!(s, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn polynomial_exact_on_one_panel() {
        let r = integrate(|x| x.powi(7) - 3.0 * x * x, &[0.0, 2.0], 1e-12, 1);
        assert_relative_eq!(r.value, 256.0 / 8.0 - 8.0, max_relative = 1e-13);
    }

    #[test]
    fn endpoint_singularity_converges() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), &[0.0, 1.0], 1e-10, 2000);
        assert!(r.converged);
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn peaked_integrand_with_breakpoint() {
        let w = 1e-5;
        let lor = |x: f64| w / std::f64::consts::PI / ((x - 0.3).powi(2) + w * w);
        let r = integrate(lor, &[0.0, 0.3, 1.0], 1e-10, 4000);
        let exact = ((0.7f64 / w).atan() + (0.3f64 / w).atan()) / std::f64::consts::PI;
        assert_relative_eq!(r.value, exact, max_relative = 1e-9);
    }

    #[test]
    fn pv_of_constant() {
        for pole in [0.1, 0.5, 0.93] {
            let r = principal_value(|_| 1.0, pole, &[0.0, 1.0], 1e-12, 100);
            assert_relative_eq!(r.value, (pole / (1.0 - pole)).ln(), max_relative = 1e-12);
        }
    }

    #[test]
    fn pv_outside_interval_is_ordinary() {
        let r = principal_value(|x| x, -0.5, &[0.0, 1.0], 1e-12, 100);
        // ∫_0^1 x/(-0.5 - x) dx = -1 + 0.5 ln 3
        assert_relative_eq!(r.value, -1.0 + 0.5 * 3f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn pv_matches_excision_oracle() {
        let g = |x: f64| x * (-x).exp() / (x + 0.2).powi(2);
        let pole = 0.37;
        let pv = principal_value(g, pole, &[0.0, 0.2, 1.0, 40.0], 1e-12, 4000).value;
        let oracle = crate::testutil::pv_by_excision(&g, pole, 0.0, 40.0);
        assert_relative_eq!(pv, oracle, max_relative = 1e-7);
    }

    #[test]
    fn cosine_rule_on_lorentzian() {
        let (c, w) = (0.4, 0.01);
        let lor = |x: f64| w / std::f64::consts::PI / ((x - c).powi(2) + w * w);
        let rule = CosineRule::build(lor, &[-200.0, c - w, c, c + w, 200.0], 100.0, 1e-10, 20000);
        for t in [0.0, 1.0, 10.0, 50.0, 100.0] {
            // Truncated tails cost ~2w/(π·200) at t = 0, less for t > 0.
            let exact = (-w * t).exp() * (c * t).cos();
            assert!((rule.cos_transform(t) - exact).abs() < 5e-5, "t = {t}");
        }
    }

    #[test]
    fn bisection_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert_relative_eq!(r, 2f64.sqrt(), max_relative = 1e-13);
    }
}
