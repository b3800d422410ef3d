use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::operators::{commutator, heat_kernel_derivatives, modes_for};
use crate::regression::fit_line;
use crate::spectral::SpectralField;

use super::{InequalityReport, ReportBuilder};

/// Largest multiple of the grid spacing not exceeding `h`.
fn grid_floor(g: &Geometry, h: f64) -> f64 {
    let dx = g.spacing();
    (h / dx + 1e-9).floor() * dx
}

/// Commutator `C_h(theta)` at centres `x0 = (d, L/2)`, `d = (L/4) 2^{-k}`, with `l = d/2`
/// and `h = d/32` along the first axis. The slope of `log (sup |C_h| / |h|)` against `log d` must
/// lie in `[-1.3, 0]` with `r^2 >= 0.85`; `Gamma_0 = sup |C_h| / |h|` at the outermost
/// centre must change by at most 20% when `h` is halved.
pub fn verify_commutator_scaling(theta: &SpectralField, shells: usize, refine: usize) -> Result<InequalityReport> {
    if shells < 4 {
        return Err(Error::Config(format!("commutator scaling needs at least 4 shells, got {shells}")));
    }
    let g = theta.geometry();
    let side = g.side();
    let mut rep = ReportBuilder::new("commutator_scaling", 0.0);
    let mut pts = Vec::new();
    let mut sups = Vec::new();
    for k in 0..shells {
        let d = 0.25 * side * 0.5f64.powi(k as i32);
        let h = grid_floor(g, d / 32.0);
        if h <= 0.0 {
            return Err(Error::Config(format!("shell d = {d} needs h = d/32 below the grid spacing")));
        }
        let x0 = [d, 0.5 * side];
        let c = commutator(theta, x0, 0.5 * d, [h, 0.0], refine)?;
        let sup = c.max_abs();
        rep.constant(&format!("sup_C[d={d:.6}]"), sup);
        sups.push((d, h, sup));
        if sup > 0.0 {
            pts.push((d.ln(), (sup / h).ln()));
        }
    }
    let fit = fit_line(&pts).ok_or_else(|| Error::Numeric("commutator shells give no regression".into()))?;
    rep.at_least("slope_lower", fit.slope, -1.3);
    rep.at_most("slope_upper", fit.slope, 0.0);
    rep.at_least("r_squared", fit.r_squared, 0.85);

    let (d, h, sup) = sups[0];
    let gamma0 = sup / h;
    let half = grid_floor(g, 0.5 * h);
    if half > 0.0 && (half - 0.5 * h).abs() < 1e-12 {
        let c = commutator(theta, [d, 0.5 * side], 0.5 * d, [half, 0.0], refine)?;
        let gamma_half = c.max_abs() / half;
        rep.at_most("gamma0_stability", (gamma_half / gamma0 - 1.0).abs(), 0.2);
        rep.constant("Gamma0_half", gamma_half);
    } else {
        rep.note("h/2 is not a grid multiple; Gamma_0 stability skipped");
    }
    rep.regression(fit);
    rep.constant("Gamma0", gamma0);
    rep.constant("slope", fit.slope);
    Ok(rep.finish())
}

/// Sampling plan for the heat kernel bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSamplePlan {
    pub samples: usize,
    pub seed: u64,
    /// Range of `t` in units of `(L / pi)^2`, sampled log-uniformly.
    pub t_range: [f64; 2],
    /// `y = x + sqrt(t) z` with `z` uniform in `[-spread, spread]^2`.
    pub spread: f64,
    pub cancellation_samples: usize,
    /// Cancellation points use `t <= d(x)^2 / cancellation_ratio`.
    pub cancellation_ratio: f64,
}

impl Default for KernelSamplePlan {
    fn default() -> Self {
        KernelSamplePlan {
            samples: 500,
            seed: 20240917,
            t_range: [1e-3, 0.5],
            spread: 3.0,
            cancellation_samples: 100,
            cancellation_ratio: 60.0,
        }
    }
}

struct KernelPoint {
    t: f64,
    x: [f64; 2],
    y: [f64; 2],
    value: f64,
    grad_x: f64,
    r2: f64,
    fx: f64,
    fy: f64,
}

/// Latin hypercube in the unit cube of dimension `dim`.
fn latin_hypercube(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = (0..dim)
        .map(|_| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            perm.into_iter().map(|k| (k as f64 + rng.random::<f64>()) / n as f64).collect()
        })
        .collect();
    (0..n).map(|i| cols.iter_mut().map(|c| c[i]).collect()).collect()
}

fn boundary_factor(d: f64, t: f64) -> f64 {
    (d / t.sqrt()).min(1.0)
}

/// Two-sided Gaussian bounds
/// `c F t^{-1} e^{-|x-y|^2/(k t)} <= H(t, x, y) <= C F t^{-1} e^{-|x-y|^2/(K t)}`,
/// `F = min(1, d(x)/sqrt t) min(1, d(y)/sqrt t)`, on a Latin-hypercube sample.
///
/// `K` is the smallest value on a log grid over `[1, 16]` whose constant is within a
/// factor 2 of the constant at `K = 16`; `k` is the largest value whose constant is at
/// least half the one at `k = 1`. The gradient bound `|grad_x H| <= C_g t^{-1/2} F_y t^{-1}
/// e^{-|x-y|^2/(K t)}` is fitted alongside, and `|(grad_x + grad_y) H| <= 1e-6 |grad_x H|`
/// is checked at interior points with `t <= d(x)^2 / ratio`.
pub fn verify_kernel_bounds(geometry: &std::sync::Arc<Geometry>, plan: &KernelSamplePlan) -> Result<InequalityReport> {
    if plan.samples == 0 || !(plan.t_range[0] > 0.0 && plan.t_range[1] > plan.t_range[0]) {
        return Err(Error::Config("kernel plan needs samples > 0 and 0 < t_min < t_max".into()));
    }
    let side = geometry.side();
    let unit = (side / std::f64::consts::PI).powi(2);
    let (lt0, lt1) = ((plan.t_range[0] * unit).ln(), (plan.t_range[1] * unit).ln());
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let inside = |v: f64| v.clamp(1e-6 * side, side * (1.0 - 1e-6));
    let mut warnings = 0usize;
    let mut points = Vec::with_capacity(plan.samples);
    for row in latin_hypercube(&mut rng, plan.samples, 5) {
        let t = (lt0 + row[0] * (lt1 - lt0)).exp();
        let x = [inside(row[1] * side), inside(row[2] * side)];
        let s = t.sqrt();
        let y = [inside(x[0] + s * plan.spread * (2.0 * row[3] - 1.0)), inside(x[1] + s * plan.spread * (2.0 * row[4] - 1.0))];
        let modes = modes_for(geometry, t, 1e-24);
        let k = heat_kernel_derivatives(geometry, x, y, t, modes)?;
        if k.tail_estimate > 1e-12 * k.value.abs().max(1.0) {
            warnings += 1;
        }
        points.push(KernelPoint {
            t,
            x,
            y,
            value: k.value,
            grad_x: k.grad_x[0].hypot(k.grad_x[1]),
            r2: (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2),
            fx: boundary_factor(geometry.distance_at(x), t),
            fy: boundary_factor(geometry.distance_at(y), t),
        });
    }
    let gauss = |p: &KernelPoint, k: f64| p.fx * p.fy / p.t * (-p.r2 / (k * p.t)).exp();
    let scan: Vec<f64> = (0..=60).map(|i| 16f64.powf(i as f64 / 60.0)).collect();
    let upper = |k: f64| points.iter().map(|p| p.value / gauss(p, k)).fold(0.0f64, f64::max);
    let lower = |k: f64| points.iter().map(|p| p.value / gauss(p, k)).fold(f64::INFINITY, f64::min);
    let best = upper(16.0);
    let k_up = *scan.iter().find(|k| upper(**k) <= 2.0 * best).expect("K = 16 qualifies");
    let c_up = upper(k_up);
    let base = lower(1.0);
    let k_lo = *scan.iter().rev().find(|k| lower(**k) >= 0.5 * base).expect("k = 1 qualifies");
    let c_lo = lower(k_lo);
    let grad_gauss = |p: &KernelPoint| p.fy / p.t.powf(1.5) * (-p.r2 / (k_up * p.t)).exp();
    let c_grad = points.iter().map(|p| p.grad_x / grad_gauss(p)).fold(0.0f64, f64::max);

    let mut rep = ReportBuilder::new("kernel_bounds", 0.0);
    rep.seed(plan.seed);
    for p in &points {
        let up = c_up * gauss(p, k_up);
        rep.bound("upper", p.x, p.t, p.value, up, up);
        let lo = c_lo * gauss(p, k_lo);
        rep.bound("lower", p.y, p.t, lo, p.value, p.value);
        let g = c_grad * grad_gauss(p);
        rep.bound("gradient", p.x, p.t, p.grad_x, g, g);
    }
    rep.at_least("K_in_range_lo", k_up, 1.0);
    rep.at_most("K_in_range_hi", k_up, 16.0);
    rep.at_least("c_lower_positive", c_lo, f64::MIN_POSITIVE);
    rep.at_most("truncation_warnings", warnings as f64, 0.0);

    // cancellation of grad_x + grad_y far from the boundary
    let mut worst = 0.0f64;
    let mut taken = 0;
    while taken < plan.cancellation_samples {
        let x = [side * rng.random_range(0.3..0.7), side * rng.random_range(0.3..0.7)];
        let d = geometry.distance_at(x);
        let t_hi = d * d / plan.cancellation_ratio;
        let t = (lt0.min(t_hi.ln()) + rng.random::<f64>() * (t_hi.ln() - lt0.min(t_hi.ln()))).exp();
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let radius = t.sqrt() * rng.random_range(1.0..plan.spread);
        let y = [x[0] + radius * angle.cos(), x[1] + radius * angle.sin()];
        let k = heat_kernel_derivatives(geometry, x, y, t, modes_for(geometry, t, 1e-24))?;
        let gx = k.grad_x[0].hypot(k.grad_x[1]);
        let gs = k.grad_sum[0].hypot(k.grad_sum[1]);
        rep.bound("cancellation", x, t, gs, 1e-6 * gx, gx);
        worst = worst.max(gs / gx);
        taken += 1;
    }
    rep.constant("C_upper", c_up);
    rep.constant("K_upper", k_up);
    rep.constant("c_lower", c_lo);
    rep.constant("k_lower", k_lo);
    rep.constant("C_gradient", c_grad);
    rep.constant("max_cancellation_ratio", worst);
    rep.constant("truncation_warnings", warnings as f64);
    Ok(rep.finish())
}
