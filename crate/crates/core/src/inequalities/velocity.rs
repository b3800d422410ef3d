use std::sync::Arc;

use ndarray::Zip;
use serde::Serialize;

use crate::diagnostics::{
    b1_lp_norm, boundary_ratio_nodal, exponent_key, global_holder, interior_lipschitz, shell_sups, side_shell_nodes,
    NormalFrame,
};
use crate::error::{Error, Result};
use crate::operators::{
    finite_difference, nonlinear_dissipation, riesz_velocity, short_time_velocity, standard_cutoff,
};
use crate::geometry::Geometry;
use crate::regression::fit_line;
use crate::spectral::{GridField, SpectralField};

use super::fields::truncated_constant;
use super::{InequalityReport, ReportBuilder};

/// Sup of `|u|` over side shells `[2^k d0, 2^{k+1} d0)` regressed against `log(L / d)`;
/// the fit gives `|u| <= A + B log(L / d)` with `A` raised until every shell node obeys it.
pub fn verify_velocity_log_bound(case: &str, theta: &SpectralField, shells: usize) -> Result<InequalityReport> {
    let g = theta.geometry();
    let u = riesz_velocity(theta);
    let speed = u.speed();
    let d0 = 2.0 * g.spacing();
    let sups = shell_sups(g, &speed, d0, shells);
    let side = g.side();
    let pts: Vec<(f64, f64)> = sups.iter().filter(|s| s.nodes > 0).map(|s| ((side / s.d).ln(), s.sup)).collect();
    let fit = fit_line(&pts).ok_or_else(|| Error::Numeric("velocity shells give no regression".into()))?;
    let slope = fit.slope;
    let mut a = f64::NEG_INFINITY;
    let mut nodes = Vec::new();
    for s in &sups {
        for (i, j) in side_shell_nodes(g, s.d_lo, s.d_hi) {
            let x = [g.coord(i), g.coord(j)];
            let d = g.distance_at(x);
            a = a.max(speed[[i, j]] - slope * (side / d).ln());
            nodes.push((x, d, speed[[i, j]]));
        }
    }
    let mut rep = ReportBuilder::new(&format!("velocity_log_bound_{case}"), 1e-12);
    let scale = u.sup_norm().max(f64::MIN_POSITIVE);
    for (x, d, v) in nodes {
        rep.bound(case, x, 0.0, v, a + slope * (side / d).ln(), scale);
    }
    // exp-integrability proxy: mean of exp(beta |u|) with beta = 1 / (2 max(B, ||u||/10))
    let beta = 0.5 / slope.max(0.1 * scale);
    let h = g.spacing();
    let mean = crate::spectral::trapezoid(&speed, h, |v| (beta * v).exp()) / g.area();
    rep.regression(fit);
    rep.constant("A", a);
    rep.constant("B", slope);
    rep.constant("r_squared", fit.r_squared);
    rep.constant("exp_beta", beta);
    rep.constant("exp_integral_mean", mean);
    Ok(rep.finish())
}

/// Log-bound regression for the truncated constant (all retained modes) and for `w_1`: the
/// former needs a positive slope with `r^2 >= 0.9`, the latter a finite `||u||_inf` and a
/// slope at most a tenth of the former.
pub fn verify_velocity_dichotomy(geometry: &Arc<Geometry>, shells: usize) -> Result<InequalityReport> {
    let constant = verify_velocity_log_bound("constant", &truncated_constant(geometry, geometry.modes()), shells)?;
    let w1 = SpectralField::mode(geometry, 1, 1, 1.0)?;
    let ground = verify_velocity_log_bound("w1", &w1, shells)?;
    let sc = constant.constant("B").unwrap_or(f64::NAN);
    let r2 = constant.constant("r_squared").unwrap_or(f64::NAN);
    let sg = ground.constant("B").unwrap_or(f64::NAN);
    let usup = riesz_velocity(&w1).sup_norm();
    let mut rep = ReportBuilder::new("velocity_dichotomy", 1e-12);
    rep.at_least("constant:slope_positive", sc, f64::MIN_POSITIVE);
    rep.at_least("constant:r_squared", r2, 0.9);
    rep.at_most("w1:slope_ratio", sg, 0.1 * sc);
    rep.at_most("w1:u_sup_finite", usup, f64::MAX);
    rep.constant("slope_constant", sc);
    rep.constant("r_squared_constant", r2);
    rep.constant("slope_w1", sg);
    rep.constant("u_sup_w1", usup);
    rep.regression(constant.regression.expect("log bound always fits"));
    rep.absorb("constant", constant);
    rep.absorb("w1", ground);
    Ok(rep.finish())
}

/// `||u||_inf <= C M + C ||theta||_inf (1 + log+ ||b_1||_p)`: fits `C` per field and
/// requires every value within 50% of the mean.
pub fn verify_velocity_conditional_bound(fields: &[(String, SpectralField)], p: f64) -> Result<InequalityReport> {
    let mut rows = Vec::new();
    for (case, theta) in fields {
        let u = riesz_velocity(theta).sup_norm();
        let m = interior_lipschitz(theta);
        let sup = theta.nodal().max_abs();
        let lp = b1_lp_norm(&boundary_ratio_nodal(theta), p);
        let denom = m + sup * (1.0 + lp.ln().max(0.0));
        if !(denom > 0.0) {
            return Err(Error::Domain(format!("field {case} is zero")));
        }
        rows.push((case.clone(), u, denom));
    }
    if rows.is_empty() {
        return Err(Error::Config("conditional bound needs at least one field".into()));
    }
    let cs: Vec<f64> = rows.iter().map(|r| r.1 / r.2).collect();
    let mean = cs.iter().sum::<f64>() / cs.len() as f64;
    let cmax = cs.iter().fold(0.0f64, |a, b| a.max(*b));
    let cmin = cs.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    let mut rep = ReportBuilder::new(&format!("velocity_conditional_bound_p{}", exponent_key(p)), 1e-12);
    for ((case, u, denom), c) in rows.iter().zip(&cs) {
        rep.bound(case, [f64::NAN; 2], 0.0, *u, cmax * denom, *u);
        rep.at_most(&format!("{case}:spread"), (c / mean - 1.0).abs(), 0.5);
    }
    rep.constant("C", cmax);
    rep.constant("C_min", cmin);
    rep.constant("C_mean", mean);
    Ok(rep.finish())
}

/// Outcome of choosing `tau` for the short-time velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ShortTimeScale {
    /// Largest `tau` (to bisection accuracy) with `||u_s(tau)||_inf <= c_r`.
    Constrained { tau: f64, u_s_sup: f64 },
    /// `c_r >= ||u||_inf`: any `tau` works.
    Unconstrained { u_sup: f64 },
}

impl ShortTimeScale {
    pub fn tau(&self) -> Option<f64> {
        match self {
            ShortTimeScale::Constrained { tau, .. } => Some(*tau),
            ShortTimeScale::Unconstrained { .. } => None,
        }
    }
}

/// Bisection in `log tau` for `||u_s(tau)||_inf <= c_r`.
pub fn short_time_scale(theta: &SpectralField, c_r: f64) -> Result<ShortTimeScale> {
    if !(c_r > 0.0) {
        return Err(Error::Domain(format!("c_r must be positive, got {c_r}")));
    }
    let u_sup = riesz_velocity(theta).sup_norm();
    if c_r >= u_sup {
        return Ok(ShortTimeScale::Unconstrained { u_sup });
    }
    let sup = |tau: f64| -> Result<f64> { Ok(short_time_velocity(theta, tau)?.sup_norm()) };
    let mut lo = 1e-16f64;
    let mut hi = 1.0f64;
    while sup(hi)? <= c_r {
        lo = hi;
        hi *= 16.0;
        if hi > 1e12 {
            return Ok(ShortTimeScale::Unconstrained { u_sup });
        }
    }
    if sup(lo)? > c_r {
        return Err(Error::Numeric(format!("c_r = {c_r:e} is below ||u_s(1e-16)||")));
    }
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if sup(mid)? <= c_r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-10 {
            break;
        }
    }
    Ok(ShortTimeScale::Constrained { tau: lo, u_s_sup: sup(lo)? })
}

/// Short-time scales for each `c_r`: `||u_s|| <= c_r` holds, and smaller `c_r` gives
/// smaller `tau`.
pub fn verify_short_time_smallness(theta: &SpectralField, c_values: &[f64]) -> Result<InequalityReport> {
    let mut rep = ReportBuilder::new("short_time_smallness", 0.0);
    let mut sorted = c_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut last_tau = 0.0f64;
    for c in sorted {
        let key = format!("c_r={c}");
        match short_time_scale(theta, c)? {
            ShortTimeScale::Constrained { tau, u_s_sup } => {
                rep.bound(&key, [f64::NAN; 2], tau, u_s_sup, c, c);
                rep.at_least(&format!("{key}:monotone"), tau, last_tau);
                rep.constant(&format!("tau[{key}]"), tau);
                last_tau = tau;
            }
            ShortTimeScale::Unconstrained { u_sup } => {
                rep.note(format!("{key}: unconstrained (||u|| = {u_sup:.6e})"));
                rep.constant(&format!("tau[{key}]"), f64::INFINITY);
                last_tau = f64::INFINITY;
            }
        }
    }
    Ok(rep.finish())
}

/// Localized finite-difference velocity estimate
/// `phi |delta_h u| <= sqrt(eps d D(chi delta_h theta)) + C_eps |h| d^{-2/p} ||b_1||_p + delta(eps) phi |delta_h theta|`.
///
/// `C_eps = C_1 / eps` with `C_1` the smallest value giving `delta(eps_min) = 0`;
/// `delta(eps)` is then the smallest admissible value for each `eps`, and must not
/// increase as `eps` decreases. Samples are nodes with `phi |delta_h theta|` at least
/// `1e-3` of its maximum.
pub fn verify_finite_difference_velocity(
    theta: &SpectralField,
    x0: [f64; 2],
    ell: f64,
    h: [f64; 2],
    p: f64,
    eps: &[f64],
) -> Result<InequalityReport> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("eps values must be positive".into()));
    }
    let g = theta.geometry();
    let cut = standard_cutoff(g, x0, ell)?;
    let tv = theta.inverse();
    let dtheta = finite_difference(&tv, h)?;
    let u = riesz_velocity(theta);
    let n = g.n();
    let interior = |a: &ndarray::Array2<f64>| {
        GridField::new(g, a.slice(ndarray::s![1..n, 1..n]).to_owned()).expect("interior shape")
    };
    let dux = finite_difference(&interior(u.ux()), h)?;
    let duy = finite_difference(&interior(u.uy()), h)?;
    let mut chi_delta = dtheta.field.values().clone();
    chi_delta *= cut.chi();
    let dissipation = nonlinear_dissipation(&GridField::new(g, chi_delta)?.forward()?);
    let b1 = b1_lp_norm(&boundary_ratio_nodal(theta), p);
    let hn = h[0].hypot(h[1]);
    let power = if p.is_infinite() { 0.0 } else { 2.0 / p };

    struct Sample {
        x: [f64; 2],
        a: f64,
        s: f64,
        xterm: f64,
        y: f64,
    }
    let mut samples = Vec::new();
    let ymax = Zip::from(cut.phi()).and(dtheta.field.values()).fold(0.0f64, |m, p, d| m.max(p * d.abs()));
    for ((a, b), phi) in cut.phi().indexed_iter() {
        let y = phi * dtheta.field.values()[[a, b]].abs();
        if *phi <= 0.0 || !dtheta.valid[[a, b]] || y < 1e-3 * ymax {
            continue;
        }
        let d = g.distance()[[a, b]];
        let du = dux.field.values()[[a, b]].hypot(duy.field.values()[[a, b]]);
        samples.push(Sample {
            x: g.node(a, b),
            a: phi * du,
            s: (d * dissipation.values()[[a, b]].max(0.0)).sqrt(),
            xterm: hn * d.powf(-power) * b1,
            y,
        });
    }
    if samples.is_empty() {
        return Err(Error::Precondition("no node with phi |delta_h theta| > 0".into()));
    }
    let mut sweep = eps.to_vec();
    sweep.sort_by(|a, b| b.total_cmp(a));
    let e_min = *sweep.last().expect("non-empty");
    let c1 = samples.iter().map(|s| e_min * (s.a - e_min.sqrt() * s.s).max(0.0) / s.xterm).fold(0.0f64, f64::max);

    let mut rep = ReportBuilder::new("finite_difference_velocity", 1e-12);
    let amax = samples.iter().map(|s| s.a).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let mut last = f64::INFINITY;
    for e in &sweep {
        let ce = c1 / e;
        let delta = samples.iter().map(|s| (s.a - e.sqrt() * s.s - ce * s.xterm).max(0.0) / s.y).fold(0.0f64, f64::max);
        for s in &samples {
            let rhs = e.sqrt() * s.s + ce * s.xterm + delta * s.y;
            rep.bound(&format!("eps={e}"), s.x, 0.0, s.a, rhs, amax);
        }
        rep.at_most(&format!("eps={e}:delta_nonincreasing"), delta, last * (1.0 + 1e-12));
        rep.constant(&format!("C_eps[{e}]"), ce);
        rep.constant(&format!("delta[{e}]"), delta);
        last = delta;
    }
    rep.constant("C1", c1);
    rep.constant("samples", samples.len() as f64);
    Ok(rep.finish())
}

/// Normal velocity near the boundary: the slope of `log sup_shell |u . N|` against `log d`
/// must be at least `min(1 - 2/p, alpha) - 0.15`; `C` is fitted in
/// `|u . N| <= C [(d^{1-2/p} ||b_1||_p + d^alpha ||theta||_{C^alpha}) ||T|| + d^{2-2/p} ||b_1||_p ||grad T||]`.
pub fn verify_normal_velocity_rate(theta: &SpectralField, p: f64, alpha: f64) -> Result<InequalityReport> {
    let g = theta.geometry();
    let frame = NormalFrame::default_for(g)?;
    let u = riesz_velocity(theta);
    let un = frame.normal_component(&u);
    let shells = shell_sups(g, &un, g.spacing(), 4);
    let pts: Vec<(f64, f64)> = shells.iter().filter(|s| s.sup > 0.0).map(|s| (s.d.ln(), s.sup.ln())).collect();
    let fit = fit_line(&pts).ok_or_else(|| Error::Numeric("normal velocity shells give no regression".into()))?;
    let q = if p.is_infinite() { 0.0 } else { 2.0 / p };
    let target = (1.0 - q).min(alpha) - 0.15;
    let b1 = b1_lp_norm(&boundary_ratio_nodal(theta), p);
    let holder = theta.nodal().max_abs() + global_holder(theta, alpha, 6);
    let bound = |d: f64| {
        (d.powf(1.0 - q) * b1 + d.powf(alpha) * holder) * frame.tangent_sup
            + d.powf(2.0 - q) * b1 * frame.tangent_grad_sup
    };
    let mut c = 0.0f64;
    let mut nodes = Vec::new();
    for s in &shells {
        for (i, j) in side_shell_nodes(g, s.d_lo, s.d_hi) {
            let x = [g.coord(i), g.coord(j)];
            let d = g.distance_at(x);
            c = c.max(un[[i, j]].abs() / bound(d));
            nodes.push((x, d, un[[i, j]].abs()));
        }
    }
    let mut rep = ReportBuilder::new("normal_velocity_rate", 0.0);
    let scale = u.sup_norm().max(f64::MIN_POSITIVE);
    for (x, d, v) in nodes {
        rep.bound("shell", x, 0.0, v, c * bound(d), scale);
    }
    rep.at_least("slope", fit.slope, target);
    rep.regression(fit);
    rep.constant("C", c);
    rep.constant("slope", fit.slope);
    rep.constant("slope_threshold", target);
    rep.constant("smoothing_eps", frame.eps);
    rep.constant("tangency_defect", frame.tangency_defect);
    Ok(rep.finish())
}
