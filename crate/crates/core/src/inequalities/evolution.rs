use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{b1_lp_norm, boundary_ratio_nodal, weighted_norm};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::operators::{riesz_velocity_signed, VelocityField};
use crate::quadrature::tanh_sinh;
use crate::solver::{Drift, RunOutput, Stepper};
use crate::spectral::SpectralField;

use super::velocity::short_time_scale;
use super::{InequalityReport, ReportBuilder};

/// `sup (-v . grad w_1 / w_1)` over the interior nodes of the grid refined `refine` times,
/// the smallest `gamma` with `v . grad w_1 + gamma w_1 >= 0` there.
pub fn envelope_rate(v: &VelocityField, refine: usize) -> f64 {
    let g = v.geometry();
    let m = g.n() * refine.max(1);
    let k = g.wavenumber();
    let s = v.stream_function().series();
    let rot = v.rotation();
    let vx = s.derivative(1).scaled(-rot).synthesize(m, m);
    let vy = s.derivative(0).scaled(rot).synthesize(m, m);
    let h = g.side() / m as f64;
    let cot: Vec<f64> = (0..=m).map(|i| k / (k * i as f64 * h).tan()).collect();
    let mut worst = f64::NEG_INFINITY;
    for i in 1..m {
        for j in 1..m {
            worst = worst.max(-(vx[[i, j]] * cot[i] + vy[[i, j]] * cot[j]));
        }
    }
    worst
}

/// Decay envelope `|theta(t)| <= B w_1 e^{-t sqrt(lambda_1) + gamma t}` along a run with
/// a fixed drift `v`. Requires `v . grad w_1 + gamma w_1 >= -tol`.
pub fn verify_decay_envelope(
    run: &RunOutput,
    drift: &VelocityField,
    bound: f64,
    gamma: f64,
    tolerance: f64,
) -> Result<InequalityReport> {
    let g = drift.geometry();
    let need = envelope_rate(drift, 4);
    if gamma < need - tolerance {
        return Err(Error::Precondition(format!(
            "v . grad w_1 + gamma w_1 >= 0 needs gamma >= {need:.6e}, got {gamma}"
        )));
    }
    let root = g.lambda1().sqrt();
    let mut rep = ReportBuilder::new("decay_envelope", tolerance);
    let mut worst_ratio = 0.0f64;
    for st in &run.states {
        let env = bound * ((gamma - root) * st.t).exp();
        let b = boundary_ratio_nodal(&st.theta);
        let ((a, c), v) = b
            .values()
            .indexed_iter()
            .fold(((0, 0), 0.0f64), |best, (idx, v)| if v.abs() > best.1 { (idx, v.abs()) } else { best });
        let x = [g.coord(a), g.coord(c)];
        rep.bound(&format!("t={}", st.t), x, st.t, v, env, env);
        worst_ratio = worst_ratio.max(v / env);
    }
    rep.constant("B", bound);
    rep.constant("gamma", gamma);
    rep.constant("gamma_required", need);
    rep.constant("max_ratio", worst_ratio);
    Ok(rep.finish())
}

/// How the drift is split into a part handled by the weight and a small remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocitySplit {
    /// The whole (prescribed) drift is `v_r`; `v_s = 0`.
    Whole,
    /// SQG drift split as `u = u_r + u_s` with `u_s` the short-time velocity at the largest
    /// `tau` with `||u_s|| <= c0 / ((2m - 1) ||grad w_1||)`.
    ShortTime { c0: f64 },
}

/// `int w_1 b_1^{2m}(t) <= (1 + slack) e^{(2m - 1)(-t sqrt(lambda_1) + int_0^t gamma_r)} int w_1 b_1^{2m}(0)`.
pub fn verify_weighted_lp_control(
    run: &RunOutput,
    stepper: &Stepper,
    m: u32,
    split: VelocitySplit,
    slack: f64,
) -> Result<InequalityReport> {
    if m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    let g = stepper.geometry();
    let p = (2 * m - 1) as f64;
    let grad_w1 = 2.0 / g.side() * g.wavenumber();
    let suffix = match split {
        VelocitySplit::Whole => "",
        VelocitySplit::ShortTime { .. } => "_short_time",
    };
    let mut rep = ReportBuilder::new(&format!("weighted_lp_control_m{m}{suffix}"), 0.0);
    let mut gammas = Vec::with_capacity(run.states.len());
    for st in &run.states {
        let gamma = match (&stepper.config().drift, split) {
            (Drift::Prescribed { .. }, VelocitySplit::Whole) => envelope_rate(&stepper.velocity(&st.theta), 4),
            (Drift::Sqg, VelocitySplit::ShortTime { c0 }) => {
                let limit = c0 / (p * grad_w1);
                let u = riesz_velocity_signed(&st.theta, stepper.config().rotation);
                let scale = short_time_scale(&st.theta, limit)?;
                match scale.tau() {
                    // u_s is the whole velocity
                    None => 0.0,
                    Some(tau) => {
                        let us = crate::operators::short_time_velocity(&st.theta, tau)?;
                        rep.bound(&format!("smallness t={}", st.t), [f64::NAN; 2], st.t, us.sup_norm(), limit, limit);
                        let psi = u.stream_function().sub(us.stream_function())?;
                        envelope_rate(&VelocityField::from_stream(psi, u.rotation())?, 4)
                    }
                }
            }
            (d, s) => return Err(Error::Config(format!("split {s:?} does not apply to drift {d:?}"))),
        };
        gammas.push((st.t, gamma.max(0.0)));
    }
    let i0 = weighted_norm(&boundary_ratio_nodal(&run.states[0].theta), m).powi(2 * m as i32);
    let root = g.lambda1().sqrt();
    let mut integral = 0.0;
    let mut worst = 0.0f64;
    for (k, st) in run.states.iter().enumerate() {
        if k > 0 {
            let (t0, g0) = gammas[k - 1];
            let (t1, g1) = gammas[k];
            integral += 0.5 * (t1 - t0) * (g0 + g1);
        }
        let value = weighted_norm(&boundary_ratio_nodal(&st.theta), m).powi(2 * m as i32);
        let rhs = (1.0 + slack) * (p * (-st.t * root + integral)).exp() * i0;
        rep.bound(&format!("t={}", st.t), [f64::NAN; 2], st.t, value, rhs, rhs);
        worst = worst.max(value / rhs * (1.0 + slack));
    }
    rep.constant("m", m as f64);
    rep.constant("slack", slack);
    rep.constant("gamma_r_integral", integral);
    rep.constant("max_ratio", worst);
    Ok(rep.finish())
}

/// `C_{m,p} = (int w_1^{-p/(2m-p)})^{(2m-p)/(2mp)}` for `p < m`, by tanh-sinh quadrature.
pub fn bridge_constant(geometry: &Geometry, m: u32, p: f64) -> Result<f64> {
    let mf = m as f64;
    if !(p >= 1.0 && p < mf) {
        return Err(Error::Config(format!("bridge constant needs 1 <= p < m, got p = {p}, m = {m}")));
    }
    let q = p / (2.0 * mf - p);
    let side = geometry.side();
    let k = PI / side;
    let one_d = tanh_sinh(0.0, side, 8, |_, xa, xb| (k * xa.min(xb)).sin().powf(-q));
    let integral = (2.0 / side).powf(-q) * one_d * one_d;
    Ok(integral.powf((2.0 * mf - p) / (2.0 * mf * p)))
}

/// `||b_1||_p <= C_{m,p} (int w_1 b_1^{2m})^{1/2m}` for `p < m`, and for `p >= 2m - 1` the
/// converse `int w_1 b_1^{2m} <= ||theta||_inf |Omega|^{1 - (2m-1)/p} ||b_1||_p^{2m-1}`.
pub fn verify_weight_norm_bridge(fields: &[(String, SpectralField)], m: u32, p: f64) -> Result<InequalityReport> {
    let mf = m as f64;
    let forward = p < mf;
    if !forward && p < 2.0 * mf - 1.0 {
        return Err(Error::Config(format!("no bridge for m = {m}, p = {p}: need p < m or p >= 2m - 1")));
    }
    let mut rep = ReportBuilder::new(&format!("weight_norm_bridge_m{m}_p{p}"), 1e-10);
    let Some((_, first)) = fields.first() else {
        return Err(Error::Config("bridge needs at least one field".into()));
    };
    let g: Arc<Geometry> = first.geometry().clone();
    let c = if forward { Some(bridge_constant(&g, m, p)?) } else { None };
    for (case, theta) in fields {
        let b = boundary_ratio_nodal(theta);
        let lp = b1_lp_norm(&b, p);
        let weighted = weighted_norm(&b, m);
        if let Some(c) = c {
            let rhs = c * weighted;
            rep.bound(case, [f64::NAN; 2], 0.0, lp, rhs, rhs);
        } else {
            let lhs = weighted.powf(2.0 * mf);
            let sup = theta.nodal().max_abs();
            let rhs = sup * g.area().powf(1.0 - (2.0 * mf - 1.0) / p) * lp.powf(2.0 * mf - 1.0);
            rep.bound(case, [f64::NAN; 2], 0.0, lhs, rhs, rhs);
        }
    }
    if let Some(c) = c {
        rep.constant("C_mp", c);
    }
    rep.constant("m", mf);
    rep.constant("p", p);
    rep.note(if forward { "direction: ||b||_p <= C (int w b^2m)^(1/2m)" } else { "direction: converse" });
    Ok(rep.finish())
}
