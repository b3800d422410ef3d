//! The Dirichlet heat kernel `H_D(t, x, y) = sum e^{-t lambda_j} w_j(x) w_j(y)`.
//!
//! On the square the kernel factors into two one-dimensional sums
//! `S(t, a, b) = (2/L) sum_m e^{-t k^2 m^2} sin(m k a) sin(m k b)`, so the truncation
//! can go far beyond the field grid.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Geometry;

/// Upper limit on modes per axis for kernel sums.
pub const MAX_KERNEL_MODES: usize = 8192;

/// Relative size of the neglected tail above which a sample is flagged.
const TAIL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct HeatKernelSample {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub t: f64,
    pub value: f64,
    /// Modes per axis in the truncation.
    pub modes: usize,
    /// Bound on the neglected tail.
    pub tail_estimate: f64,
    pub truncation_warning: bool,
}

/// Kernel value with its first and second spatial derivatives.
#[derive(Debug, Clone, Serialize)]
pub struct HeatKernelDerivatives {
    pub value: f64,
    pub grad_x: [f64; 2],
    pub grad_y: [f64; 2],
    /// `(grad_x + grad_y) H`, summed without cancellation.
    pub grad_sum: [f64; 2],
    /// Hessian in `x`.
    pub hess_xx: [[f64; 2]; 2],
    /// Mixed second derivatives `d_{x_i} d_{y_j} H`.
    pub hess_xy: [[f64; 2]; 2],
    pub tail_estimate: f64,
}

fn check(geometry: &Geometry, t: f64, modes: usize) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    if modes == 0 || modes > MAX_KERNEL_MODES {
        return Err(Error::Config(format!("kernel modes must lie in 1..={MAX_KERNEL_MODES}, got {modes}")));
    }
    if geometry.side() <= 0.0 {
        return Err(Error::Config("degenerate geometry".into()));
    }
    Ok(())
}

/// `sum_{m > M} e^{-t k^2 m^2} <= e^{-t k^2 M^2} / (2 t k^2 M)`.
fn tail_1d(t: f64, k: f64, modes: usize) -> f64 {
    let mf = modes as f64;
    let q = t * k * k;
    (-q * mf * mf).exp() / (2.0 * q * mf)
}

struct Sum1d {
    /// S, dS/da, dS/db, d2S/da2, d2S/dadb, (d/da + d/db) S
    v: [f64; 6],
}

fn sum_1d(t: f64, a: f64, b: f64, geometry: &Geometry, modes: usize, derivatives: bool) -> Sum1d {
    let k = geometry.wavenumber();
    let amp = 2.0 / geometry.side();
    let q = t * k * k;
    let mut v = [0.0f64; 6];
    for m in 1..=modes {
        let mf = m as f64;
        let e = (-q * mf * mf).exp();
        if e == 0.0 {
            break;
        }
        let (sa, ca) = (mf * k * a).sin_cos();
        let (sb, cb) = (mf * k * b).sin_cos();
        v[0] += e * (sa * sb);
        if derivatives {
            let mk = mf * k;
            v[1] += e * mk * (ca * sb);
            v[2] += e * mk * (sa * cb);
            v[3] -= e * mk * mk * (sa * sb);
            v[4] += e * mk * mk * (ca * cb);
            v[5] += e * mk * (mf * k * (a + b)).sin();
        }
    }
    v.iter_mut().for_each(|x| *x *= amp);
    Sum1d { v }
}

fn tail_estimate(geometry: &Geometry, t: f64, modes: usize) -> f64 {
    let k = geometry.wavenumber();
    let amp = 2.0 / geometry.side();
    // |S| <= amp sum e^{-q m^2}, and each factor loses at most amp * tail
    let full = amp * (tail_1d(t, k, 1) + (-t * k * k).exp());
    2.0 * amp * tail_1d(t, k, modes) * full
}

/// `H_D(t, x, y)` truncated to `modes` per axis; bitwise symmetric in `x` and `y`.
pub fn heat_kernel(geometry: &Arc<Geometry>, x: [f64; 2], y: [f64; 2], t: f64, modes: usize) -> Result<HeatKernelSample> {
    check(geometry, t, modes)?;
    let sx = sum_1d(t, x[0], y[0], geometry, modes, false);
    let sy = sum_1d(t, x[1], y[1], geometry, modes, false);
    let value = sx.v[0] * sy.v[0];
    let tail = tail_estimate(geometry, t, modes);
    Ok(HeatKernelSample {
        x,
        y,
        t,
        value,
        modes,
        tail_estimate: tail,
        truncation_warning: tail > TAIL_TOLERANCE * value.abs().max(1.0),
    })
}

/// Kernel and its spatial derivatives from term-wise differentiated sums.
pub fn heat_kernel_derivatives(
    geometry: &Arc<Geometry>,
    x: [f64; 2],
    y: [f64; 2],
    t: f64,
    modes: usize,
) -> Result<HeatKernelDerivatives> {
    check(geometry, t, modes)?;
    let a = sum_1d(t, x[0], y[0], geometry, modes, true).v;
    let b = sum_1d(t, x[1], y[1], geometry, modes, true).v;
    let k = geometry.wavenumber();
    let mf = modes as f64;
    let tail = tail_estimate(geometry, t, modes) * (mf * k).powi(2).max(1.0);
    Ok(HeatKernelDerivatives {
        value: a[0] * b[0],
        grad_x: [a[1] * b[0], a[0] * b[1]],
        grad_y: [a[2] * b[0], a[0] * b[2]],
        grad_sum: [a[5] * b[0], a[0] * b[5]],
        hess_xx: [[a[3] * b[0], a[1] * b[1]], [a[1] * b[1], a[0] * b[3]]],
        hess_xy: [[a[4] * b[0], a[1] * b[2]], [a[2] * b[1], a[0] * b[4]]],
        tail_estimate: tail,
    })
}

/// Modes per axis needed for a tail below `tol` at time `t`.
pub(crate) fn modes_for(geometry: &Geometry, t: f64, tol: f64) -> usize {
    let k = geometry.wavenumber();
    let q = t * k * k;
    let m = ((-tol.ln()).max(1.0) / q).sqrt().ceil() as usize + 2;
    m.clamp(1, MAX_KERNEL_MODES)
}
