use std::f64::consts::PI;
use std::sync::Arc;

use libm::erf;
use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::operators::{lambda, lambda_refined, weighted_convexity_terms, weighted_terms_with, ScalarFn};
use crate::quadrature::GaussLegendre;
use crate::spectral::{GridField, SpectralField};

use super::fields::standard_family;
use super::{InequalityReport, ReportBuilder};

fn max_mode(f: &SpectralField) -> usize {
    f.coeffs().indexed_iter().filter(|(_, v)| **v != 0.0).map(|((a, b), _)| a.max(b) + 1).max().unwrap_or(1)
}

/// `Phi'(f) Lambda f - Lambda(Phi(f))` and `f Phi'(f) - Phi(f)` at interior nodes.
fn cordoba_terms(f: &SpectralField, phi: &ScalarFn, refine: usize) -> Result<(Array2<f64>, Array2<f64>, f64)> {
    let g = f.geometry();
    let n = g.n();
    let mut r = refine.max(1);
    if let Some(p) = phi.polynomial_degree() {
        r = r.max((p as usize * max_mode(f) + 2).div_ceil(n));
    }
    let m = n * r;
    let fine = f.sample_refined(r);
    let fine = fine.slice(s![1..m, 1..m]);
    let (lo, hi) = fine.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !phi.is_convex_on(lo, hi, 256) {
        return Err(Error::Precondition(format!("{} is not convex on [{lo:.4}, {hi:.4}]", phi.name())));
    }
    let lam_phi = lambda_refined(f, r, &fine.mapv(|v| phi.value(v)))?;
    let fv = f.inverse().into_values();
    let lf = lambda(f).inverse().into_values();
    let mut lhs = Array2::zeros(fv.raw_dim());
    let mut core = Array2::zeros(fv.raw_dim());
    let mut scale = 0.0f64;
    ndarray::Zip::from(&mut lhs).and(&mut core).and(&fv).and(&lf).and(&lam_phi).for_each(|l, c, f, lf, lp| {
        let d = phi.derivative(*f);
        *l = d * lf - lp;
        *c = f * d - phi.value(*f);
        scale = scale.max((d * lf).abs()).max(lp.abs());
    });
    Ok((lhs, core, scale))
}

/// Pointwise lower bound `Phi'(f) Lambda f - Lambda(Phi(f)) >= (c / d)(f Phi'(f) - Phi(f))`
/// at unmasked nodes with `d >= 4 dx`. The fitted constant `gamma1` is the infimum of
/// `d lhs / (f Phi' - Phi)`; per-field values are reported as `gamma1_<case>`.
pub fn verify_cordoba(fields: &[(String, SpectralField)], phi: &ScalarFn, refine: usize) -> Result<InequalityReport> {
    if phi.value(0.0) != 0.0 {
        return Err(Error::Precondition(format!("{} must vanish at 0", phi.name())));
    }
    let mut rep = ReportBuilder::new("cordoba", 0.0);
    let mut gamma = f64::INFINITY;
    for (case, f) in fields {
        let g = f.geometry();
        let (lhs, core, scale) = cordoba_terms(f, phi, refine)?;
        let dmin = 4.0 * g.spacing();
        let cmax = core.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut gc = f64::INFINITY;
        for ((a, b), l) in lhs.indexed_iter() {
            let d = g.distance()[[a, b]];
            if d < dmin * (1.0 - 1e-12) || g.corner_mask()[[a, b]] {
                continue;
            }
            let x = g.node(a, b);
            let c = core[[a, b]];
            if c > 1e-10 * cmax {
                let ratio = d * l / c;
                gc = gc.min(ratio);
                rep.bound(case, x, 0.0, 0.0, ratio, 1.0);
            } else if scale > 0.0 {
                // the bound degenerates to lhs >= 0 here
                rep.bound(&format!("{case}:nonneg"), x, 0.0, -1e-8 * scale, *l, scale);
            }
        }
        rep.constant(&format!("gamma1_{case}"), gc);
        gamma = gamma.min(gc);
    }
    rep.constant("gamma1", gamma);
    rep.note(format!("phi = {}", phi.name()));
    Ok(rep.finish())
}

/// [`verify_cordoba`] on the seeded family at `N` and at `2N`; the fitted `gamma1` must
/// agree within 20%.
pub fn verify_cordoba_refinement(
    geometry: &Arc<Geometry>,
    count: usize,
    seed: u64,
    phi: &ScalarFn,
    refine: usize,
) -> Result<InequalityReport> {
    let coarse = verify_cordoba(&standard_family(geometry, count, seed)?, phi, refine)?;
    let fine_geometry = Geometry::square(2 * geometry.n(), geometry.side(), geometry.corner_radius())?;
    let fine = verify_cordoba(&standard_family(&fine_geometry, count, seed)?, phi, refine)?;
    let (gc, gf) = (coarse.constant("gamma1").unwrap_or(f64::NAN), fine.constant("gamma1").unwrap_or(f64::NAN));
    let mut rep = ReportBuilder::new("cordoba", 0.0);
    rep.seed(seed);
    rep.constant("gamma1", gc);
    rep.constant("gamma1_refined", gf);
    for (k, v) in &coarse.fitted_constants {
        rep.constant(&format!("{k}@N={}", geometry.n()), *v);
    }
    rep.at_least("gamma1_positive", gc, f64::MIN_POSITIVE);
    rep.at_most("gamma1_refinement_change", (gf / gc - 1.0).abs(), 0.2);
    rep.absorb(&format!("N={}", geometry.n()), coarse);
    rep.absorb(&format!("N={}", fine_geometry.n()), fine);
    Ok(rep.finish())
}

/// Weighted convexity identity for `b = theta / w`: `defect >= -tol scale` for every `Phi`,
/// and `<= tol scale` for the reflection `-Phi`.
pub fn verify_weighted_identity(
    theta: &SpectralField,
    w: &SpectralField,
    phis: &[ScalarFn],
    refine: usize,
    tolerance: f64,
) -> Result<InequalityReport> {
    let mut rep = ReportBuilder::new("weighted_identity", tolerance);
    for phi in phis {
        let name = phi.name();
        let t = weighted_convexity_terms(theta, w, phi, refine)?;
        let scale = t.scale.max(f64::MIN_POSITIVE);
        let mut min_rel = f64::INFINITY;
        let mut max_abs = 0.0f64;
        for ((a, b), d) in t.defect.values().indexed_iter() {
            rep.bound(&name, theta.geometry().node(a, b), 0.0, -d, 0.0, scale);
            min_rel = min_rel.min(d / scale);
            max_abs = max_abs.max(d.abs() / scale);
        }
        rep.constant(&format!("min_defect[{name}]"), min_rel);
        rep.constant(&format!("max_abs_defect[{name}]"), max_abs);
        rep.constant(&format!("max_abs_rhs[{name}]"), t.rhs_core.max_abs() / scale);
        let refl = weighted_terms_with(theta, w, &phi.clone().negated(), refine, false)?;
        let worst = refl.defect.values().iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        rep.bound(&format!("{name}:reflected"), [f64::NAN; 2], 0.0, worst, 0.0, scale);
        rep.constant(&format!("max_reflected_defect[{name}]"), worst / scale);
    }
    Ok(rep.finish())
}

/// `Lambda 1` at interior nodes with the quadrature residual of its heat representation.
#[derive(Debug, Clone)]
pub struct ConstantLambda {
    pub values: GridField,
    pub residual: f64,
}

/// `e^{t Delta} 1` on `(0, L)` with Dirichlet conditions at `x`.
fn heat_of_one(t: f64, x: f64, side: f64) -> f64 {
    let k = PI / side;
    if k * k * t >= 0.25 {
        // odd modes of the square wave
        let mut acc = 0.0;
        let mut j = 1usize;
        loop {
            let jf = j as f64;
            let e = (-k * k * jf * jf * t).exp();
            acc += 4.0 / (PI * jf) * e * (jf * k * x).sin();
            if e < 1e-18 {
                break;
            }
            j += 2;
        }
        acc
    } else {
        // alternating images of the indicator of (0, L)
        let s = (4.0 * t).sqrt();
        let reach = (6.0 * s / side).ceil() as i64 + 1;
        let mut acc = 0.0;
        for n in -reach..=reach {
            let a = n as f64 * side;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * 0.5 * (erf((x - a) / s) - erf((x - a - side) / s));
        }
        acc
    }
}

/// `Lambda 1 = (2 sqrt(pi))^{-1} int_0^inf (1 - e^{t Delta} 1) t^{-3/2} dt` at interior nodes.
pub fn lambda_of_constant(geometry: &Arc<Geometry>) -> Result<ConstantLambda> {
    let n = geometry.n();
    let side = geometry.side();
    let k2 = (PI / side).powi(2);
    let dx = geometry.spacing();
    let t_min = dx * dx / 200.0;
    let t_max = 20.0 / k2;
    let (s0, s1) = (t_min.ln(), t_max.ln());
    let panels = (2.0 * (s1 - s0)).ceil() as usize;
    let gl = GaussLegendre::new(16);
    let xs: Vec<f64> = (1..n).map(|i| geometry.coord(i)).collect();
    let integrate = |panels: usize| -> Array2<f64> {
        let mut acc = Array2::<f64>::zeros((n - 1, n - 1));
        let width = (s1 - s0) / panels as f64;
        for p in 0..panels {
            let a = s0 + p as f64 * width;
            for (node, weight) in gl.nodes().iter().zip(gl.weights()) {
                let s = a + 0.5 * width * (node + 1.0);
                let t = s.exp();
                let w = 0.5 * width * weight * t.powf(-0.5);
                let u: Vec<f64> = xs.iter().map(|x| heat_of_one(t, *x, side)).collect();
                acc.indexed_iter_mut().for_each(|((i, j), v)| *v += w * (1.0 - u[i] * u[j]));
            }
        }
        acc
    };
    let fine = integrate(panels);
    let coarse = integrate(panels.div_ceil(2));
    let tail = 2.0 / t_max.sqrt();
    let c = 0.5 / PI.sqrt();
    let residual = c * (&fine - &coarse).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let values = fine.mapv(|v| c * (v + tail));
    Ok(ConstantLambda { values: GridField::new(geometry, values)?, residual })
}

/// `Lambda 1 >= c0 / w_1` on unmasked interior nodes with `c0` fitted as the infimum of
/// `w_1 Lambda 1`. Also checks the mirror symmetries and that `w_1 Lambda 1` increases
/// from the boundary to the centre along the centreline.
pub fn verify_lambda_one_lower(geometry: &Arc<Geometry>) -> Result<InequalityReport> {
    let lam = lambda_of_constant(geometry)?;
    let v = lam.values.values();
    let w = geometry.ground_state();
    let mask = geometry.corner_mask();
    let mut rep = ReportBuilder::new("lambda_one_lower", 1e-10);
    let mut c0 = f64::INFINITY;
    for ((a, b), l) in v.indexed_iter() {
        if !mask[[a, b]] {
            c0 = c0.min(l * w[[a, b]]);
        }
    }
    for ((a, b), l) in v.indexed_iter() {
        if !mask[[a, b]] {
            rep.bound("interior", geometry.node(a, b), 0.0, c0 / w[[a, b]], *l, *l);
        }
    }
    let m = geometry.modes();
    let vmax = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut asym = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            asym = asym.max((v[[a, b]] - v[[m - 1 - a, b]]).abs()).max((v[[a, b]] - v[[b, a]]).abs());
        }
    }
    rep.at_most("symmetry", asym / vmax, 1e-10);
    // centreline from the boundary to the middle
    let mid = geometry.n() / 2 - 1;
    let mut worst_step = f64::INFINITY;
    for a in 0..mid {
        let here = v[[a, mid]] * w[[a, mid]];
        let next = v[[a + 1, mid]] * w[[a + 1, mid]];
        worst_step = worst_step.min((next - here) / vmax);
    }
    rep.at_least("centreline_monotone", worst_step, 0.0);
    rep.constant("c0", c0);
    rep.constant("quadrature_residual", lam.residual);
    rep.constant("lambda_one_max", vmax);
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_of_one_images_match_series() {
        let side = PI;
        for t in [0.2, 0.249, 0.26] {
            for x in [0.01, 0.4, 1.3, PI / 2.0] {
                // evaluate both branches directly
                let k = PI / side;
                let mut series = 0.0;
                for j in (1..200).step_by(2) {
                    let jf = j as f64;
                    series += 4.0 / (PI * jf) * (-k * k * jf * jf * t).exp() * (jf * k * x).sin();
                }
                let s = (4.0 * t).sqrt();
                let mut images = 0.0;
                for n in -8i64..=8 {
                    let a = n as f64 * side;
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    images += sign * 0.5 * (erf((x - a) / s) - erf((x - a - side) / s));
                }
                assert!((series - images).abs() < 1e-13, "{t} {x}");
                assert!((heat_of_one(t, x, side) - series).abs() < 1e-13);
            }
        }
        assert!((heat_of_one(1e-6, 1.0, PI) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_lambda_against_truncated_spectral_sum() {
        // <Lambda 1, w_mn> = sqrt(lambda_mn) <1, w_mn>; test the centre value against a
        // Cesaro-summed spectral series
        let g = Geometry::square(32, PI, 0.0).unwrap();
        let lam = lambda_of_constant(&g).unwrap();
        assert!(lam.residual < 1e-10);
        let centre = lam.values.values()[[15, 15]];
        let kmax = 4001usize;
        let mut acc = 0.0;
        for m in (1..kmax).step_by(2) {
            for n in (1..kmax).step_by(2) {
                let (mf, nf) = (m as f64, n as f64);
                let weight = (1.0 - mf / kmax as f64) * (1.0 - nf / kmax as f64);
                let coeff = 8.0 / (PI * mf * nf);
                let w = 2.0 / PI * (mf * PI / 2.0).sin() * (nf * PI / 2.0).sin();
                acc += weight * (mf * mf + nf * nf).sqrt() * coeff * w;
            }
        }
        assert!((acc - centre).abs() < 2e-3 * centre, "{acc} {centre}");
    }
}
