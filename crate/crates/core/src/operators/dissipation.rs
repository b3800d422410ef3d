//! Pointwise nonlinear identities for `Lambda`: the dissipation `D(f)` and the
//! weighted convexity terms.
//!
//! Products and compositions leave the retained modes, so `Lambda` is applied on a
//! grid refined `r` times and the result is read back at the coarse nodes by folding
//! the fine sine coefficients with the aliasing pattern of the coarse grid.

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{Error, Result};
use crate::spectral::{project_axis, project_products, GridField, Parity, SpectralField, TrigSeries};

use super::convex::ScalarFn;
use super::{lambda, same_geometry};

/// Default refinement factor for off-grid products.
pub const DEFAULT_REFINE: usize = 4;

/// Folds plain sine coefficients (modes `1..=K` per axis) onto the `n - 1` modes that
/// reproduce the same values at the nodes `i L / n`.
pub(crate) fn fold_to_grid(plain: &Array2<f64>, n: usize) -> Array2<f64> {
    let fold = |len: usize| -> Vec<Option<(usize, f64)>> {
        (1..=len)
            .map(|m| {
                let r = m % (2 * n);
                if r == 0 || r == n {
                    None
                } else if r < n {
                    Some((r - 1, 1.0))
                } else {
                    Some((2 * n - r - 1, -1.0))
                }
            })
            .collect()
    };
    let (kx, ky) = plain.dim();
    let fx = fold(kx);
    let fy = fold(ky);
    let mut stage = Array2::<f64>::zeros((n - 1, ky));
    for (m, row) in plain.axis_iter(Axis(0)).enumerate() {
        if let Some((i, sgn)) = fx[m] {
            stage.row_mut(i).scaled_add(sgn, &row);
        }
    }
    let mut out = Array2::<f64>::zeros((n - 1, n - 1));
    for (m, col) in stage.axis_iter(Axis(1)).enumerate() {
        if let Some((j, sgn)) = fy[m] {
            out.column_mut(j).scaled_add(sgn, &col);
        }
    }
    out
}

/// `Lambda` of plain sine coefficients, read at the coarse interior nodes of `f`'s grid.
fn lambda_plain_at_nodes(f: &SpectralField, plain: Array2<f64>) -> Array2<f64> {
    let g = f.geometry();
    let n = g.n();
    let k = g.wavenumber();
    let mut c = plain;
    c.indexed_iter_mut().for_each(|((a, b), v)| {
        let (m, q) = ((a + 1) as f64, (b + 1) as f64);
        *v *= k * (m * m + q * q).sqrt();
    });
    let folded = fold_to_grid(&c, n);
    let full = TrigSeries::new([Parity::Sine, Parity::Sine], folded, k).synthesize(n, n);
    full.slice(s![1..n, 1..n]).to_owned()
}

/// `Lambda g` at the coarse interior nodes for `g` given by its samples on the interior
/// nodes of the grid refined `refine` times. Exact when `g` is a sine polynomial of
/// degree below `refine * N`.
pub fn lambda_refined(f: &SpectralField, refine: usize, fine_interior: &Array2<f64>) -> Result<Array2<f64>> {
    let n = f.geometry().n();
    let m = n * refine;
    if refine == 0 || fine_interior.dim() != (m - 1, m - 1) {
        return Err(Error::Shape(format!("expected {0}x{0} refined samples", m - 1)));
    }
    let mut padded = Array2::<f64>::zeros((m + 1, m + 1));
    padded.slice_mut(s![1..m, 1..m]).assign(fine_interior);
    let stage = project_axis(padded.view(), Axis(0), Parity::Sine, 0, m, m - 1);
    let plain = project_axis(stage.view(), Axis(1), Parity::Sine, 0, m, m - 1);
    Ok(lambda_plain_at_nodes(f, plain))
}

/// `D(f) = f Lambda f - Lambda(f^2) / 2` at interior nodes, `f^2` projected exactly onto
/// `DEFAULT_REFINE * N - 1` modes per axis.
pub fn nonlinear_dissipation(f: &SpectralField) -> GridField {
    nonlinear_dissipation_refined(f, DEFAULT_REFINE)
}

/// [`nonlinear_dissipation`] with an explicit refinement factor.
pub fn nonlinear_dissipation_refined(f: &SpectralField, refine: usize) -> GridField {
    let g = f.geometry();
    let modes = g.n() * refine.max(1) - 1;
    let s = f.series();
    let sq = project_products(&[(&s, &s)], modes);
    let lam_sq = lambda_plain_at_nodes(f, sq);
    let fv = f.inverse().into_values();
    let lf = lambda(f).inverse().into_values();
    let mut out = fv * lf;
    out.scaled_add(-0.5, &lam_sq);
    GridField::new(g, out).expect("interior shape")
}

/// The three fields of the weighted convexity identity at interior nodes.
#[derive(Debug, Clone)]
pub struct WeightedTerms {
    /// `b = theta / w`
    pub b: GridField,
    /// `Phi'(b) Lambda(w b) - Lambda(w Phi(b))`
    pub lhs: GridField,
    /// `(Lambda w)(b Phi'(b) - Phi(b))`
    pub rhs_core: GridField,
    /// `lhs - rhs_core`
    pub defect: GridField,
    /// Magnitude of the terms entering `lhs`, for relative tolerances.
    pub scale: f64,
    /// Refinement factor used for `Lambda(w Phi(b))`.
    pub refine: usize,
}

fn max_mode(f: &SpectralField) -> usize {
    f.coeffs()
        .indexed_iter()
        .filter(|(_, v)| **v != 0.0)
        .map(|((a, b), _)| a.max(b) + 1)
        .max()
        .unwrap_or(1)
}

/// Terms of the weighted convexity identity for `b = theta / w`.
///
/// `Lambda(w Phi(b))` is evaluated from samples on a grid refined `refine` times; for
/// polynomial `Phi` the factor is raised until `w Phi(b)` is resolved exactly when
/// `w = w_1`.
pub fn weighted_convexity_terms(
    theta: &SpectralField,
    w: &SpectralField,
    phi: &ScalarFn,
    refine: usize,
) -> Result<WeightedTerms> {
    weighted_terms_with(theta, w, phi, refine, true)
}

/// [`weighted_convexity_terms`] with the convexity check optional.
pub(crate) fn weighted_terms_with(
    theta: &SpectralField,
    w: &SpectralField,
    phi: &ScalarFn,
    refine: usize,
    require_convex: bool,
) -> Result<WeightedTerms> {
    same_geometry(theta.geometry(), w.geometry())?;
    let g = theta.geometry();
    let n = g.n();
    let mut r = refine.max(1);
    if let Some(p) = phi.polynomial_degree() {
        let deg = p as usize * max_mode(theta).max(max_mode(w)) + 2;
        r = r.max(deg.div_ceil(n));
    }
    let m = n * r;

    let fine_theta = theta.sample_refined(r);
    let fine_w = w.sample_refined(r);
    let fine_theta = fine_theta.slice(s![1..m, 1..m]);
    let fine_w = fine_w.slice(s![1..m, 1..m]);
    if fine_w.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("weight must be positive at every interior node".into()));
    }
    let mut fine_b = fine_theta.to_owned();
    Zip::from(&mut fine_b).and(&fine_w).for_each(|b, w| *b /= w);
    let (lo, hi) = fine_b.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, c), v| (a.min(*v), c.max(*v)));
    if require_convex
        && (!phi.is_convex_on(lo, hi, 256) || !fine_b.iter().all(|b| phi.second_derivative(*b) >= -1e-14))
    {
        return Err(Error::Precondition(format!(
            "{} is not convex on the sampled range [{lo:.4}, {hi:.4}] of b",
            phi.name()
        )));
    }
    let mut fine_wphi = fine_b.clone();
    Zip::from(&mut fine_wphi).and(&fine_w).for_each(|b, w| *b = w * phi.value(*b));
    let lam_wphi = lambda_refined(theta, r, &fine_wphi)?;

    // coarse nodes are every r-th fine node
    let b = fine_b.slice(s![r - 1..; r, r - 1..; r]).to_owned();
    let lam_theta = lambda(theta).inverse().into_values();
    let lam_w = lambda(w).inverse().into_values();

    let mut lhs = Array2::zeros(b.raw_dim());
    let mut rhs = Array2::zeros(b.raw_dim());
    let mut scale = 0.0f64;
    Zip::from(&mut lhs)
        .and(&mut rhs)
        .and(&b)
        .and(&lam_theta)
        .and(&lam_wphi)
        .and(&lam_w)
        .for_each(|l, rc, b, lt, lp, lw| {
            let first = phi.derivative(*b) * lt;
            *l = first - lp;
            *rc = lw * (b * phi.derivative(*b) - phi.value(*b));
            scale = scale.max(first.abs()).max(lp.abs());
        });
    let mut defect = lhs.clone();
    defect -= &rhs;
    Ok(WeightedTerms {
        b: GridField::new(g, b)?,
        lhs: GridField::new(g, lhs)?,
        rhs_core: GridField::new(g, rhs)?,
        defect: GridField::new(g, defect)?,
        scale,
        refine: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    use crate::geometry::Geometry;

    fn geom(n: usize) -> Arc<Geometry> {
        Geometry::square(n, PI, 0.05 * PI).unwrap()
    }

    #[test]
    fn folding_reproduces_fine_values_at_coarse_nodes() {
        let n = 8;
        let mut plain = Array2::zeros((40, 40));
        plain[[20, 3]] = 1.0;
        plain[[9, 30]] = -0.5;
        plain[[15, 15]] = 0.25;
        plain[[7, 7]] = 2.0; // mode 8 = n: vanishes at coarse nodes
        let fine = TrigSeries::new([Parity::Sine, Parity::Sine], plain.clone(), 1.0).synthesize(80, 80);
        let coarse = TrigSeries::new([Parity::Sine, Parity::Sine], fold_to_grid(&plain, n), 1.0).synthesize(n, n);
        for i in 0..=n {
            for j in 0..=n {
                assert!((fine[[10 * i, 10 * j]] - coarse[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dissipation_is_quadratic_and_vanishes_at_zero() {
        let g = geom(24);
        let f = SpectralField::from_modes(&g, &[(1, 1, 1.0), (2, 3, 0.4)]).unwrap();
        let d = nonlinear_dissipation(&f);
        let d3 = nonlinear_dissipation(&f.scale(3.0));
        let err = (d3.values() - &(d.values() * 9.0)).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-12 * d3.max_abs());
        assert_eq!(nonlinear_dissipation(&SpectralField::zeros(&g)).max_abs(), 0.0);
    }

    #[test]
    fn ground_state_dissipation_is_positive() {
        let g = geom(32);
        let w = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let d = nonlinear_dissipation(&w);
        assert!(d.values().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn refinement_converges_at_second_order() {
        let g = geom(16);
        let f = SpectralField::from_modes(&g, &[(1, 1, 1.0), (3, 2, -0.3)]).unwrap();
        let reference = nonlinear_dissipation_refined(&f, 64);
        let err = |r| {
            let a = nonlinear_dissipation_refined(&f, r);
            (a.values() - reference.values()).iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let (e2, e4, e8) = (err(2), err(4), err(8));
        assert!(e2 / e4 > 3.5 && e4 / e8 > 3.5, "{e2} {e4} {e8}");
        assert!(e4 < 3e-3 * reference.max_abs());
    }

    #[test]
    fn linear_phi_gives_zero_defect() {
        let g = geom(24);
        let w = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let th = SpectralField::from_modes(&g, &[(1, 2, 1.0), (3, 1, 0.5)]).unwrap();
        let t = weighted_convexity_terms(&th, &w, &ScalarFn::Linear { slope: 2.0 }, 1).unwrap();
        assert!(t.defect.max_abs() < 1e-10);
        assert!(t.rhs_core.max_abs() < 1e-10);
    }

    #[test]
    fn constant_ratio_square() {
        let g = geom(24);
        let w = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let t = weighted_convexity_terms(&w, &w, &ScalarFn::square(), DEFAULT_REFINE).unwrap();
        for ((a, b), v) in t.lhs.values().indexed_iter() {
            let expect = 2f64.sqrt() * g.ground_state()[[a, b]];
            assert!((v - expect).abs() < 1e-10);
            assert!((t.rhs_core.values()[[a, b]] - expect).abs() < 1e-10);
        }
        assert!(t.defect.max_abs() < 1e-10);
    }

    #[test]
    fn defect_nonnegative_for_square() {
        let g = geom(32);
        let w = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let th = SpectralField::mode(&g, 1, 2, 1.0).unwrap();
        let t = weighted_convexity_terms(&th, &w, &ScalarFn::square(), DEFAULT_REFINE).unwrap();
        let min = t.defect.values().iter().fold(f64::INFINITY, |m, v| m.min(*v));
        assert!(min >= -1e-8, "{min}");
    }

    #[test]
    fn rejects_nonconvex_and_nonpositive_weight() {
        let g = geom(16);
        let w = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let th = SpectralField::mode(&g, 1, 2, 1.0).unwrap();
        let cubic = ScalarFn::Power { coeff: 1.0, exponent: 3 };
        assert!(matches!(weighted_convexity_terms(&th, &w, &cubic, 2), Err(Error::Precondition(_))));
        let bad = SpectralField::mode(&g, 2, 1, 1.0).unwrap();
        assert!(matches!(weighted_convexity_terms(&th, &bad, &ScalarFn::square(), 2), Err(Error::Domain(_))));
    }
}
