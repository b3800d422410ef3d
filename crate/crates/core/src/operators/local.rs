//! Localized operators: standard cutoffs, grid finite differences and the commutator
//! `C_h(theta) = phi delta_h Lambda theta - phi Lambda(chi delta_h theta)`.

use std::sync::Arc;

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::spectral::{GridField, SpectralField};

use super::dissipation::lambda_refined;
use super::lambda;

const INNER: f64 = 5.0 / 16.0;
const OUTER: f64 = 7.0 / 16.0;

/// Nonincreasing profile: 1 on `z <= 5/16`, 0 on `z >= 7/16`, quintic smoothstep between.
pub fn cutoff_profile(z: f64) -> f64 {
    if z <= INNER {
        1.0
    } else if z >= OUTER {
        0.0
    } else {
        let s = (z - INNER) / (OUTER - INNER);
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

fn cutoff_profile_derivative(z: f64) -> f64 {
    if z <= INNER || z >= OUTER {
        0.0
    } else {
        let s = (z - INNER) / (OUTER - INNER);
        -30.0 * s * s * (1.0 - s) * (1.0 - s) / (OUTER - INNER)
    }
}

/// Cutoff `phi = Psi(|x - x0| / l)` and companion `chi = Psi(|x - x0| / (2 l))`.
#[derive(Debug, Clone)]
pub struct CutoffPair {
    center: [f64; 2],
    scale: f64,
    phi: Array2<f64>,
    chi: Array2<f64>,
}

impl CutoffPair {
    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `phi` at interior nodes.
    pub fn phi(&self) -> &Array2<f64> {
        &self.phi
    }

    /// `chi` at interior nodes.
    pub fn chi(&self) -> &Array2<f64> {
        &self.chi
    }

    fn radius(&self, x: [f64; 2]) -> f64 {
        (x[0] - self.center[0]).hypot(x[1] - self.center[1])
    }

    pub fn phi_at(&self, x: [f64; 2]) -> f64 {
        cutoff_profile(self.radius(x) / self.scale)
    }

    pub fn chi_at(&self, x: [f64; 2]) -> f64 {
        cutoff_profile(self.radius(x) / (2.0 * self.scale))
    }

    pub fn grad_chi_at(&self, x: [f64; 2]) -> [f64; 2] {
        let r = self.radius(x);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let d = cutoff_profile_derivative(r / (2.0 * self.scale)) / (2.0 * self.scale);
        [d * (x[0] - self.center[0]) / r, d * (x[1] - self.center[1]) / r]
    }
}

/// Standard cutoff with scale `ell` centred at `x0`; requires `d(x0) >= 2 ell`.
pub fn standard_cutoff(geometry: &Arc<Geometry>, x0: [f64; 2], ell: f64) -> Result<CutoffPair> {
    if !(ell > 0.0) {
        return Err(Error::Config(format!("cutoff scale must be positive, got {ell}")));
    }
    let d = geometry.distance_at(x0);
    if !geometry.contains(x0) || d < 2.0 * ell {
        return Err(Error::Precondition(format!("cutoff needs d(x0) >= 2 l, got d = {d}, l = {ell}")));
    }
    let m = geometry.modes();
    let mut pair = CutoffPair { center: x0, scale: ell, phi: Array2::zeros((m, m)), chi: Array2::zeros((m, m)) };
    let (phi, chi) = (
        Array2::from_shape_fn((m, m), |(a, b)| pair.phi_at(geometry.node(a, b))),
        Array2::from_shape_fn((m, m), |(a, b)| pair.chi_at(geometry.node(a, b))),
    );
    pair.phi = phi;
    pair.chi = chi;
    Ok(pair)
}

/// `delta_h f(x) = f(x + h) - f(x)` on nodes where `x + h` is interior.
#[derive(Debug, Clone)]
pub struct FiniteDifference {
    /// Displacement in grid steps.
    pub shift: [isize; 2],
    /// Differences, zero where invalid.
    pub field: GridField,
    pub valid: Array2<bool>,
}

/// Converts a displacement to whole grid steps.
pub(crate) fn grid_steps(geometry: &Geometry, h: [f64; 2]) -> Result<[isize; 2]> {
    let dx = geometry.spacing();
    let mut out = [0isize; 2];
    for (o, v) in out.iter_mut().zip(h) {
        let k = v / dx;
        let r = k.round();
        if !k.is_finite() || (k - r).abs() > 1e-9 * r.abs().max(1.0) {
            return Err(Error::Config(format!("displacement {v} is not a multiple of the grid spacing {dx}")));
        }
        *o = r as isize;
    }
    Ok(out)
}

fn shifted_difference(values: &Array2<f64>, shift: [isize; 2]) -> (Array2<f64>, Array2<bool>) {
    let (rows, cols) = values.dim();
    let mut out = Array2::zeros((rows, cols));
    let mut valid = Array2::from_elem((rows, cols), false);
    for a in 0..rows {
        let sa = a as isize + shift[0];
        if sa < 0 || sa >= rows as isize {
            continue;
        }
        for b in 0..cols {
            let sb = b as isize + shift[1];
            if sb < 0 || sb >= cols as isize {
                continue;
            }
            out[[a, b]] = values[[sa as usize, sb as usize]] - values[[a, b]];
            valid[[a, b]] = true;
        }
    }
    (out, valid)
}

/// Finite difference of grid samples along a grid-commensurate displacement `h`.
pub fn finite_difference(f: &GridField, h: [f64; 2]) -> Result<FiniteDifference> {
    let shift = grid_steps(f.geometry(), h)?;
    let (values, valid) = shifted_difference(f.values(), shift);
    Ok(FiniteDifference { shift, field: GridField::new(f.geometry(), values)?, valid })
}

/// [`finite_difference`] of a spectral field's node values.
pub fn finite_difference_spectral(f: &SpectralField, h: [f64; 2]) -> Result<FiniteDifference> {
    finite_difference(&f.inverse(), h)
}

/// `C_h(theta)` at interior nodes, with `Lambda(chi delta_h theta)` computed from samples on
/// a grid refined `refine` times. Requires `|h| <= l / 16`.
pub fn commutator(theta: &SpectralField, x0: [f64; 2], ell: f64, h: [f64; 2], refine: usize) -> Result<GridField> {
    let g = theta.geometry();
    if h[0].hypot(h[1]) > ell / 16.0 * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("commutator needs |h| <= l/16, got |h| = {}", h[0].hypot(h[1]))));
    }
    let cut = standard_cutoff(g, x0, ell)?;
    let shift = grid_steps(g, h)?;
    let r = refine.max(1);

    let (dl, _) = shifted_difference(&lambda(theta).inverse().into_values(), shift);
    let mut first = dl;
    first *= cut.phi();

    let n = g.n();
    let m = n * r;
    let fine = theta.sample_refined(r);
    let fs = [shift[0] * r as isize, shift[1] * r as isize];
    let hf = g.spacing() / r as f64;
    let chi_delta = Array2::from_shape_fn((m - 1, m - 1), |(a, b)| {
        let (i, j) = (a + 1, b + 1);
        let x = [i as f64 * hf, j as f64 * hf];
        let c = cut.chi_at(x);
        if c == 0.0 {
            return 0.0;
        }
        let (si, sj) = (i as isize + fs[0], j as isize + fs[1]);
        // chi is supported well inside, so the shifted node stays on the grid
        c * (fine[[si as usize, sj as usize]] - fine[[i, j]])
    });
    let mut second = lambda_refined(theta, r, &chi_delta)?;
    second *= cut.phi();

    let mut out = first;
    Zip::from(&mut out).and(&second).for_each(|a, b| *a -= b);
    GridField::new(g, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn geom(n: usize) -> Arc<Geometry> {
        Geometry::square(n, PI, 0.05 * PI).unwrap()
    }

    #[test]
    fn profile_shape() {
        assert_eq!(cutoff_profile(0.0), 1.0);
        assert_eq!(cutoff_profile(0.3125), 1.0);
        assert_eq!(cutoff_profile(0.4375), 0.0);
        let mut last = 1.0;
        for i in 0..=100 {
            let v = cutoff_profile(0.3 + 0.0015 * i as f64);
            assert!(v <= last);
            last = v;
        }
        let h = 1e-6;
        let z = 0.37;
        let d = (cutoff_profile(z + h) - cutoff_profile(z - h)) / (2.0 * h);
        assert!((d - cutoff_profile_derivative(z)).abs() < 1e-6);
    }

    #[test]
    fn cutoff_invariants() {
        let g = geom(64);
        let x0 = [PI / 2.0, PI / 2.0];
        let ell = 0.6;
        let c = standard_cutoff(&g, x0, ell).unwrap();
        assert_eq!(c.phi_at(x0), 1.0);
        assert_eq!(c.chi_at(x0), 1.0);
        assert_eq!(c.phi_at([x0[0] + ell / 2.0, x0[1]]), 0.0);
        Zip::from(c.phi()).and(c.chi()).for_each(|p, x| {
            assert!(0.0 <= *p && p <= x && *x <= 1.0);
            assert_eq!(p * x, *p);
        });
        for a in 0..g.modes() {
            for b in 0..g.modes() {
                let x = g.node(a, b);
                if c.phi_at(x) > 0.0 {
                    assert_eq!(c.grad_chi_at(x), [0.0, 0.0]);
                }
            }
        }
        assert!(matches!(standard_cutoff(&g, [0.5, PI / 2.0], 0.3), Err(Error::Precondition(_))));
    }

    #[test]
    fn finite_difference_basics() {
        let g = geom(16);
        let f = GridField::from_fn(&g, |x| 3.0 * x[0] + 1.0);
        let h = [2.0 * g.spacing(), 0.0];
        let d = finite_difference(&f, h).unwrap();
        Zip::from(d.field.values()).and(&d.valid).for_each(|v, ok| {
            if *ok {
                assert!((v - 3.0 * h[0]).abs() < 1e-12);
            }
        });
        let z = finite_difference(&f, [0.0, 0.0]).unwrap();
        assert_eq!(z.field.max_abs(), 0.0);
        assert!(matches!(finite_difference(&f, [0.1, 0.0]), Err(Error::Config(_))));
    }

    #[test]
    fn finite_difference_antisymmetry() {
        let g = geom(16);
        let f = SpectralField::from_modes(&g, &[(1, 1, 1.0), (3, 2, 0.5)]).unwrap();
        let h = [g.spacing(), -2.0 * g.spacing()];
        let fwd = finite_difference_spectral(&f, h).unwrap();
        let back = finite_difference_spectral(&f, [-h[0], -h[1]]).unwrap();
        for a in 0..g.modes() {
            for b in 0..g.modes() {
                if fwd.valid[[a, b]] {
                    let (sa, sb) = ((a as isize + 1) as usize, (b as isize - 2) as usize);
                    assert!(back.valid[[sa, sb]]);
                    assert_eq!(back.field.values()[[sa, sb]], -fwd.field.values()[[a, b]]);
                }
            }
        }
    }

    #[test]
    fn commutator_vanishes_for_zero_shift() {
        let g = geom(64);
        let th = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let c = commutator(&th, [PI / 2.0, PI / 2.0], 0.5, [0.0, 0.0], 2).unwrap();
        assert_eq!(c.max_abs(), 0.0);
        let too_big = [4.0 * g.spacing(), 0.0];
        assert!(matches!(commutator(&th, [PI / 2.0, PI / 2.0], 0.5, too_big, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn commutator_is_linear() {
        let g = geom(128);
        let th = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let h = [g.spacing(), 0.0];
        let a = commutator(&th, [PI / 2.0, PI / 2.0], 0.78, h, 2).unwrap();
        let b = commutator(&th.scale(2.0), [PI / 2.0, PI / 2.0], 0.78, h, 2).unwrap();
        assert!((b.max_abs() - 2.0 * a.max_abs()).abs() < 1e-12 * b.max_abs());
    }
}
