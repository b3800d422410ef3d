use std::sync::Arc;

use ndarray::{s, Array2, Zip};
use libm::erf;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::spectral::{trapezoid, SpectralField, TrigSeries};

/// Sign of the rotation `J`: `+1` is rotation by `+pi/2`, `u = (-d_y psi, d_x psi)`.
pub const DEFAULT_ROTATION: f64 = 1.0;

/// Divergence-free velocity `u = J grad psi` sampled on the full node set.
///
/// Since `psi` is a sine series it vanishes on the boundary, so `u` is tangent there.
#[derive(Debug, Clone)]
pub struct VelocityField {
    psi: SpectralField,
    rotation: f64,
    ux: Array2<f64>,
    uy: Array2<f64>,
}

impl VelocityField {
    /// Velocity of the stream function `psi` with rotation sign `rotation` (`+1` or `-1`).
    pub fn from_stream(psi: SpectralField, rotation: f64) -> Result<Self> {
        if rotation != 1.0 && rotation != -1.0 {
            return Err(Error::Config(format!("rotation sign must be +1 or -1, got {rotation}")));
        }
        let (ux, uy) = components(&psi.series(), psi.geometry().n(), rotation);
        Ok(VelocityField { psi, rotation, ux, uy })
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        self.psi.geometry()
    }

    pub fn stream_function(&self) -> &SpectralField {
        &self.psi
    }

    pub fn rotation(&self) -> f64 {
        self.rotation
    }

    /// x-component on the `(N + 1)^2` node set.
    pub fn ux(&self) -> &Array2<f64> {
        &self.ux
    }

    pub fn uy(&self) -> &Array2<f64> {
        &self.uy
    }

    /// `|u|` on the node set.
    pub fn speed(&self) -> Array2<f64> {
        let mut out = self.ux.clone();
        Zip::from(&mut out).and(&self.uy).for_each(|a, b| *a = a.hypot(*b));
        out
    }

    pub fn sup_norm(&self) -> f64 {
        self.speed().iter().fold(0.0f64, |m, v| m.max(*v))
    }

    /// `||u||_{L^2}` from Parseval, `sum lambda psi^2`.
    pub fn l2_norm(&self) -> f64 {
        let lam = self.geometry().eigenvalues();
        self.psi.coeffs().iter().zip(lam.iter()).map(|(p, l)| l * p * p).sum::<f64>().sqrt()
    }

    /// `||u||_{L^2}` by trapezoidal quadrature on the nodes.
    pub fn l2_norm_quadrature(&self) -> f64 {
        let h = self.geometry().spacing();
        (trapezoid(&self.ux, h, |v| v * v) + trapezoid(&self.uy, h, |v| v * v)).sqrt()
    }

    /// Max of `|div u|` over the nodes, from the exact derivatives of the components.
    pub fn divergence_max(&self) -> f64 {
        let n = self.geometry().n();
        let s = self.psi.series();
        let ux = s.derivative(1).scaled(-self.rotation);
        let uy = s.derivative(0).scaled(self.rotation);
        let a = ux.derivative(0).synthesize(n, n);
        let b = uy.derivative(1).synthesize(n, n);
        Zip::from(&a).and(&b).fold(0.0f64, |m, x, y| m.max((x + y).abs()))
    }

    /// Max of the normal component over boundary nodes.
    pub fn normal_trace_max(&self) -> f64 {
        let n = self.geometry().n();
        let sides = [
            self.ux.slice(s![0, ..]).to_owned(),
            self.ux.slice(s![n, ..]).to_owned(),
            self.uy.slice(s![.., 0]).to_owned(),
            self.uy.slice(s![.., n]).to_owned(),
        ];
        sides.iter().flat_map(|a| a.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Velocity at an arbitrary point.
    pub fn at(&self, x: [f64; 2]) -> [f64; 2] {
        let g = self.geometry();
        let k = g.wavenumber();
        let amp = 2.0 / g.side();
        let mut u = [0.0, 0.0];
        for ((a, b), p) in self.psi.coeffs().indexed_iter() {
            if *p == 0.0 {
                continue;
            }
            let (mk, nk) = ((a + 1) as f64 * k, (b + 1) as f64 * k);
            let (sx, cx) = (mk * x[0]).sin_cos();
            let (sy, cy) = (nk * x[1]).sin_cos();
            u[0] -= p * nk * sx * cy;
            u[1] += p * mk * cx * sy;
        }
        [self.rotation * amp * u[0], self.rotation * amp * u[1]]
    }

    /// Zero velocity on the geometry.
    pub fn zero(geometry: &Arc<Geometry>) -> Self {
        let n = geometry.n();
        VelocityField {
            psi: SpectralField::zeros(geometry),
            rotation: DEFAULT_ROTATION,
            ux: Array2::zeros((n + 1, n + 1)),
            uy: Array2::zeros((n + 1, n + 1)),
        }
    }
}

fn components(s: &TrigSeries, n: usize, rotation: f64) -> (Array2<f64>, Array2<f64>) {
    let ux = s.derivative(1).scaled(-rotation).synthesize(n, n);
    let uy = s.derivative(0).scaled(rotation).synthesize(n, n);
    (ux, uy)
}

/// `u = J grad Lambda^{-1} theta`.
pub fn riesz_velocity(theta: &SpectralField) -> VelocityField {
    riesz_velocity_signed(theta, DEFAULT_ROTATION)
}

/// [`riesz_velocity`] with an explicit rotation sign.
pub fn riesz_velocity_signed(theta: &SpectralField, rotation: f64) -> VelocityField {
    let mut c = theta.coeffs().clone();
    Zip::from(&mut c).and(theta.geometry().sqrt_eigenvalues()).for_each(|a, l| *a /= l);
    let psi = theta.with_coeffs(c).with_tag("psi");
    VelocityField::from_stream(psi, rotation).expect("valid rotation sign")
}

/// Short-time part of the velocity: stream multiplier
/// `c int_0^tau t^{-1/2} e^{-t lambda} dt = erf(sqrt(tau lambda)) / sqrt(lambda)` with `c = 1/sqrt(pi)`.
pub fn short_time_velocity(theta: &SpectralField, tau: f64) -> Result<VelocityField> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("short-time velocity needs tau > 0, got {tau}")));
    }
    let mut c = theta.coeffs().clone();
    Zip::from(&mut c)
        .and(theta.geometry().eigenvalues())
        .for_each(|a, l| *a *= if tau.is_infinite() { 1.0 } else { erf((tau * l).sqrt()) } / l.sqrt());
    VelocityField::from_stream(theta.with_coeffs(c).with_tag("psi"), DEFAULT_ROTATION)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    use crate::quadrature::GaussLegendre;

    fn geom() -> Arc<Geometry> {
        Geometry::square(32, PI, 0.0).unwrap()
    }

    #[test]
    fn ground_state_velocity_closed_form() {
        let g = geom();
        let w = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let u = riesz_velocity(&w);
        let amp = 2f64.sqrt().recip() * 2.0 / PI;
        for i in 0..=32 {
            for j in 0..=32 {
                let (x, y) = (g.coord(i), g.coord(j));
                assert!((u.ux()[[i, j]] + amp * x.sin() * y.cos()).abs() < 1e-14);
                assert!((u.uy()[[i, j]] - amp * x.cos() * y.sin()).abs() < 1e-14);
            }
        }
        let p = u.at([0.3, 1.1]);
        assert!((p[0] + amp * 0.3f64.sin() * 1.1f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn divergence_free_and_tangent() {
        let g = geom();
        let th = SpectralField::from_modes(&g, &[(1, 1, 1.0), (3, 2, -0.4), (5, 9, 0.2)]).unwrap();
        let u = riesz_velocity(&th);
        assert!(u.divergence_max() < 1e-10 * th.l2_norm());
        assert!(u.normal_trace_max() < 1e-10 * th.l2_norm());
        assert_eq!(riesz_velocity(&SpectralField::zeros(&g)).sup_norm(), 0.0);
    }

    #[test]
    fn single_mode_isometry() {
        let g = geom();
        for (m, n) in [(1, 1), (2, 5), (7, 3)] {
            let th = SpectralField::mode(&g, m, n, 1.3).unwrap();
            let u = riesz_velocity(&th);
            assert!((u.l2_norm() - th.l2_norm()).abs() < 1e-12);
            assert!((u.l2_norm_quadrature() - th.l2_norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_rotation_flips_velocity() {
        let g = geom();
        let th = SpectralField::mode(&g, 2, 1, 1.0).unwrap();
        let a = riesz_velocity(&th);
        let b = riesz_velocity_signed(&th, -1.0);
        assert_eq!(a.ux(), &b.ux().mapv(|v| -v));
        assert!(VelocityField::from_stream(th, 0.5).is_err());
    }

    #[test]
    fn short_time_velocity_limits() {
        let g = geom();
        let th = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let full = riesz_velocity(&th);
        let late = short_time_velocity(&th, 60.0).unwrap();
        let err = (late.ux() - full.ux()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-8);
        let early = short_time_velocity(&th, 1e-12).unwrap();
        assert!(early.sup_norm() < 1e-5);
        let mut last = 0.0;
        for tau in [0.01, 0.1, 0.5, 1.0, 3.0] {
            let s = short_time_velocity(&th, tau).unwrap().sup_norm();
            assert!(s >= last);
            last = s;
        }
        assert!(matches!(short_time_velocity(&th, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn short_time_multiplier_matches_quadrature() {
        // int_0^tau t^{-1/2} e^{-t lam} dt = 2 int_0^{sqrt tau} e^{-s^2 lam} ds
        let gl = GaussLegendre::new(30);
        let g = geom();
        let th = SpectralField::mode(&g, 2, 3, 1.0).unwrap();
        let lam = g.eigenvalue(2, 3);
        for tau in [0.05f64, 0.4, 2.0] {
            let integral = 2.0 * gl.integrate_composite(0.0, tau.sqrt(), 8, |s| (-s * s * lam).exp());
            let expect = integral / PI.sqrt();
            let u = short_time_velocity(&th, tau).unwrap();
            let got = u.stream_function().coeffs()[[1, 2]];
            assert!((got - expect).abs() < 1e-13, "{got} {expect}");
        }
    }
}
