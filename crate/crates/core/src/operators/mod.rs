//! Nonlocal operators on the Dirichlet square.

mod convex;
mod dissipation;
mod kernel;
mod local;
mod velocity;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::quadrature::GaussLegendre;
use crate::spectral::SpectralField;

pub use convex::ScalarFn;
pub use dissipation::{
    lambda_refined, nonlinear_dissipation, nonlinear_dissipation_refined, weighted_convexity_terms, WeightedTerms,
    DEFAULT_REFINE,
};
pub use kernel::{heat_kernel, heat_kernel_derivatives, HeatKernelDerivatives, HeatKernelSample, MAX_KERNEL_MODES};
pub use local::{
    commutator, cutoff_profile, finite_difference, finite_difference_spectral, standard_cutoff, CutoffPair,
    FiniteDifference,
};
pub(crate) use kernel::modes_for;
pub(crate) use dissipation::weighted_terms_with;
pub use velocity::{riesz_velocity, riesz_velocity_signed, short_time_velocity, VelocityField, DEFAULT_ROTATION};

/// `a_{m,n} -> lambda_{m,n}^{s/2} a_{m,n}`, for `s` in `[-1, 2]`.
pub fn apply_lambda_power(f: &SpectralField, s: f64) -> Result<SpectralField> {
    if !(-1.0..=2.0).contains(&s) {
        return Err(Error::Config(format!("Lambda power s = {s} outside [-1, 2]")));
    }
    let lam = f.geometry().eigenvalues();
    let half = 0.5 * s;
    let mut c = f.coeffs().clone();
    ndarray::Zip::from(&mut c).and(lam).for_each(|a, l| *a *= l.powf(half));
    Ok(f.with_coeffs(c))
}

/// `Lambda f = (-Delta)^{1/2} f`.
pub fn lambda(f: &SpectralField) -> SpectralField {
    let mut c = f.coeffs().clone();
    ndarray::Zip::from(&mut c).and(f.geometry().sqrt_eigenvalues()).for_each(|a, l| *a *= l);
    f.with_coeffs(c)
}

/// `e^{t Delta} f`.
pub fn heat_semigroup(f: &SpectralField, t: f64) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("heat semigroup needs t >= 0, got {t}")));
    }
    let mut c = f.coeffs().clone();
    ndarray::Zip::from(&mut c).and(f.geometry().eigenvalues()).for_each(|a, l| *a *= (-t * l).exp());
    Ok(f.with_coeffs(c))
}

/// Quadrature plan for the heat representation of `Lambda^s`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatQuadrature {
    /// Target relative accuracy of each multiplier.
    pub tolerance: f64,
    /// Gauss-Legendre order per panel in `u = ln t`.
    pub order: usize,
    /// Panels per unit length in `u`.
    pub panels_per_unit: f64,
}

impl Default for HeatQuadrature {
    fn default() -> Self {
        HeatQuadrature { tolerance: 1e-10, order: 16, panels_per_unit: 1.0 }
    }
}

/// The multiplier `int_0^inf (1 - e^{-t lambda}) t^{-1-s/2} dt` evaluated by quadrature in
/// `u = ln t` over `[t_min, t_max]`, with the head bounded and the tail added in closed form.
#[derive(Debug, Clone)]
pub struct HeatRepresentation {
    s: f64,
    u_min: f64,
    u_max: f64,
    t_max: f64,
    fine: (GaussLegendre, usize),
    coarse: (GaussLegendre, usize),
    normalization: f64,
}

impl HeatRepresentation {
    /// Plan covering eigenvalues in `[lambda_min, lambda_max]`.
    pub fn new(s: f64, lambda_min: f64, lambda_max: f64, q: &HeatQuadrature) -> Result<Self> {
        if !(s > 0.0 && s < 2.0) {
            return Err(Error::Config(format!("heat representation needs s in (0, 2), got {s}")));
        }
        if !(q.tolerance > 0.0 && q.order >= 2 && q.panels_per_unit > 0.0) {
            return Err(Error::Config("invalid heat quadrature parameters".into()));
        }
        let a = 1.0 - 0.5 * s;
        // head: int_0^tmin (1 - e^{-t lam}) t^{-1-s/2} <= lam tmin^{a} / a, relative to lam^{s/2}
        let t_min = (q.tolerance * 1e-2 * a).powf(1.0 / a) / lambda_max;
        // neglected part of the tail: int_tmax^inf e^{-t lam} t^{-1-s/2} <= e^{-tmax lam} tmax^{-1-s/2} / lam
        let t_max = (-(q.tolerance * 1e-3).ln() + 2.0) / lambda_min;
        let (u_min, u_max) = (t_min.ln(), t_max.ln());
        let panels = ((u_max - u_min) * q.panels_per_unit).ceil().max(1.0) as usize;
        let mut rep = HeatRepresentation {
            s,
            u_min,
            u_max,
            t_max,
            fine: (GaussLegendre::new(q.order), panels),
            coarse: (GaussLegendre::new(q.order), (panels / 2).max(1)),
            normalization: 1.0,
        };
        // c_s fixed so the ground-state multiplier is exact
        let raw = rep.raw(lambda_min, &rep.fine);
        rep.normalization = lambda_min.powf(0.5 * s) / raw;
        Ok(rep)
    }

    fn raw(&self, lam: f64, rule: &(GaussLegendre, usize)) -> f64 {
        let h = 0.5 * self.s;
        let body = rule.0.integrate_composite(self.u_min, self.u_max, rule.1, |u| {
            let t = u.exp();
            -(-t * lam).exp_m1() * (-h * u).exp()
        });
        body + self.t_max.powf(-h) / h
    }

    /// Calibrated constant `c_s`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Closed form `c_s = (s/2) / Gamma(1 - s/2)`.
    pub fn exact_normalization(s: f64) -> f64 {
        0.5 * s / gamma(1.0 - 0.5 * s)
    }

    /// `(multiplier, residual estimate)` for eigenvalue `lam`.
    pub fn multiplier(&self, lam: f64) -> (f64, f64) {
        let fine = self.raw(lam, &self.fine);
        let coarse = self.raw(lam, &self.coarse);
        let a = 1.0 - 0.5 * self.s;
        let head = lam * self.u_min.exp().powf(a) / a;
        let value = self.normalization * fine;
        (value, self.normalization * ((fine - coarse).abs() + head))
    }
}

/// `Lambda^s f` from `c_s int_0^inf (f - e^{t Delta} f) t^{-1-s/2} dt`.
pub fn lambda_via_heat(f: &SpectralField, s: f64, q: &HeatQuadrature) -> Result<SpectralField> {
    let g = f.geometry();
    let lam = g.eigenvalues();
    let m = g.modes();
    let rep = HeatRepresentation::new(s, lam[[0, 0]], lam[[m - 1, m - 1]], q)?;
    // multipliers depend only on m^2 + n^2
    let mut cache = std::collections::HashMap::new();
    let mut worst = 0.0f64;
    let mut c = f.coeffs().clone();
    for ((a, b), v) in c.indexed_iter_mut() {
        if *v == 0.0 {
            continue;
        }
        let key = (a + 1) * (a + 1) + (b + 1) * (b + 1);
        let (mult, res) = *cache.entry(key).or_insert_with(|| rep.multiplier(lam[[a, b]]));
        worst = worst.max(res / mult);
        *v *= mult;
    }
    if worst > q.tolerance {
        return Err(Error::Numeric(format!(
            "heat-representation quadrature residual {worst:.3e} exceeds tolerance {:.3e}",
            q.tolerance
        )));
    }
    Ok(f.with_coeffs(c))
}

pub(crate) fn same_geometry(a: &Arc<Geometry>, b: &Arc<Geometry>) -> Result<()> {
    if a.same_grid(b) {
        Ok(())
    } else {
        Err(Error::Shape("operands live on different geometries".into()))
    }
}

#[cfg(test)]
mod tests;
