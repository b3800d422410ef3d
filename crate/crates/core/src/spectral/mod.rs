//! Fields on the Dirichlet square: eigen-coefficients, interior samples, and
//! transforms between them.

mod series;
mod transform;

use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{Error, Result};
use crate::geometry::Geometry;

pub use series::{project_products, Parity, TrigSeries};
pub(crate) use series::project_axis;

/// A scalar field as orthonormal eigen-coefficients `a_{m,n} = <f, w_{m,n}>`,
/// stored at `[m - 1, n - 1]`.
#[derive(Debug, Clone)]
pub struct SpectralField {
    geometry: Arc<Geometry>,
    coeffs: Array2<f64>,
    tag: &'static str,
}

/// Samples at the interior collocation nodes, `[i - 1, j - 1]` for node `(i, j)`.
/// Values on the boundary are zero by construction.
#[derive(Debug, Clone)]
pub struct GridField {
    geometry: Arc<Geometry>,
    values: Array2<f64>,
}

/// Samples on the full `(N + 1) x (N + 1)` node set, boundary included.
#[derive(Debug, Clone)]
pub struct NodalField {
    geometry: Arc<Geometry>,
    values: Array2<f64>,
}

fn check_finite(values: &Array2<f64>, what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite value in {what}")))
    }
}

impl SpectralField {
    pub fn zeros(geometry: &Arc<Geometry>) -> Self {
        let m = geometry.modes();
        SpectralField { geometry: geometry.clone(), coeffs: Array2::zeros((m, m)), tag: "" }
    }

    pub fn from_coeffs(geometry: &Arc<Geometry>, coeffs: Array2<f64>) -> Result<Self> {
        let m = geometry.modes();
        if coeffs.dim() != (m, m) {
            return Err(Error::Shape(format!("expected {m}x{m} coefficients, got {:?}", coeffs.dim())));
        }
        check_finite(&coeffs, "spectral coefficients")?;
        Ok(SpectralField { geometry: geometry.clone(), coeffs, tag: "" })
    }

    /// Single eigenmode `amplitude * w_{m,n}`.
    pub fn mode(geometry: &Arc<Geometry>, m: usize, n: usize, amplitude: f64) -> Result<Self> {
        let modes = geometry.modes();
        if m == 0 || n == 0 || m > modes || n > modes {
            return Err(Error::Config(format!("mode ({m},{n}) outside 1..={modes}")));
        }
        let mut f = Self::zeros(geometry);
        f.coeffs[[m - 1, n - 1]] = amplitude;
        Ok(f)
    }

    /// Sum of `(m, n, amplitude)` eigenmodes.
    pub fn from_modes(geometry: &Arc<Geometry>, modes: &[(usize, usize, f64)]) -> Result<Self> {
        let mut f = Self::zeros(geometry);
        for &(m, n, a) in modes {
            f = f.add(&Self::mode(geometry, m, n, a)?)?;
        }
        Ok(f)
    }

    pub fn with_tag(mut self, tag: &'static str) -> Self {
        self.tag = tag;
        self
    }

    pub fn tag(&self) -> &'static str {
        self.tag
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geometry
    }

    pub fn coeffs(&self) -> &Array2<f64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array2<f64> {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Array2<f64> {
        self.coeffs
    }

    /// Same geometry, new coefficients.
    pub(crate) fn with_coeffs(&self, coeffs: Array2<f64>) -> Self {
        SpectralField { geometry: self.geometry.clone(), coeffs, tag: self.tag }
    }

    /// Coefficient-wise multiplier `a_{m,n} -> g(m, n) a_{m,n}` (1-based mode numbers).
    pub fn map_modes(&self, g: impl Fn(usize, usize) -> f64) -> Self {
        let mut c = self.coeffs.clone();
        c.indexed_iter_mut().for_each(|((a, b), v)| *v *= g(a + 1, b + 1));
        self.with_coeffs(c)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.with_coeffs(&self.coeffs * c)
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.with_coeffs(&self.coeffs + &other.coeffs))
    }

    pub fn sub(&self, other: &SpectralField) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.with_coeffs(&self.coeffs - &other.coeffs))
    }

    pub(crate) fn check_same(&self, other: &SpectralField) -> Result<()> {
        if self.geometry.same_grid(&other.geometry) {
            Ok(())
        } else {
            Err(Error::Shape("fields live on different geometries".into()))
        }
    }

    /// `||f||_{L^2}^2 = sum a^2` (Parseval).
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Plain-normalized sine-sine series of this field.
    pub fn series(&self) -> TrigSeries {
        let g = &self.geometry;
        TrigSeries::new(
            [Parity::Sine, Parity::Sine],
            &self.coeffs * (2.0 / g.side()),
            g.wavenumber(),
        )
    }

    /// Interior grid samples; exact inverse of [`GridField::forward`].
    pub fn inverse(&self) -> GridField {
        let n = self.geometry.n();
        let full = self.series().synthesize(n, n);
        GridField { geometry: self.geometry.clone(), values: full.slice(s![1..n, 1..n]).to_owned() }
    }

    /// Samples on the full node set, boundary included.
    pub fn nodal(&self) -> NodalField {
        let n = self.geometry.n();
        NodalField { geometry: self.geometry.clone(), values: self.series().synthesize(n, n) }
    }

    /// Samples on the grid refined `factor` times, boundary included.
    pub fn sample_refined(&self, factor: usize) -> Array2<f64> {
        let m = self.geometry.n() * factor;
        self.series().synthesize(m, m)
    }

    /// `(d/dx f, d/dy f)` at interior nodes.
    pub fn gradient(&self) -> (GridField, GridField) {
        let n = self.geometry.n();
        let s = self.series();
        let pick = |t: TrigSeries| GridField {
            geometry: self.geometry.clone(),
            values: t.synthesize(n, n).slice(s![1..n, 1..n]).to_owned(),
        };
        (pick(s.derivative(0)), pick(s.derivative(1)))
    }

    /// `(d/dx f, d/dy f)` on the full node set.
    pub fn gradient_nodal(&self) -> (NodalField, NodalField) {
        let n = self.geometry.n();
        let s = self.series();
        let pick = |t: TrigSeries| NodalField { geometry: self.geometry.clone(), values: t.synthesize(n, n) };
        (pick(s.derivative(0)), pick(s.derivative(1)))
    }

    /// Projection of `f g` onto the retained modes, free of aliasing.
    pub fn dealiased_product(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_same(other)?;
        let m = self.geometry.modes();
        let plain = project_products(&[(&self.series(), &other.series())], m);
        Ok(self.with_coeffs(plain * (self.geometry.side() / 2.0)))
    }

    /// Projection of `f g` onto `modes` sine modes per axis, returned as
    /// orthonormal coefficients (not restricted to this field's geometry).
    pub fn product_coeffs(&self, other: &SpectralField, modes: usize) -> Result<Array2<f64>> {
        self.check_same(other)?;
        let plain = project_products(&[(&self.series(), &other.series())], modes);
        Ok(plain * (self.geometry.side() / 2.0))
    }

    /// Evaluates the series at an arbitrary point.
    pub fn eval_at(&self, x: [f64; 2]) -> f64 {
        let k = self.geometry.wavenumber();
        let m = self.geometry.modes();
        let sx: Vec<f64> = (1..=m).map(|i| (i as f64 * k * x[0]).sin()).collect();
        let sy: Vec<f64> = (1..=m).map(|j| (j as f64 * k * x[1]).sin()).collect();
        let mut acc = 0.0;
        for (a, row) in self.coeffs.axis_iter(Axis(0)).enumerate() {
            let inner: f64 = row.iter().zip(&sy).map(|(c, s)| c * s).sum();
            acc += sx[a] * inner;
        }
        acc * 2.0 / self.geometry.side()
    }
}

impl GridField {
    pub fn new(geometry: &Arc<Geometry>, values: Array2<f64>) -> Result<Self> {
        let m = geometry.modes();
        if values.dim() != (m, m) {
            return Err(Error::Shape(format!("expected {m}x{m} interior samples, got {:?}", values.dim())));
        }
        Ok(GridField { geometry: geometry.clone(), values })
    }

    pub fn zeros(geometry: &Arc<Geometry>) -> Self {
        let m = geometry.modes();
        GridField { geometry: geometry.clone(), values: Array2::zeros((m, m)) }
    }

    /// Samples a function at interior nodes.
    pub fn from_fn(geometry: &Arc<Geometry>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let m = geometry.modes();
        let values = Array2::from_shape_fn((m, m), |(a, b)| f(geometry.node(a, b)));
        GridField { geometry: geometry.clone(), values }
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geometry
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField { geometry: self.geometry.clone(), values: self.values.mapv(f) }
    }

    pub fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        if !self.geometry.same_grid(&other.geometry) {
            return Err(Error::Shape("grid fields live on different geometries".into()));
        }
        let mut values = self.values.clone();
        Zip::from(&mut values).and(&other.values).for_each(|a, b| *a = f(*a, *b));
        Ok(GridField { geometry: self.geometry.clone(), values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Discrete eigen-coefficients `a_{m,n} = h^2 sum f(x_ij) w_{m,n}(x_ij)`.
    pub fn forward(&self) -> Result<SpectralField> {
        check_finite(&self.values, "grid field")?;
        let g = &self.geometry;
        let n = g.n();
        let modes = g.modes();
        let mut padded = Array2::<f64>::zeros((n + 1, n + 1));
        padded.slice_mut(s![1..n, 1..n]).assign(&self.values);
        let stage = project_axis(padded.view(), Axis(0), Parity::Sine, 0, n, modes);
        let plain = project_axis(stage.view(), Axis(1), Parity::Sine, 0, n, modes);
        SpectralField::from_coeffs(g, plain * (g.side() / 2.0))
    }
}

impl NodalField {
    pub fn new(geometry: &Arc<Geometry>, values: Array2<f64>) -> Result<Self> {
        let n = geometry.n();
        if values.dim() != (n + 1, n + 1) {
            return Err(Error::Shape(format!("expected {0}x{0} nodal samples", n + 1)));
        }
        Ok(NodalField { geometry: geometry.clone(), values })
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geometry
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Interior samples as a [`GridField`].
    pub fn interior(&self) -> GridField {
        let n = self.geometry.n();
        GridField { geometry: self.geometry.clone(), values: self.values.slice(s![1..n, 1..n]).to_owned() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Trapezoidal-rule integral of `g(value)` over the square.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        trapezoid(&self.values, self.geometry.spacing(), g)
    }
}

/// Tensor trapezoid rule over a `(m + 1)^2` nodal array with spacing `h`.
pub fn trapezoid(values: &Array2<f64>, h: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (r, c) = values.dim();
    let mut acc = 0.0;
    for ((i, j), v) in values.indexed_iter() {
        let wi = if i == 0 || i + 1 == r { 0.5 } else { 1.0 };
        let wj = if j == 0 || j + 1 == c { 0.5 } else { 1.0 };
        acc += wi * wj * g(*v);
    }
    acc * h * h
}
