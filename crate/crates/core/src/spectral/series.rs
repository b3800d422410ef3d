//! Separable trigonometric series with a sine or cosine parity per axis.
//!
//! Derivatives of sine series are mixed sine/cosine series, and products of
//! two such series are again finite trigonometric polynomials. Their projection
//! onto the Dirichlet sine basis can therefore be computed exactly: sine-parity
//! axes by a padded sine transform, cosine-parity axes by a padded cosine
//! transform followed by the closed-form cosine-to-sine projection
//! `(2/L) int_0^L cos(k pi x/L) sin(m pi x/L) dx = 4m / (pi (m^2 - k^2))` for odd `m + k`.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2, Axis};

use super::transform::{map_lanes, smooth_size};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Sine,
    Cosine,
}

impl Parity {
    fn product(self, other: Parity) -> Parity {
        if self == other {
            Parity::Cosine
        } else {
            Parity::Sine
        }
    }
}

/// `sum c_{jk} t_j(pi x / L) t_k(pi y / L)` with `t = sin` (index `j` is mode
/// `j + 1`) or `t = cos` (index `j` is mode `j`) per axis.
#[derive(Debug, Clone)]
pub struct TrigSeries {
    parity: [Parity; 2],
    coeffs: Array2<f64>,
    wavenumber: f64,
}

impl TrigSeries {
    pub fn new(parity: [Parity; 2], coeffs: Array2<f64>, wavenumber: f64) -> Self {
        TrigSeries { parity, coeffs, wavenumber }
    }

    pub fn parity(&self) -> [Parity; 2] {
        self.parity
    }

    pub fn coeffs(&self) -> &Array2<f64> {
        &self.coeffs
    }

    /// Highest mode number present along `axis`.
    pub fn max_mode(&self, axis: usize) -> usize {
        let len = self.coeffs.len_of(Axis(axis));
        match self.parity[axis] {
            Parity::Sine => len,
            Parity::Cosine => len.saturating_sub(1),
        }
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.coeffs.mapv_inplace(|v| v * c);
        self
    }

    /// Exact derivative along `axis` (0 = x, 1 = y).
    pub fn derivative(&self, axis: usize) -> TrigSeries {
        let k = self.wavenumber;
        let (rows, cols) = self.coeffs.dim();
        let mut parity = self.parity;
        let coeffs = match (self.parity[axis], axis) {
            (Parity::Sine, 0) => {
                parity[0] = Parity::Cosine;
                Array2::from_shape_fn((rows + 1, cols), |(i, j)| {
                    if i == 0 { 0.0 } else { i as f64 * k * self.coeffs[[i - 1, j]] }
                })
            }
            (Parity::Sine, _) => {
                parity[1] = Parity::Cosine;
                Array2::from_shape_fn((rows, cols + 1), |(i, j)| {
                    if j == 0 { 0.0 } else { j as f64 * k * self.coeffs[[i, j - 1]] }
                })
            }
            (Parity::Cosine, 0) => {
                parity[0] = Parity::Sine;
                Array2::from_shape_fn((rows.saturating_sub(1).max(1), cols), |(i, j)| {
                    if i + 1 < rows { -((i + 1) as f64) * k * self.coeffs[[i + 1, j]] } else { 0.0 }
                })
            }
            (Parity::Cosine, _) => {
                parity[1] = Parity::Sine;
                Array2::from_shape_fn((rows, cols.saturating_sub(1).max(1)), |(i, j)| {
                    if j + 1 < cols { -((j + 1) as f64) * k * self.coeffs[[i, j + 1]] } else { 0.0 }
                })
            }
        };
        TrigSeries { parity, coeffs, wavenumber: k }
    }

    /// Values on the `(mx + 1) x (my + 1)` grid `x_i = i L / mx`, boundary included.
    pub fn synthesize(&self, mx: usize, my: usize) -> Array2<f64> {
        assert!(
            self.max_mode(0) <= mx && self.max_mode(1) <= my,
            "grid too coarse for series"
        );
        let px = self.parity[0];
        let py = self.parity[1];
        let stage = map_lanes(self.coeffs.view(), Axis(0), mx + 1, mx, move |w, lane, out| match px {
            Parity::Sine => w.synth_sine(lane, out),
            Parity::Cosine => w.synth_cos(lane, out),
        });
        map_lanes(stage.view(), Axis(1), my + 1, my, move |w, lane, out| match py {
            Parity::Sine => w.synth_sine(lane, out),
            Parity::Cosine => w.synth_cos(lane, out),
        })
    }

    /// For a sine-sine series `f`, the cosine-cosine series of
    /// `f / (sin(pi x/L) sin(pi y/L))`, using `sin(m t)/sin(t) = U_{m-1}(cos t)`.
    pub fn divide_by_fundamental(&self) -> TrigSeries {
        assert_eq!(self.parity, [Parity::Sine, Parity::Sine]);
        let stage = divide_lanes(self.coeffs.view(), Axis(0));
        let coeffs = divide_lanes(stage.view(), Axis(1));
        TrigSeries { parity: [Parity::Cosine, Parity::Cosine], coeffs, wavenumber: self.wavenumber }
    }
}

fn divide_lanes(input: ArrayView2<f64>, axis: Axis) -> Array2<f64> {
    // sin(m t)/sin t carries cos(k t) for k = m-1, m-3, ... >= 0, weight 2 (1 for k = 0)
    let len = input.len_of(axis);
    let mut out = Array2::<f64>::zeros(input.raw_dim());
    for (lane_in, mut lane_out) in input.lanes(axis).into_iter().zip(out.lanes_mut(axis)) {
        let mut suffix = [0.0f64; 2];
        for k in (0..len).rev() {
            // s index k is mode k+1, contributing to cos mode k
            suffix[k % 2] += lane_in[k];
            lane_out[k] = if k == 0 { suffix[0] } else { 2.0 * suffix[k % 2] };
        }
    }
    out
}

/// Padded grid size per axis for an exact projection onto `out_modes` sine modes
/// of a product with the given parity and degree.
fn padded_size(parity: Parity, degree: usize, out_modes: usize) -> usize {
    match parity {
        // retained modes must not receive aliases of modes up to `degree`
        Parity::Sine => smooth_size((out_modes + 1).max((degree + out_modes + 2) / 2)),
        // every cosine coefficient up to `degree` is needed exactly
        Parity::Cosine => smooth_size(degree.max(out_modes + 1).max(1)),
    }
}

/// Cosine-to-sine projection matrix, `out_modes x (degree + 1)`.
fn cos_to_sine(out_modes: usize, degree: usize) -> Array2<f64> {
    Array2::from_shape_fn((out_modes, degree + 1), |(a, k)| {
        let m = a + 1;
        if (m + k) % 2 == 1 {
            let (mf, kf) = (m as f64, k as f64);
            4.0 * mf / (PI * (mf * mf - kf * kf))
        } else {
            0.0
        }
    })
}

/// Plain sine-sine coefficients (`out_modes` per axis) of `sum_i f_i g_i`, exact
/// for the retained modes.
pub fn project_products(pairs: &[(&TrigSeries, &TrigSeries)], out_modes: usize) -> Array2<f64> {
    assert!(!pairs.is_empty());
    let parity = [
        pairs[0].0.parity[0].product(pairs[0].1.parity[0]),
        pairs[0].0.parity[1].product(pairs[0].1.parity[1]),
    ];
    let mut degree = [0usize; 2];
    for (f, g) in pairs {
        for ax in 0..2 {
            assert_eq!(f.parity[ax].product(g.parity[ax]), parity[ax], "mixed product parities");
            degree[ax] = degree[ax].max(f.max_mode(ax) + g.max_mode(ax));
        }
    }
    let mx = padded_size(parity[0], degree[0], out_modes);
    let my = padded_size(parity[1], degree[1], out_modes);

    let mut values: Option<Array2<f64>> = None;
    for (f, g) in pairs {
        let fv = f.synthesize(mx, my);
        let gv = g.synthesize(mx, my);
        match values.as_mut() {
            None => values = Some(fv * gv),
            Some(acc) => ndarray::Zip::from(acc).and(&fv).and(&gv).for_each(|a, x, y| *a += x * y),
        }
    }
    let values = values.expect("at least one pair");
    let stage = project_axis(values.view(), Axis(0), parity[0], degree[0], mx, out_modes);
    project_axis(stage.view(), Axis(1), parity[1], degree[1], my, out_modes)
}

/// Plain sine coefficients along `axis` from nodal values on a grid of `m` intervals.
pub(crate) fn project_axis(
    values: ArrayView2<f64>,
    axis: Axis,
    parity: Parity,
    degree: usize,
    m: usize,
    out_modes: usize,
) -> Array2<f64> {
    match parity {
        Parity::Sine => map_lanes(values, axis, out_modes, m, |w, lane, out| w.analyze_sine(lane, out)),
        Parity::Cosine => {
            let cos = map_lanes(values, axis, degree + 1, m, |w, lane, out| w.analyze_cos(lane, out));
            let t = cos_to_sine(out_modes, degree);
            if axis == Axis(0) {
                t.dot(&cos)
            } else {
                cos.dot(&t.t())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(parity: [Parity; 2], coeffs: Array2<f64>) -> TrigSeries {
        TrigSeries::new(parity, coeffs, 1.0)
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let mut c = Array2::zeros((3, 2));
        c[[2, 1]] = 1.5; // 1.5 sin(3x) sin(2y)
        let s = series([Parity::Sine, Parity::Sine], c);
        let dx = s.derivative(0);
        assert_eq!(dx.parity(), [Parity::Cosine, Parity::Sine]);
        assert_eq!(dx.coeffs()[[3, 1]], 4.5);
        let dxx = dx.derivative(0);
        assert_eq!(dxx.parity(), [Parity::Sine, Parity::Sine]);
        assert_eq!(dxx.coeffs()[[2, 1]], -13.5);
    }

    #[test]
    fn division_by_fundamental_matches_pointwise() {
        let mut c = Array2::zeros((5, 4));
        c[[0, 0]] = 1.0;
        c[[3, 1]] = -0.7;
        c[[4, 3]] = 0.25;
        c[[2, 2]] = 0.1;
        let s = series([Parity::Sine, Parity::Sine], c);
        let b = s.divide_by_fundamental();
        let m = 16;
        let sv = s.synthesize(m, m);
        let bv = b.synthesize(m, m);
        for i in 1..m {
            for j in 1..m {
                let x = PI * i as f64 / m as f64;
                let y = PI * j as f64 / m as f64;
                let expect = sv[[i, j]] / (x.sin() * y.sin());
                assert!((bv[[i, j]] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_product_projection_matches_quadrature() {
        // sin(x) sin(y) squared: x-profile sin^2 has sine coefficients
        // -16 / (pi m (m^2 - 4)) for odd m (exact integrals).
        let mut c = Array2::zeros((1, 1));
        c[[0, 0]] = 1.0;
        let s = series([Parity::Sine, Parity::Sine], c);
        let p = project_products(&[(&s, &s)], 7);
        let prof = |m: usize| {
            if m % 2 == 1 {
                let mf = m as f64;
                -16.0 / (PI * mf * (mf * mf - 4.0)) / 2.0
            } else {
                0.0
            }
        };
        for a in 0..7 {
            for b in 0..7 {
                let expect = prof(a + 1) * prof(b + 1);
                assert!((p[[a, b]] - expect).abs() < 1e-13, "{a} {b}");
            }
        }
    }
}
