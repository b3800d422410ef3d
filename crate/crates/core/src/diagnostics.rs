//! Regularity functionals of a solution: norms, the boundary ratio `b_1 = theta / w_1`,
//! the interior Lipschitz functional `M`, localized Holder quotients and the normal
//! velocity rate.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use ndarray::{s, Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::operators::{heat_semigroup, riesz_velocity, VelocityField};
use crate::regression::{fit_line, LineFit};
use crate::spectral::{GridField, NodalField, SpectralField};

/// Spatial dimension.
pub const DIM: f64 = 2.0;

/// Which functionals a record carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsParams {
    /// Exponents `p` for `||b_1||_{L^p}`; `f64::INFINITY` is written as `inf`.
    pub p_values: Vec<f64>,
    /// Powers `m` for `(int w_1 b_1^{2m})^{1/2m}`.
    pub m_values: Vec<u32>,
    /// Holder exponents.
    pub alphas: Vec<f64>,
    /// Number of dyadic shift magnitudes in the Holder sup.
    pub holder_levels: usize,
    /// Whether to fit the normal-velocity shell slope.
    pub normal_rate: bool,
}

impl Default for DiagnosticsParams {
    fn default() -> Self {
        DiagnosticsParams {
            p_values: vec![4.0, f64::INFINITY],
            m_values: vec![2],
            alphas: vec![0.4],
            holder_levels: 4,
            normal_rate: true,
        }
    }
}

/// One time slice of all functionals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub sup_norm: f64,
    pub energy: f64,
    pub half_norm: f64,
    pub lipschitz_m: f64,
    pub b1_lp: BTreeMap<String, f64>,
    pub weighted_norm: BTreeMap<u32, f64>,
    pub holder: BTreeMap<String, f64>,
    pub u_sup: f64,
    pub normal_rate: Option<f64>,
}

/// Key used for an exponent in record maps and CSV headers.
pub fn exponent_key(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

/// `b_1 = theta / w_1` at interior nodes, from the exact quotient series.
pub fn boundary_ratio(theta: &SpectralField) -> GridField {
    let g = theta.geometry();
    let n = g.n();
    let full = boundary_ratio_nodal(theta);
    GridField::new(g, full.values().slice(s![1..n, 1..n]).to_owned()).expect("interior shape")
}

/// `b_1` on the full node set; on the boundary it is the limit of the quotient.
pub fn boundary_ratio_nodal(theta: &SpectralField) -> NodalField {
    let g = theta.geometry();
    let n = g.n();
    let values = theta.series().divide_by_fundamental().scaled(0.5 * g.side()).synthesize(n, n);
    NodalField::new(g, values).expect("nodal shape")
}

/// `||b_1||_{L^p}` by the trapezoidal rule on the full node set (`p = inf` is the max).
pub fn b1_lp_norm(b1: &NodalField, p: f64) -> f64 {
    if p.is_infinite() {
        b1.max_abs()
    } else {
        b1.integrate(|v| v.abs().powf(p)).powf(1.0 / p)
    }
}

/// `(int w_1 b_1^{2m})^{1/2m}`, with quadrature weights exact for `w_1` times a cosine
/// polynomial of degree `N` in each variable.
pub fn weighted_norm(b1: &NodalField, m: u32) -> f64 {
    let g = b1.geometry();
    let w = sine_weights(g.n());
    let scale = (2.0 / g.side()) * (g.side() / PI).powi(2);
    let mut acc = 0.0;
    for ((i, j), v) in b1.values().indexed_iter() {
        acc += w[i] * w[j] * v.powi(2 * m as i32);
    }
    (scale * acc).powf(1.0 / (2.0 * m as f64))
}

/// Weights `W_i` with `int_0^pi sin(x) g(x) dx = sum W_i g(i pi / N)` for cosine polynomials `g`
/// of degree at most `N`.
pub fn sine_weights(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let half = |k: usize| if k == 0 || k == n { 0.5 } else { 1.0 };
    // int_0^pi sin x cos kx dx
    let moment = |k: usize| if k == 1 { 0.0 } else { (1.0 + (PI * k as f64).cos().round()) / (1.0 - (k * k) as f64) };
    (0..=n)
        .map(|i| {
            let s: f64 = (0..=n)
                .map(|k| half(k) * moment(k) * (PI * ((k * i) % (2 * n)) as f64 / nf).cos())
                .sum();
            half(i) * 2.0 / nf * s
        })
        .collect()
}

/// `M = max d(x) |grad theta(x)|` over interior nodes.
pub fn interior_lipschitz(theta: &SpectralField) -> f64 {
    let (gx, gy) = theta.gradient();
    let d = theta.geometry().distance();
    let mut m = 0.0f64;
    Zip::from(gx.values()).and(gy.values()).and(d).for_each(|a, b, d| m = m.max(d * a.hypot(*b)));
    m
}

/// Localized Holder quotient and the number of nodes without an admissible shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderValue {
    pub value: f64,
    pub skipped: usize,
}

const DIRECTIONS: [[isize; 2]; 8] = [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]];

/// `sup |delta_h theta(x)| / |h|^alpha` over interior nodes and shifts `h = 2^k dx e`
/// (`k < levels`, `e` an axis or diagonal direction) with `|h| <= d(x) / 32`.
pub fn holder_seminorm(theta: &SpectralField, alpha: f64, levels: usize) -> Result<HolderValue> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("Holder exponent must lie in (0, 1), got {alpha}")));
    }
    let g = theta.geometry();
    let v = theta.nodal();
    Ok(holder_on_nodes(g, v.values(), alpha, levels, |x| g.distance_at(x) / 32.0))
}

fn holder_on_nodes(
    g: &Geometry,
    v: &Array2<f64>,
    alpha: f64,
    levels: usize,
    reach: impl Fn([f64; 2]) -> f64 + Sync,
) -> HolderValue {
    use rayon::prelude::*;
    let n = g.n();
    let dx = g.spacing();
    let rows: Vec<(f64, usize)> = (1..n)
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0f64;
            let mut skipped = 0;
            for j in 1..n {
                let x = [g.coord(i), g.coord(j)];
                let budget = reach(x);
                let mut any = false;
                for k in 0..levels {
                    let step = 1isize << k;
                    for dir in DIRECTIONS {
                        let len = dx * step as f64 * ((dir[0] * dir[0] + dir[1] * dir[1]) as f64).sqrt();
                        if len > budget * (1.0 + 1e-12) {
                            continue;
                        }
                        let (si, sj) = (i as isize + dir[0] * step, j as isize + dir[1] * step);
                        if si < 0 || sj < 0 || si > n as isize || sj > n as isize {
                            continue;
                        }
                        any = true;
                        let q = (v[[si as usize, sj as usize]] - v[[i, j]]).abs() / len.powf(alpha);
                        best = best.max(q);
                    }
                }
                if !any {
                    skipped += 1;
                }
            }
            (best, skipped)
        })
        .collect();
    // fixed-order reduction
    let value = rows.iter().fold(0.0f64, |m, r| m.max(r.0));
    let skipped = rows.iter().map(|r| r.1).sum();
    HolderValue { value, skipped }
}

/// Global Holder quotient over dyadic shifts up to `2^{levels-1} dx`, used for `||theta||_{C^alpha}`.
pub fn global_holder(theta: &SpectralField, alpha: f64, levels: usize) -> f64 {
    let g = theta.geometry();
    let v = theta.nodal();
    holder_on_nodes(g, v.values(), alpha, levels, |_| f64::INFINITY).value
}

/// Smoothed distance `g = e^{eps Delta} d`; `grad g` serves as the normal field and
/// `grad^perp g` as a tangential, divergence-free field.
#[derive(Debug, Clone)]
pub struct NormalFrame {
    pub smoothed_distance: SpectralField,
    pub eps: f64,
    /// `grad g` on the node set.
    pub normal: [Array2<f64>; 2],
    pub tangent_sup: f64,
    pub tangent_grad_sup: f64,
    /// Max `|T . n|` on the boundary nodes (zero up to rounding).
    pub tangency_defect: f64,
}

impl NormalFrame {
    pub fn new(geometry: &Arc<Geometry>, eps: f64) -> Result<Self> {
        let d = GridField::new(geometry, geometry.distance().clone())?.forward()?;
        let g = heat_semigroup(&d, eps)?;
        let (nx, ny) = g.gradient_nodal();
        let s = g.series();
        let n = geometry.n();
        let hxx = s.derivative(0).derivative(0).synthesize(n, n);
        let hxy = s.derivative(0).derivative(1).synthesize(n, n);
        let hyy = s.derivative(1).derivative(1).synthesize(n, n);
        let mut tangent_sup = 0.0f64;
        Zip::from(nx.values()).and(ny.values()).for_each(|a, b| tangent_sup = tangent_sup.max(a.hypot(*b)));
        let mut tangent_grad_sup = 0.0f64;
        Zip::from(&hxx).and(&hxy).and(&hyy).for_each(|a, b, c| {
            tangent_grad_sup = tangent_grad_sup.max((a * a + 2.0 * b * b + c * c).sqrt());
        });
        // T = (-g_y, g_x); its normal trace is -g_y on x-sides and g_x on y-sides
        let nxv = nx.values();
        let nyv = ny.values();
        let tangency_defect = (0..=n)
            .flat_map(|k| [nyv[[0, k]], nyv[[n, k]], nxv[[k, 0]], nxv[[k, n]]])
            .fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(NormalFrame {
            smoothed_distance: g,
            eps,
            normal: [nxv.clone(), nyv.clone()],
            tangent_sup,
            tangent_grad_sup,
            tangency_defect,
        })
    }

    /// Default smoothing `eps = (2 dx)^2`.
    pub fn default_for(geometry: &Arc<Geometry>) -> Result<Self> {
        let dx = geometry.spacing();
        Self::new(geometry, 4.0 * dx * dx)
    }

    /// `u . N` on the node set.
    pub fn normal_component(&self, u: &VelocityField) -> Array2<f64> {
        let mut out = u.ux() * &self.normal[0];
        Zip::from(&mut out).and(u.uy()).and(&self.normal[1]).for_each(|o, v, n| *o += v * n);
        out
    }
}

/// One dyadic distance shell.
#[derive(Debug, Clone, Serialize)]
pub struct Shell {
    pub d_lo: f64,
    pub d_hi: f64,
    /// Geometric midpoint of the shell.
    pub d: f64,
    pub nodes: usize,
    pub sup: f64,
}

/// Nodes whose nearest side is unique (second distance at least twice the first),
/// unmasked, with `d` in `[d_lo, d_hi)`.
pub fn side_shell_nodes(geometry: &Geometry, d_lo: f64, d_hi: f64) -> Vec<(usize, usize)> {
    let n = geometry.n();
    let side = geometry.side();
    let mut out = Vec::new();
    for i in 1..n {
        for j in 1..n {
            let x = [geometry.coord(i), geometry.coord(j)];
            let mut ds = [x[0], side - x[0], x[1], side - x[1]];
            ds.sort_by(f64::total_cmp);
            let d = ds[0];
            if d < d_lo * (1.0 - 1e-12) || d >= d_hi * (1.0 - 1e-12) {
                continue;
            }
            if ds[1] < 2.0 * d || geometry.is_masked_at(x) {
                continue;
            }
            out.push((i, j));
        }
    }
    out
}

/// Sup of `|values|` over dyadic shells `[2^k d0, 2^{k+1} d0)`, `k < count`.
pub fn shell_sups(geometry: &Geometry, values: &Array2<f64>, d0: f64, count: usize) -> Vec<Shell> {
    (0..count)
        .map(|k| {
            let d_lo = d0 * 2f64.powi(k as i32);
            let d_hi = 2.0 * d_lo;
            let nodes = side_shell_nodes(geometry, d_lo, d_hi);
            let sup = nodes.iter().fold(0.0f64, |m, &(i, j)| m.max(values[[i, j]].abs()));
            Shell { d_lo, d_hi, d: (d_lo * d_hi).sqrt(), nodes: nodes.len(), sup }
        })
        .collect()
}

/// Slope of `log sup_shell |u . N|` against `log d` over four shells starting at one spacing.
pub fn normal_velocity_rate(u: &VelocityField, frame: &NormalFrame) -> Option<LineFit> {
    let g = u.geometry();
    let un = frame.normal_component(u);
    let shells = shell_sups(g, &un, g.spacing(), 4);
    let pts: Vec<(f64, f64)> = shells.iter().filter(|s| s.sup > 0.0).map(|s| (s.d.ln(), s.sup.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    fit_line(&pts)
}

/// Fills every field of a record for `theta` at time `t`.
pub fn record(theta: &SpectralField, t: f64, params: &DiagnosticsParams) -> Result<DiagnosticsRecord> {
    let g = theta.geometry();
    let v = theta.inverse();
    let sup_norm = theta.nodal().max_abs().max(v.max_abs());
    let energy = theta.energy();
    let half_norm: f64 = theta.coeffs().iter().zip(g.sqrt_eigenvalues().iter()).map(|(a, l)| l * a * a).sum();
    let b1 = boundary_ratio_nodal(theta);
    let b1_lp = params.p_values.iter().map(|p| (exponent_key(*p), b1_lp_norm(&b1, *p))).collect();
    let weighted = params.m_values.iter().map(|m| (*m, weighted_norm(&b1, *m))).collect();
    let mut holder = BTreeMap::new();
    for a in &params.alphas {
        holder.insert(exponent_key(*a), holder_seminorm(theta, *a, params.holder_levels)?.value);
    }
    let u = riesz_velocity(theta);
    let normal_rate = if params.normal_rate && theta.max_abs_coeff() > 0.0 {
        let frame = NormalFrame::default_for(g)?;
        normal_velocity_rate(&u, &frame).map(|f| f.slope)
    } else {
        None
    };
    Ok(DiagnosticsRecord {
        t,
        sup_norm,
        energy,
        half_norm,
        lipschitz_m: interior_lipschitz(theta),
        b1_lp,
        weighted_norm: weighted,
        holder,
        u_sup: u.sup_norm(),
        normal_rate,
    })
}

impl DiagnosticsRecord {
    /// Column names with units, in the fixed order used by [`DiagnosticsRecord::row`].
    pub fn header(params: &DiagnosticsParams) -> Vec<String> {
        let mut h = vec![
            "t [time]".to_string(),
            "sup_norm [theta]".to_string(),
            "energy [theta^2 length^2]".to_string(),
            "half_norm [theta^2 length]".to_string(),
            "lipschitz_m [theta]".to_string(),
        ];
        for p in &params.p_values {
            h.push(format!("b1_l{} [theta length^(2/p)]", exponent_key(*p)));
        }
        for m in &params.m_values {
            h.push(format!("weighted_norm_m{m} [theta]"));
        }
        for a in &params.alphas {
            h.push(format!("holder_a{} [theta length^-alpha]", exponent_key(*a)));
        }
        h.push("u_sup [theta]".to_string());
        h.push("normal_rate [1]".to_string());
        h
    }

    /// Values in header order; floats use the shortest round-trip representation.
    pub fn row(&self) -> Vec<String> {
        let mut r = vec![
            self.t.to_string(),
            self.sup_norm.to_string(),
            self.energy.to_string(),
            self.half_norm.to_string(),
            self.lipschitz_m.to_string(),
        ];
        r.extend(self.b1_lp.values().map(|v| v.to_string()));
        r.extend(self.weighted_norm.values().map(|v| v.to_string()));
        r.extend(self.holder.values().map(|v| v.to_string()));
        r.push(self.u_sup.to_string());
        r.push(self.normal_rate.map(|v| v.to_string()).unwrap_or_default());
        r
    }

    pub fn is_finite(&self) -> bool {
        [self.sup_norm, self.energy, self.half_norm, self.lipschitz_m, self.u_sup].iter().all(|v| v.is_finite())
            && self.b1_lp.values().chain(self.weighted_norm.values()).chain(self.holder.values()).all(|v| v.is_finite())
    }
}

/// CSV writer for records: a comment line with the seed, then the header with units.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut out: W, params: &DiagnosticsParams, seed: u64) -> Result<Self> {
        writeln!(out, "# seed={seed}")?;
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(DiagnosticsRecord::header(params))?;
        Ok(RecordWriter { inner })
    }

    pub fn write(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        self.inner.write_record(rec.row())?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Result of the Holder persistence monitor over a run.
#[derive(Debug, Clone, Serialize)]
pub struct HolderMonitor {
    pub alpha: f64,
    pub p: f64,
    /// `sup_t ||b_1||_{L^p}`.
    pub b: f64,
    /// `sup_t M(t)`.
    pub m: f64,
    pub initial: f64,
    pub k_fit: f64,
    /// Times at which the record exceeded the bound.
    pub violations: Vec<f64>,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Checks `holder(t) <= 2 holder(0) + K B (M + 1)` with `K` fitted on records with
/// `t <= fit_fraction * t_end`.
pub fn holder_monitor(records: &[DiagnosticsRecord], alpha: f64, p: f64, fit_fraction: f64) -> Result<HolderMonitor> {
    let ak = exponent_key(alpha);
    let pk = exponent_key(p);
    let first = records.first().ok_or_else(|| Error::Config("holder monitor needs records".into()))?;
    let get = |r: &DiagnosticsRecord, map: &BTreeMap<String, f64>, k: &str| -> Result<f64> {
        map.get(k).copied().ok_or_else(|| Error::Config(format!("record at t={} lacks key {k}", r.t)))
    };
    let mut b = 0.0f64;
    let mut m = 0.0f64;
    for r in records {
        b = b.max(get(r, &r.b1_lp, &pk)?);
        m = m.max(r.lipschitz_m);
    }
    let initial = get(first, &first.holder, &ak)?;
    let t_end = records.last().map(|r| r.t).unwrap_or(0.0);
    let scale = b * (m + 1.0);
    let mut k_fit = 0.0f64;
    for r in records.iter().filter(|r| r.t <= fit_fraction * t_end) {
        if scale > 0.0 {
            k_fit = k_fit.max((get(r, &r.holder, &ak)? - 2.0 * initial) / scale);
        }
    }
    let bound = 2.0 * initial + k_fit * scale;
    let mut violations = Vec::new();
    let mut max_ratio = 0.0f64;
    for r in records.iter().filter(|r| r.t > fit_fraction * t_end) {
        let v = get(r, &r.holder, &ak)?;
        if bound > 0.0 {
            max_ratio = max_ratio.max(v / bound);
        }
        if v > bound * (1.0 + 1e-12) {
            violations.push(r.t);
        }
    }
    Ok(HolderMonitor { alpha, p, b, m, initial, k_fit, pass: violations.is_empty(), violations, max_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n: usize) -> Arc<Geometry> {
        Geometry::with_default_mask(n, PI).unwrap()
    }

    #[test]
    fn ratio_of_ground_state_is_one() {
        let g = geom(32);
        let w = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let b = boundary_ratio_nodal(&w);
        assert!(b.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
        for p in [1.0, 3.0, 4.0] {
            let expect = (PI * PI).powf(1.0 / p);
            assert!((b1_lp_norm(&b, p) - expect).abs() < 1e-12 * expect);
        }
        assert!((weighted_norm(&b, 1).powi(2) - 8.0 / PI).abs() < 1e-12);
        assert!((weighted_norm(&b, 3).powi(6) - 8.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn ratio_of_second_mode_vanishes_at_center() {
        let g = geom(32);
        let th = SpectralField::mode(&g, 1, 2, 1.0).unwrap();
        let b = boundary_ratio(&th);
        // node 16 is the centre; b = 2 cos y
        assert!(b.values()[[15, 15]].abs() < 1e-13);
        let [x, y] = g.node(3, 7);
        let _ = x;
        assert!((b.values()[[3, 7]] - 2.0 * y.cos()).abs() < 1e-13);
    }

    #[test]
    fn sine_weights_integrate_cosines() {
        let w = sine_weights(16);
        for k in 0..=16usize {
            let got: f64 = w.iter().enumerate().map(|(i, wi)| wi * (k as f64 * PI * i as f64 / 16.0).cos()).sum();
            let expect = if k % 2 == 1 { 0.0 } else { 2.0 / (1.0 - (k * k) as f64) };
            assert!((got - expect).abs() < 1e-13, "{k} {got} {expect}");
        }
    }

    #[test]
    fn weighted_norm_of_product_mode() {
        // theta = w_12: b = 2 cos y, int w_1 b^4 = (2/pi) 2 int sin y 16 cos^4 y dy = (2/pi) 2 (32/5)
        let g = geom(32);
        let b = boundary_ratio_nodal(&SpectralField::mode(&g, 1, 2, 1.0).unwrap());
        let expect = 2.0 / PI * 2.0 * 32.0 / 5.0;
        assert!((weighted_norm(&b, 2).powi(4) - expect).abs() < 1e-11);
    }

    #[test]
    fn lipschitz_functional() {
        let g = geom(32);
        assert_eq!(interior_lipschitz(&SpectralField::zeros(&g)), 0.0);
        let w = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let m1 = interior_lipschitz(&w);
        assert!((interior_lipschitz(&w.scale(-3.0)) - 3.0 * m1).abs() < 1e-13);
        let fine = geom(64);
        let m2 = interior_lipschitz(&SpectralField::mode(&fine, 1, 1, 1.0).unwrap());
        assert!(((m2 - m1) / m2).abs() < 0.02, "{m1} {m2}");
    }

    #[test]
    fn holder_bounds_and_monotonicity() {
        let g = geom(128);
        let w = SpectralField::mode(&g, 1, 1, 2.0).unwrap();
        let h1 = holder_seminorm(&w, 0.3, 4).unwrap();
        let h2 = holder_seminorm(&w, 0.6, 4).unwrap();
        assert!(h1.value <= h2.value);
        assert!(h1.skipped > 0);
        // Lipschitz oracle: |grad w| <= 2 * 2/pi, and |h| <= d/32 <= pi/64
        let lip = 4.0 / PI;
        assert!(h2.value <= lip * (PI / 64.0f64).powf(0.4) + 1e-12);
        let crude = 2.0 * w.nodal().max_abs() * g.spacing().powf(-0.6);
        assert!(h2.value <= crude);
        assert_eq!(holder_seminorm(&SpectralField::zeros(&g), 0.5, 4).unwrap().value, 0.0);
        assert!(holder_seminorm(&w, 1.0, 4).is_err());
    }

    #[test]
    fn record_of_zero_and_ground_state() {
        let g = geom(32);
        let params = DiagnosticsParams::default();
        let z = record(&SpectralField::zeros(&g), 0.0, &params).unwrap();
        assert_eq!(z.sup_norm, 0.0);
        assert_eq!(z.energy, 0.0);
        assert_eq!(z.u_sup, 0.0);
        assert!(z.b1_lp.values().all(|v| *v == 0.0));
        let w = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let r = record(&w, 0.0, &params).unwrap();
        assert!((r.energy - 1.0).abs() < 1e-15);
        assert!((r.half_norm - 2f64.sqrt()).abs() < 1e-15);
        let again = record(&w, 0.0, &params).unwrap();
        assert_eq!(r, again);
        assert_eq!(DiagnosticsRecord::header(&params).len(), r.row().len());
    }

    #[test]
    fn normal_frame_is_tangent() {
        let g = geom(64);
        let f = NormalFrame::default_for(&g).unwrap();
        assert!(f.tangency_defect < 1e-12);
        assert!(f.tangent_sup > 0.5);
    }

    #[test]
    fn ground_state_normal_velocity_vanishes_linearly() {
        let g = geom(128);
        let w = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
        let u = riesz_velocity(&w);
        let f = NormalFrame::default_for(&g).unwrap();
        let fit = normal_velocity_rate(&u, &f).unwrap();
        assert!(fit.slope > 0.85, "{fit:?}");
    }
}
