//! Type-I sine and cosine transforms along the lanes of 2-D arrays.
//!
//! Every transform on a grid of `m` intervals is one complex FFT of length `2m`:
//! `Z_i = sum_k z_k exp(-i pi k i / m)`, whose real part is a cosine sum and whose
//! negated imaginary part is a sine sum.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

fn plan(len: usize) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<usize, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = plans.lock().expect("fft plan cache poisoned");
    guard
        .entry(len)
        .or_insert_with(|| FftPlanner::new().plan_fft_forward(len))
        .clone()
}

/// Scratch buffers for one lane transform of size `2m`.
pub(crate) struct LaneWork {
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    m: usize,
}

impl LaneWork {
    pub(crate) fn new(m: usize) -> Self {
        let fft = plan(2 * m);
        let scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        LaneWork { fft, buf: vec![Complex::new(0.0, 0.0); 2 * m], scratch, m }
    }

    fn run(&mut self, z: impl Iterator<Item = (usize, f64)>) {
        self.buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (k, v) in z {
            self.buf[k] = Complex::new(v, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
    }

    /// `out[i] = sum_k s[k] sin(pi (k+1) i / m)` for `i = 0..=m`.
    pub(crate) fn synth_sine(&mut self, s: &[f64], out: &mut [f64]) {
        debug_assert!(s.len() < self.m && out.len() == self.m + 1);
        self.run(s.iter().enumerate().map(|(k, v)| (k + 1, *v)));
        for (o, z) in out.iter_mut().zip(&self.buf) {
            *o = -z.im;
        }
        out[0] = 0.0;
        out[self.m] = 0.0;
    }

    /// `out[i] = sum_k c[k] cos(pi k i / m)` for `i = 0..=m`.
    pub(crate) fn synth_cos(&mut self, c: &[f64], out: &mut [f64]) {
        debug_assert!(c.len() <= self.m + 1 && out.len() == self.m + 1);
        self.run(c.iter().copied().enumerate());
        for (o, z) in out.iter_mut().zip(&self.buf) {
            *o = z.re;
        }
    }

    /// Sine coefficients `s[k-1]`, `k = 1..=out.len()`, of nodal values `v[0..=m]`.
    pub(crate) fn analyze_sine(&mut self, v: &[f64], out: &mut [f64]) {
        debug_assert!(v.len() == self.m + 1 && out.len() < self.m);
        let m = self.m;
        self.run(v[1..m].iter().enumerate().map(|(i, x)| (i + 1, *x)));
        let scale = 2.0 / m as f64;
        for (k, o) in out.iter_mut().enumerate() {
            *o = -self.buf[k + 1].im * scale;
        }
    }

    /// Cosine coefficients `c[k]`, `k = 0..out.len()`, of nodal values `v[0..=m]`
    /// (exact for cosine polynomials of degree `<= m`).
    pub(crate) fn analyze_cos(&mut self, v: &[f64], out: &mut [f64]) {
        debug_assert!(v.len() == self.m + 1 && out.len() <= self.m + 1);
        let m = self.m;
        self.run(v.iter().enumerate().map(|(i, x)| {
            if i == 0 || i == m {
                (i, 0.5 * x)
            } else {
                (i, *x)
            }
        }));
        let scale = 2.0 / m as f64;
        for (k, o) in out.iter_mut().enumerate() {
            let mut c = self.buf[k].re * scale;
            if k == 0 || k == m {
                c *= 0.5;
            }
            *o = c;
        }
    }
}

/// Applies `f(lane_in, lane_out)` to every lane along `axis`, in parallel over lanes.
/// Output lanes have length `out_len`; lane order and arithmetic are independent of
/// the thread count.
pub(crate) fn map_lanes<F>(input: ArrayView2<f64>, axis: Axis, out_len: usize, m: usize, f: F) -> Array2<f64>
where
    F: Fn(&mut LaneWork, &[f64], &mut [f64]) + Sync,
{
    let view = if axis == Axis(0) { input.reversed_axes() } else { input };
    let rows = view.nrows();
    let mut out = Array2::<f64>::zeros((rows, out_len));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(view.axis_iter(Axis(0)).into_par_iter())
        .for_each_init(
            || (LaneWork::new(m), Vec::new()),
            |(work, lane), (mut o, i)| {
                lane.clear();
                lane.extend(i.iter().copied());
                let o = o.as_slice_mut().expect("row-major output lane");
                f(work, lane, o);
            },
        );
    if axis == Axis(0) {
        out.reversed_axes().as_standard_layout().into_owned()
    } else {
        out
    }
}

/// Smallest integer `>= n` whose prime factors are 2, 3 and 5.
pub(crate) fn smooth_size(n: usize) -> usize {
    let mut k = n.max(1);
    loop {
        let mut r = k;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return k;
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_round_trip_on_lane() {
        let m = 12;
        let s: Vec<f64> = (0..m - 1).map(|k| ((k * 7 + 3) % 5) as f64 - 2.0).collect();
        let mut w = LaneWork::new(m);
        let mut v = vec![0.0; m + 1];
        w.synth_sine(&s, &mut v);
        for i in 0..=m {
            let direct: f64 = s
                .iter()
                .enumerate()
                .map(|(k, c)| c * (PI * (k + 1) as f64 * i as f64 / m as f64).sin())
                .sum();
            assert!((v[i] - direct).abs() < 1e-12);
        }
        let mut back = vec![0.0; m - 1];
        w.analyze_sine(&v, &mut back);
        for (a, b) in s.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_round_trip_full_degree() {
        let m = 10;
        let c: Vec<f64> = (0..=m).map(|k| 1.0 / (1 + k) as f64).collect();
        let mut w = LaneWork::new(m);
        let mut v = vec![0.0; m + 1];
        w.synth_cos(&c, &mut v);
        let mut back = vec![0.0; m + 1];
        w.analyze_cos(&v, &mut back);
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(97), 100);
        assert_eq!(smooth_size(192), 192);
    }
}
