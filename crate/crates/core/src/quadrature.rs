//! One-dimensional quadrature rules.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            // Chebyshev-like initial guess, then Newton on P_n
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int_a^b f` with this rule.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// `int_a^b f` with `panels` equal panels.
    pub fn integrate_composite(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + k as f64 * h;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Tanh-sinh (double exponential) rule for `int_a^b f`, tolerant of integrable
/// endpoint singularities. `f` receives `(x, x - a, b - x)` so callers can
/// evaluate singular factors without cancellation.
pub fn tanh_sinh(a: f64, b: f64, level: usize, mut f: impl FnMut(f64, f64, f64) -> f64) -> f64 {
    let h = 2f64.powi(-(level as i32));
    let half = 0.5 * (b - a);
    let kmax = (4.0 / h).ceil() as i64;
    let mut acc = 0.0;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let s = 0.5 * PI * t.sinh();
        let c = s.cosh();
        // 1 - tanh(s) and 1 + tanh(s), computed without cancellation
        let e = (-2.0 * s.abs()).exp();
        let small = 2.0 * e / (1.0 + e);
        let (one_minus, one_plus) = if s >= 0.0 { (small, 2.0 - small) } else { (2.0 - small, small) };
        let w = 0.5 * PI * t.cosh() / (c * c);
        if w < 1e-300 || one_minus == 0.0 || one_plus == 0.0 {
            continue;
        }
        let from_a = half * one_plus;
        let from_b = half * one_minus;
        acc += w * f(a + from_a, from_a, from_b);
    }
    acc * h * half
}
