use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::quadrature::GaussLegendre;

fn geom(n: usize) -> Arc<Geometry> {
    Geometry::square(n, PI, 0.05 * PI).unwrap()
}

#[test]
fn lambda_powers_on_modes() {
    let g = geom(16);
    let w = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
    let l = apply_lambda_power(&w, 1.0).unwrap();
    assert!((l.coeffs()[[0, 0]] - 2f64.sqrt()).abs() < 1e-15);
    let w23 = SpectralField::mode(&g, 2, 3, 1.0).unwrap();
    let l = apply_lambda_power(&w23, -1.0).unwrap();
    assert!((l.coeffs()[[1, 2]] - 13f64.powf(-0.5)).abs() < 1e-15);
    assert!(matches!(apply_lambda_power(&w, 2.5), Err(Error::Config(_))));
    assert!(matches!(apply_lambda_power(&w, -1.5), Err(Error::Config(_))));
}

#[test]
fn heat_semigroup_law() {
    let g = geom(16);
    let f = SpectralField::from_modes(&g, &[(1, 1, 1.0), (4, 2, -0.5), (9, 9, 0.1)]).unwrap();
    let a = heat_semigroup(&heat_semigroup(&f, 0.1).unwrap(), 0.25).unwrap();
    let b = heat_semigroup(&f, 0.35).unwrap();
    let err = (a.coeffs() - b.coeffs()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(err < 1e-12);
    assert_eq!(heat_semigroup(&f, 0.0).unwrap().coeffs(), f.coeffs());
    let w = heat_semigroup(&SpectralField::mode(&g, 1, 1, 1.0).unwrap(), 0.7).unwrap();
    assert!((w.coeffs()[[0, 0]] - (-1.4f64).exp()).abs() < 1e-15);
    assert!(matches!(heat_semigroup(&f, -1.0), Err(Error::Domain(_))));
}

#[test]
fn lambda_via_heat_matches_multiplier() {
    let g = geom(32);
    let q = HeatQuadrature::default();
    let w = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
    let l = lambda_via_heat(&w, 1.0, &q).unwrap();
    assert!((l.coeffs()[[0, 0]] - 2f64.sqrt()).abs() < 1e-8);
    let f = SpectralField::from_modes(&g, &[(1, 1, 1.0), (3, 2, 0.5), (20, 31, 0.2)]).unwrap();
    for s in [0.5, 1.0, 1.5] {
        let a = lambda_via_heat(&f, s, &q).unwrap();
        let b = apply_lambda_power(&f, s).unwrap();
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y).abs() <= 1e-8 * y.abs().max(1e-300), "s={s}: {x} vs {y}");
        }
    }
    assert_eq!(lambda_via_heat(&SpectralField::zeros(&g), 1.0, &q).unwrap().max_abs_coeff(), 0.0);
}

#[test]
fn heat_normalization_matches_gamma_closed_form() {
    for s in [0.3, 1.0, 1.7] {
        let rep = HeatRepresentation::new(s, 2.0, 5000.0, &HeatQuadrature::default()).unwrap();
        let exact = HeatRepresentation::exact_normalization(s);
        assert!((rep.normalization() - exact).abs() < 1e-9 * exact, "{s}");
    }
}

#[test]
fn heat_quadrature_failure_is_reported() {
    let g = geom(16);
    let f = SpectralField::mode(&g, 3, 3, 1.0).unwrap();
    let q = HeatQuadrature { tolerance: 1e-14, order: 2, panels_per_unit: 0.05 };
    assert!(matches!(lambda_via_heat(&f, 1.0, &q), Err(Error::Numeric(_))));
}

#[test]
fn heat_kernel_symmetry_and_mass() {
    let g = geom(16);
    let x = [0.4, 2.1];
    let y = [1.3, 0.9];
    let a = heat_kernel(&g, x, y, 0.05, 400).unwrap();
    let b = heat_kernel(&g, y, x, 0.05, 400).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert!(!a.truncation_warning);
    // int H(t, x, y) dy: sum e^{-t lam} w(x) int w, int sin(m y) = (1 - (-1)^m)/m
    for t in [0.01, 0.2, 1.0] {
        let modes = 2000;
        let k = g.wavenumber();
        let one_d = |a: f64| -> f64 {
            (1..=modes)
                .step_by(2)
                .map(|m| {
                    let mf = m as f64;
                    (-t * k * k * mf * mf).exp() * (mf * k * a).sin() * 2.0 / (mf * k)
                })
                .sum::<f64>()
                * 2.0
                / g.side()
        };
        let mass = one_d(x[0]) * one_d(x[1]);
        assert!(mass <= 1.0 + 1e-8 && mass > 0.0, "{mass}");
    }
}

#[test]
fn heat_kernel_mass_by_quadrature() {
    let g = geom(16);
    let gl = GaussLegendre::new(20);
    let x = [0.2, 1.0];
    let t = 0.05;
    let mass = gl.integrate_composite(0.0, PI, 40, |y0| {
        gl.integrate_composite(0.0, PI, 40, |y1| heat_kernel(&g, x, [y0, y1], t, 200).unwrap().value)
    });
    assert!(mass <= 1.0 + 1e-8, "{mass}");
    // near the side x = 0 the absorbed fraction is about erfc(x / sqrt(4t))
    let free = statrs::function::erf::erf(x[0] / (4.0 * t).sqrt());
    assert!((mass - free).abs() < 0.02, "{mass} {free}");
}

#[test]
fn heat_kernel_long_time_limit() {
    let g = geom(16);
    let x = [0.7, 1.9];
    let y = [2.2, 1.2];
    let t = 5.0;
    let h = heat_kernel(&g, x, y, t, 64).unwrap();
    let lead = g.ground_state_at(x) * g.ground_state_at(y);
    assert!((h.value * (t * g.lambda1()).exp() - lead).abs() < 1e-6);
    assert!(matches!(heat_kernel(&g, x, y, 0.0, 10), Err(Error::Domain(_))));
}

#[test]
fn heat_kernel_truncation_flag() {
    let g = geom(16);
    let s = heat_kernel(&g, [1.0, 1.0], [1.1, 1.0], 1e-4, 10).unwrap();
    assert!(s.truncation_warning);
}

#[test]
fn kernel_derivatives_match_differences() {
    let g = geom(16);
    let x = [0.9, 1.4];
    let y = [1.1, 1.2];
    let t = 0.03;
    let m = 300;
    let d = heat_kernel_derivatives(&g, x, y, t, m).unwrap();
    let e = 1e-6;
    let hk = |x: [f64; 2], y: [f64; 2]| heat_kernel(&g, x, y, t, m).unwrap().value;
    let fdx = (hk([x[0] + e, x[1]], y) - hk([x[0] - e, x[1]], y)) / (2.0 * e);
    assert!((fdx - d.grad_x[0]).abs() < 1e-5 * d.grad_x[0].abs().max(1.0));
    let fdy = (hk(x, [y[0], y[1] + e]) - hk(x, [y[0], y[1] - e])) / (2.0 * e);
    assert!((fdy - d.grad_y[1]).abs() < 1e-5 * d.grad_y[1].abs().max(1.0));
    let sum = d.grad_x[0] + d.grad_y[0];
    assert!((sum - d.grad_sum[0]).abs() < 1e-8 * d.grad_x[0].abs());
}

proptest! {
    #[test]
    fn lambda_power_is_multiplicative(s1 in -0.5f64..1.0, s2 in -0.5f64..1.0, seed in 0u64..1000) {
        let g = geom(12);
        let m = 1 + (seed % 11) as usize;
        let n = 1 + ((seed / 11) % 11) as usize;
        let f = SpectralField::mode(&g, m, n, 1.0).unwrap();
        let a = apply_lambda_power(&apply_lambda_power(&f, s1).unwrap(), s2).unwrap();
        let b = apply_lambda_power(&f, s1 + s2).unwrap();
        let (x, y) = (a.coeffs()[[m - 1, n - 1]], b.coeffs()[[m - 1, n - 1]]);
        prop_assert!((x - y).abs() < 1e-12 * y.abs());
    }

    #[test]
    fn heat_kernel_symmetric(x0 in 0.01f64..3.1, x1 in 0.01f64..3.1, y0 in 0.01f64..3.1, y1 in 0.01f64..3.1, t in 0.01f64..2.0) {
        let g = geom(8);
        let a = heat_kernel(&g, [x0, x1], [y0, y1], t, 200).unwrap();
        let b = heat_kernel(&g, [y0, y1], [x0, x1], t, 200).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert!(a.value >= -1e-12);
    }
}
