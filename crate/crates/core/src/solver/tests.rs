use std::f64::consts::PI;

use super::*;

fn geom(n: usize) -> Arc<Geometry> {
    Geometry::with_default_mask(n, PI).unwrap()
}

fn quiet() -> DiagnosticsParams {
    DiagnosticsParams { normal_rate: false, holder_levels: 2, ..Default::default() }
}

#[test]
fn zero_drift_single_mode_is_exact() {
    let g = geom(32);
    let cfg = SolverConfig { drift: Drift::Prescribed { stream: vec![] }, t_end: 1.0, ..Default::default() };
    let st = Stepper::new(&g, &cfg).unwrap();
    let th0 = SpectralField::mode(&g, 2, 3, 1.0).unwrap();
    let out = run(&st, &th0, &quiet(), |_, _| Ok(())).unwrap();
    let rate = g.eigenvalue(2, 3).sqrt();
    let got = out.final_state().theta.coeffs()[[1, 2]];
    assert!((got - (-rate).exp()).abs() < 1e-10);
    assert_eq!(out.records.len(), 11);
}

#[test]
fn sqg_ground_state_decays_exactly() {
    let g = geom(32);
    let st = Stepper::new(&g, &SolverConfig::default()).unwrap();
    let th0 = SpectralField::mode(&g, 1, 1, 1.0).unwrap();
    let out = run(&st, &th0, &quiet(), |_, _| Ok(())).unwrap();
    let got = out.final_state().theta.coeffs()[[0, 0]];
    assert!((got - (-2f64.sqrt()).exp()).abs() < 1e-8);
    assert!(out.ledger.relative < 1e-10);
}

#[test]
fn advection_is_skew() {
    let g = geom(32);
    let st = Stepper::new(&g, &SolverConfig::default()).unwrap();
    let th = SpectralField::from_modes(&g, &[(1, 1, 1.0), (2, 1, 0.5), (3, 4, -0.3), (7, 2, 0.1)]).unwrap();
    let n = st.advection(&th);
    let inner: f64 = n.iter().zip(th.coeffs().iter()).map(|(a, b)| a * b).sum();
    let scale = n.iter().map(|v| v * v).sum::<f64>().sqrt() * th.l2_norm();
    assert!(scale > 1e-3);
    assert!(inner.abs() <= 1e-10 * scale, "{inner} {scale}");
}

#[test]
fn energy_ledger_and_order() {
    let g = geom(32);
    let cfg = SolverConfig { dt: 2e-3, t_end: 0.5, ..Default::default() };
    let st = Stepper::new(&g, &cfg).unwrap();
    let th0 = SpectralField::from_modes(&g, &[(1, 1, 1.0), (2, 1, 0.5), (1, 3, 0.3)]).unwrap();
    let out = run(&st, &th0, &quiet(), |_, _| Ok(())).unwrap();
    assert!(out.ledger.relative < 1e-6, "{:?}", out.ledger);
    assert!(!out.overshoot.violated());
    let p = observed_order(&st, &th0, 0.2, 10).unwrap();
    assert!(p > 1.8, "order {p}");
}

#[test]
fn cfl_rejection_halves_step() {
    let g = geom(32);
    let cfg = SolverConfig { dt: 0.5, t_end: 0.5, output_every: 0.5, ..Default::default() };
    let st = Stepper::new(&g, &cfg).unwrap();
    let th0 = SpectralField::mode(&g, 1, 2, 5.0).unwrap();
    assert!(matches!(st.try_step(&SolverState::new(th0.clone()), 0.5).unwrap(), StepOutcome::Rejected { .. }));
    let out = run(&st, &th0, &quiet(), |_, _| Ok(())).unwrap();
    assert!(out.halvings > 0);
    assert!(out.min_dt <= st.cfl_limit(&th0) + 1e-15);
    assert!((out.final_state().t - 0.5).abs() < 1e-15);
}

#[test]
fn blowup_reports_last_state() {
    let g = geom(16);
    let st = Stepper::new(&g, &SolverConfig::default()).unwrap();
    let mut c = Array2::zeros((15, 15));
    c[[0, 0]] = f64::NAN;
    let th = SpectralField::from_coeffs(&g, c);
    if let Ok(th) = th {
        assert!(matches!(st.step_unchecked(&SolverState::new(th), 0.01), Err(Error::Blowup { .. })));
    }
}

#[test]
fn config_violations_are_collected() {
    let cfg = SolverConfig { dt: -1.0, cfl: 2.0, rotation: 0.0, ..Default::default() };
    match cfg.validate() {
        Err(Error::Invalid(v)) => assert_eq!(v.len(), 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let g = geom(16);
    let th = SpectralField::from_modes(&g, &[(1, 1, 0.1), (4, 2, -1e-300), (3, 3, 1.0 / 3.0)]).unwrap();
    let st = SolverState { t: 0.123456789, steps: 42, theta: th };
    let hash = config_hash(&SolverConfig::default()).unwrap();
    let cp = Checkpoint::from_state(&st, hash);
    let bytes = cp.encode();
    assert_eq!(&bytes[..4], b"SQGB");
    let back = Checkpoint::decode(&bytes).unwrap();
    assert_eq!(back.encode(), bytes);
    let st2 = back.to_state(&g).unwrap();
    for (a, b) in st.theta.coeffs().iter().zip(st2.theta.coeffs().iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert!(Checkpoint::decode(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(Checkpoint::decode(&bad).is_err());
    assert!(back.to_state(&geom(32)).is_err());
}
