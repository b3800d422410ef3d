//! Time integration of `theta_t + u . grad theta + kappa Lambda^s theta = 0`.
//!
//! The linear part is integrated exactly per mode and the advection term by Heun's
//! method in the integrating-factor frame. Advection is projected exactly onto the
//! retained modes, so `<P(u . grad theta), theta> = 0` up to rounding.

mod checkpoint;

use std::sync::Arc;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{record, DiagnosticsParams, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::operators::{riesz_velocity_signed, VelocityField, DEFAULT_ROTATION};
use crate::spectral::{project_products, SpectralField};

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

/// Drift velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Drift {
    /// `u = J grad Lambda^{-1} theta`.
    Sqg,
    /// Fixed `v = J grad psi` with `psi = sum amp w_{m,n}` given as `[m, n, amp]` triples.
    Prescribed { stream: Vec<(usize, usize, f64)> },
}

impl Default for Drift {
    fn default() -> Self {
        Drift::Sqg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub dt: f64,
    pub cfl: f64,
    pub t_end: f64,
    /// Spacing of output times.
    pub output_every: f64,
    /// Dissipation coefficient `kappa`.
    pub kappa: f64,
    /// Power `s` of `Lambda`; `1` is the critical case.
    pub dissipation_power: f64,
    pub drift: Drift,
    /// Sign of the rotation `J`.
    pub rotation: f64,
    /// Relative sup-norm growth that trips the maximum principle monitor.
    pub overshoot_tolerance: f64,
    /// Padding factor of the product transforms; products are projected exactly for any value `>= 1.5`.
    pub dealias: f64,
    pub max_halvings: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-2,
            cfl: 0.5,
            t_end: 1.0,
            output_every: 0.1,
            kappa: 1.0,
            dissipation_power: 1.0,
            drift: Drift::Sqg,
            rotation: DEFAULT_ROTATION,
            overshoot_tolerance: 0.01,
            dealias: 1.5,
            max_halvings: 30,
        }
    }
}

impl SolverConfig {
    /// All violated constraints, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.dt) {
            v.push(format!("solver.dt must be positive, got {}", self.dt));
        }
        if !(pos(self.cfl) && self.cfl <= 1.0) {
            v.push(format!("solver.cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            v.push(format!("solver.t_end must be non-negative, got {}", self.t_end));
        }
        if !pos(self.output_every) {
            v.push(format!("solver.output_every must be positive, got {}", self.output_every));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            v.push(format!("solver.kappa must be non-negative, got {}", self.kappa));
        }
        if !(self.dissipation_power > 0.0 && self.dissipation_power <= 2.0) {
            v.push(format!("solver.dissipation_power must lie in (0, 2], got {}", self.dissipation_power));
        }
        if self.rotation != 1.0 && self.rotation != -1.0 {
            v.push(format!("solver.rotation must be 1 or -1, got {}", self.rotation));
        }
        if !(self.overshoot_tolerance >= 0.0) {
            v.push(format!("solver.overshoot_tolerance must be non-negative, got {}", self.overshoot_tolerance));
        }
        if !(self.dealias >= 1.5) {
            v.push(format!("solver.dealias must be at least 1.5, got {}", self.dealias));
        }
        if let Drift::Prescribed { stream } = &self.drift {
            for (m, n, a) in stream {
                if *m == 0 || *n == 0 || !a.is_finite() {
                    v.push(format!("solver.drift.stream entry [{m}, {n}, {a}] is invalid"));
                }
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }
}

/// SHA-256 of the JSON form of a configuration.
pub fn config_hash<T: Serialize>(config: &T) -> Result<[u8; 32]> {
    let bytes = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&bytes).into())
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: f64,
    pub steps: u64,
    pub theta: SpectralField,
}

impl SolverState {
    pub fn new(theta: SpectralField) -> Self {
        SolverState { t: 0.0, steps: 0, theta }
    }
}

/// Outcome of one attempted step.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    Accepted(SolverState),
    /// `dt` exceeded the CFL limit `max_dt`.
    Rejected { max_dt: f64 },
}

/// Integrator bound to a geometry and configuration.
#[derive(Debug, Clone)]
pub struct Stepper {
    geometry: Arc<Geometry>,
    config: SolverConfig,
    /// `kappa lambda^{s/2}` per mode.
    rates: Array2<f64>,
    drift: Option<VelocityField>,
}

impl Stepper {
    pub fn new(geometry: &Arc<Geometry>, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let half = config.dissipation_power / 2.0;
        let rates = geometry.eigenvalues().mapv(|l| config.kappa * l.powf(half));
        let drift = match &config.drift {
            Drift::Sqg => None,
            Drift::Prescribed { stream } => {
                let max = geometry.modes();
                if let Some(bad) = stream.iter().find(|(m, n, _)| *m > max || *n > max) {
                    return Err(Error::Config(format!(
                        "drift mode ({}, {}) exceeds the {max} retained modes",
                        bad.0, bad.1
                    )));
                }
                let psi = SpectralField::from_modes(geometry, stream)?.with_tag("psi");
                Some(VelocityField::from_stream(psi, config.rotation)?)
            }
        };
        Ok(Stepper { geometry: geometry.clone(), config: config.clone(), rates, drift })
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geometry
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Per-mode linear rates `kappa lambda^{s/2}`.
    pub fn rates(&self) -> &Array2<f64> {
        &self.rates
    }

    /// Drift velocity for the state `theta`.
    pub fn velocity(&self, theta: &SpectralField) -> VelocityField {
        match &self.drift {
            Some(v) => v.clone(),
            None => riesz_velocity_signed(theta, self.config.rotation),
        }
    }

    fn stream(&self, theta: &SpectralField) -> SpectralField {
        match &self.drift {
            Some(v) => v.stream_function().clone(),
            None => {
                let mut c = theta.coeffs().clone();
                Zip::from(&mut c).and(self.geometry.sqrt_eigenvalues()).for_each(|a, l| *a /= l);
                SpectralField::from_coeffs(&self.geometry, c).expect("same shape")
            }
        }
    }

    /// Orthonormal coefficients of `-P(u . grad theta)`.
    pub fn advection(&self, theta: &SpectralField) -> Array2<f64> {
        let psi = self.stream(theta).series();
        let th = theta.series();
        let rot = self.config.rotation;
        // u . grad theta = rot (-psi_y theta_x + psi_x theta_y)
        let py = psi.derivative(1).scaled(rot);
        let px = psi.derivative(0).scaled(-rot);
        let tx = th.derivative(0);
        let ty = th.derivative(1);
        project_products(&[(&py, &tx), (&px, &ty)], self.geometry.modes()) * (self.geometry.side() / 2.0)
    }

    /// Largest step allowed by the CFL condition for `theta`.
    pub fn cfl_limit(&self, theta: &SpectralField) -> f64 {
        let u = self.velocity(theta).sup_norm();
        if u > 0.0 {
            self.config.cfl * self.geometry.spacing() / u
        } else {
            f64::INFINITY
        }
    }

    /// One Heun step in the integrating-factor frame, or a rejection if `dt` is above the CFL limit.
    pub fn try_step(&self, state: &SolverState, dt: f64) -> Result<StepOutcome> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let max_dt = self.cfl_limit(&state.theta);
        if dt > max_dt {
            return Ok(StepOutcome::Rejected { max_dt });
        }
        Ok(StepOutcome::Accepted(self.step_unchecked(state, dt)?))
    }

    /// Heun step without the CFL check.
    pub fn step_unchecked(&self, state: &SolverState, dt: f64) -> Result<SolverState> {
        let decay = self.rates.mapv(|r| (-r * dt).exp());
        let th = state.theta.coeffs();
        let n0 = self.advection(&state.theta);
        let mut a = th + &(&n0 * dt);
        a *= &decay;
        let stage = state.theta.with_coeffs(a);
        let n1 = self.advection(&stage);
        let mut next = th * &decay;
        Zip::from(&mut next).and(&decay).and(&n0).and(&n1).for_each(|x, e, p, q| *x += 0.5 * dt * (e * p + q));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { t: state.t, steps: state.steps, coeffs: Box::new(th.clone()) });
        }
        Ok(SolverState { t: state.t + dt, steps: state.steps + 1, theta: state.theta.with_coeffs(next) })
    }

    /// Advances by exactly `dt`, halving the step on CFL rejection; returns the new
    /// state, the step size used and the number of halvings.
    pub fn advance(&self, state: &SolverState, dt: f64) -> Result<(SolverState, f64, u32)> {
        let mut h = dt;
        let mut halvings = 0;
        loop {
            match self.try_step(state, h)? {
                StepOutcome::Accepted(s) => return Ok((s, h, halvings)),
                StepOutcome::Rejected { max_dt } => {
                    halvings += 1;
                    if halvings > self.config.max_halvings {
                        return Err(Error::Numeric(format!(
                            "CFL limit {max_dt:e} not met after {} halvings at t = {}",
                            self.config.max_halvings, state.t
                        )));
                    }
                    h *= 0.5;
                }
            }
        }
    }

    /// Fixed-step integration to `t_end` with `steps` equal steps and no CFL control.
    pub fn integrate_fixed(&self, theta0: &SpectralField, t_end: f64, steps: usize) -> Result<SpectralField> {
        let dt = t_end / steps as f64;
        let mut st = SolverState::new(theta0.clone());
        for _ in 0..steps {
            st = self.step_unchecked(&st, dt)?;
        }
        Ok(st.theta)
    }
}

/// Observed convergence order from runs with `steps`, `2 steps` and `4 steps`.
pub fn observed_order(stepper: &Stepper, theta0: &SpectralField, t_end: f64, steps: usize) -> Result<f64> {
    let a = stepper.integrate_fixed(theta0, t_end, steps)?;
    let b = stepper.integrate_fixed(theta0, t_end, 2 * steps)?;
    let c = stepper.integrate_fixed(theta0, t_end, 4 * steps)?;
    let e1 = a.sub(&b)?.l2_norm();
    let e2 = b.sub(&c)?.l2_norm();
    Ok((e1 / e2).log2())
}

/// `||theta(t)||^2 - ||theta_0||^2 + 2 int_0^t ||Lambda^{s/2} theta||^2`.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct EnergyLedger {
    pub initial: f64,
    pub current: f64,
    pub dissipated: f64,
    pub residual: f64,
    pub relative: f64,
}

impl EnergyLedger {
    fn new(initial: f64) -> Self {
        EnergyLedger { initial, current: initial, ..Default::default() }
    }

    fn close(&mut self, current: f64) {
        self.current = current;
        self.residual = current - self.initial + self.dissipated;
        self.relative = if self.initial > 0.0 { self.residual.abs() / self.initial } else { self.residual.abs() };
    }
}

/// `2 int_0^dt rate a(s)^2 ds` for `a(s) = e^{-rate s} (b0 + (b1 - b0) s / dt)`, the
/// interpolant consistent with the integrating factor.
fn step_dissipation(rates: &Array2<f64>, a0: &Array2<f64>, a1: &Array2<f64>, dt: f64) -> f64 {
    let mut total = 0.0;
    Zip::from(rates).and(a0).and(a1).for_each(|&mu, &p, &q| {
        if mu == 0.0 {
            return;
        }
        let x = 2.0 * mu * dt;
        // moments int_0^1 e^{-x u} u^k du
        let (i0, i1, i2) = if x < 1e-3 {
            (1.0 - x / 2.0 + x * x / 6.0, 0.5 - x / 3.0 + x * x / 8.0, 1.0 / 3.0 - x / 4.0 + x * x / 10.0)
        } else {
            let e = (-x).exp();
            ((1.0 - e) / x, (1.0 - e * (1.0 + x)) / (x * x), (2.0 - e * (x * x + 2.0 * x + 2.0)) / (x * x * x))
        };
        let b1 = q * (mu * dt).exp();
        let d = b1 - p;
        total += 2.0 * mu * dt * (p * p * i0 + 2.0 * p * d * i1 + d * d * i2);
    });
    total
}

/// Maximum principle monitor: `sup |theta(t)| <= (1 + tol) sup |theta_0|`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OvershootMonitor {
    pub initial_sup: f64,
    pub max_sup: f64,
    /// `max_sup / initial_sup - 1`.
    pub overshoot: f64,
    pub tolerance: f64,
    pub first_violation: Option<f64>,
}

impl OvershootMonitor {
    fn new(initial_sup: f64, tolerance: f64) -> Self {
        OvershootMonitor { initial_sup, max_sup: initial_sup, overshoot: 0.0, tolerance, first_violation: None }
    }

    fn observe(&mut self, t: f64, sup: f64) {
        self.max_sup = self.max_sup.max(sup);
        if self.initial_sup > 0.0 {
            self.overshoot = self.max_sup / self.initial_sup - 1.0;
        }
        if self.first_violation.is_none() && sup > (1.0 + self.tolerance) * self.initial_sup {
            log::warn!("maximum principle overshoot {:.3e} at t = {t}", sup / self.initial_sup - 1.0);
            self.first_violation = Some(t);
        }
    }

    pub fn violated(&self) -> bool {
        self.first_violation.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub states: Vec<SolverState>,
    pub records: Vec<DiagnosticsRecord>,
    pub ledger: EnergyLedger,
    pub overshoot: OvershootMonitor,
    pub halvings: u32,
    pub min_dt: f64,
}

impl RunOutput {
    pub fn final_state(&self) -> &SolverState {
        self.states.last().expect("a run keeps at least the initial state")
    }
}

/// Integrates to `t_end`, recording diagnostics at every multiple of `output_every`
/// (and at `t_end`). `observer` sees each recorded state.
pub fn run(
    stepper: &Stepper,
    theta0: &SpectralField,
    params: &DiagnosticsParams,
    mut observer: impl FnMut(&SolverState, &DiagnosticsRecord) -> Result<()>,
) -> Result<RunOutput> {
    if !Arc::ptr_eq(theta0.geometry(), stepper.geometry()) && !theta0.geometry().same_grid(stepper.geometry()) {
        return Err(Error::Shape("initial data and solver use different grids".into()));
    }
    let cfg = stepper.config();
    let mut state = SolverState::new(SpectralField::from_coeffs(stepper.geometry(), theta0.coeffs().clone())?);
    let mut ledger = EnergyLedger::new(state.theta.energy());
    let mut overshoot = OvershootMonitor::new(state.theta.nodal().max_abs(), cfg.overshoot_tolerance);
    let mut states = Vec::new();
    let mut records = Vec::new();
    let mut emit = |s: &SolverState, states: &mut Vec<SolverState>, records: &mut Vec<DiagnosticsRecord>| -> Result<()> {
        let rec = record(&s.theta, s.t, params)?;
        observer(s, &rec)?;
        states.push(s.clone());
        records.push(rec);
        Ok(())
    };
    emit(&state, &mut states, &mut records)?;

    let mut base_dt = cfg.dt;
    let mut halvings = 0;
    let mut min_dt = f64::INFINITY;
    let mut k = 1u64;
    let eps = 1e-12 * cfg.t_end.max(1.0);
    while state.t < cfg.t_end - eps {
        let target = (k as f64 * cfg.output_every).min(cfg.t_end);
        let h = base_dt.min(target - state.t);
        let (next, used, halved) = stepper.advance(&state, h)?;
        if halved > 0 {
            halvings += halved;
            base_dt = base_dt.min(used);
        }
        min_dt = min_dt.min(used);
        ledger.dissipated += step_dissipation(stepper.rates(), state.theta.coeffs(), next.theta.coeffs(), used);
        state = next;
        overshoot.observe(state.t, state.theta.nodal().max_abs());
        if (state.t - target).abs() <= eps {
            state.t = target;
            k += 1;
            emit(&state, &mut states, &mut records)?;
        }
    }
    ledger.close(state.theta.energy());
    Ok(RunOutput { states, records, ledger, overshoot, halvings, min_dt })
}

#[cfg(test)]
mod tests;
