//! Run configuration, the `run` / `verify` / `diag` commands, and their file output.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{boundary_ratio_nodal, holder_monitor, record, DiagnosticsParams, HolderMonitor, RecordWriter};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::inequalities::{
    random_field, standard_family, verify_commutator_scaling, verify_cordoba_refinement, verify_decay_envelope,
    verify_finite_difference_velocity, verify_kernel_bounds, verify_lambda_one_lower, verify_normal_velocity_rate,
    verify_short_time_smallness, verify_velocity_conditional_bound, verify_velocity_dichotomy,
    verify_weight_norm_bridge, verify_weighted_identity, verify_weighted_lp_control, envelope_rate, InequalityReport,
    KernelSamplePlan, VelocitySplit,
};
use crate::operators::ScalarFn;
use crate::solver::{
    config_hash, read_checkpoint, run, write_checkpoint, Checkpoint, Drift, EnergyLedger, OvershootMonitor,
    SolverConfig, SolverState, Stepper,
};
use crate::spectral::SpectralField;

pub const SCHEMA_VERSION: u32 = 1;
/// Overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "SQG_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_NAN: i32 = 2;
pub const EXIT_MONITOR: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub n: usize,
    pub side_length: f64,
    /// Defaults to `0.05 * side_length`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corner_radius: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { n: 128, side_length: PI, corner_radius: None }
    }
}

impl GeometryConfig {
    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n < 8 {
            v.push(format!("geometry.n: N >= 8 required, got {}", self.n));
        }
        if !(self.side_length > 0.0 && self.side_length.is_finite()) {
            v.push(format!("geometry.side_length must be positive, got {}", self.side_length));
        }
        if let Some(r) = self.corner_radius {
            if !(r >= 0.0 && r < self.side_length / 4.0) {
                v.push(format!("geometry.corner_radius must lie in [0, side_length/4), got {r}"));
            }
        }
        v
    }

    pub fn build(&self) -> Result<Arc<Geometry>> {
        match self.corner_radius {
            Some(r) => Geometry::square(self.n, self.side_length, r),
            None => Geometry::with_default_mask(self.n, self.side_length),
        }
    }
}

/// Initial datum `theta_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Sum of `amplitude * w_{m,n}`.
    Modes { modes: Vec<(usize, usize, f64)> },
    /// Seeded random combination of `count` modes up to `max_mode`, plus `w_1`.
    Random { count: usize, max_mode: usize },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Modes { modes: vec![(1, 1, 1.0), (2, 1, 0.5), (1, 3, 0.3), (4, 5, 0.2)] }
    }
}

impl InitialCondition {
    fn violations(&self, geometry: &GeometryConfig) -> Vec<String> {
        let limit = geometry.n.saturating_sub(1);
        let mut v = Vec::new();
        match self {
            InitialCondition::Modes { modes } => {
                if modes.is_empty() {
                    v.push("initial.modes must not be empty".into());
                }
                for (m, n, a) in modes {
                    if *m == 0 || *n == 0 || *m > limit || *n > limit {
                        v.push(format!("initial.modes: ({m}, {n}) outside 1..={limit}"));
                    }
                    if !a.is_finite() {
                        v.push(format!("initial.modes: amplitude of ({m}, {n}) is not finite"));
                    }
                }
            }
            InitialCondition::Random { count, max_mode } => {
                if *count == 0 {
                    v.push("initial.count must be positive".into());
                }
                if *max_mode == 0 || *max_mode > limit {
                    v.push(format!("initial.max_mode must lie in 1..={limit}, got {max_mode}"));
                }
            }
        }
        v
    }

    pub fn build(&self, geometry: &Arc<Geometry>, seed: u64) -> Result<SpectralField> {
        match self {
            InitialCondition::Modes { modes } => SpectralField::from_modes(geometry, modes),
            InitialCondition::Random { count, max_mode } => random_field(geometry, *count, *max_mode, seed),
        }
    }
}

/// Checkpoint cadence and the Holder persistence monitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// A checkpoint every this many recorded outputs; 0 writes only the final one.
    pub checkpoint_every: usize,
    pub holder_monitor: bool,
    pub holder_alpha: f64,
    pub holder_p: f64,
    pub holder_fit_fraction: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { checkpoint_every: 5, holder_monitor: true, holder_alpha: 0.4, holder_p: 4.0, holder_fit_fraction: 0.1 }
    }
}

/// Which checks `verify` runs and with what samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyPlan {
    /// Empty means every check in [`CHECKS`].
    pub names: Vec<String>,
    pub family_size: usize,
    pub refine: usize,
    pub cordoba_phi: ScalarFn,
    pub identity_phis: Vec<ScalarFn>,
    pub identity_tolerance: f64,
    pub shells: usize,
    pub p: f64,
    pub alpha: f64,
    pub m: u32,
    pub t_end: f64,
    pub bridge: Vec<(u32, f64)>,
    pub short_time_levels: Vec<f64>,
    pub fd_eps: Vec<f64>,
    pub commutator_n: usize,
    pub commutator_refine: usize,
    pub kernel: KernelSamplePlan,
}

impl Default for VerifyPlan {
    fn default() -> Self {
        VerifyPlan {
            names: Vec::new(),
            family_size: 10,
            refine: 4,
            cordoba_phi: ScalarFn::half_square(),
            identity_phis: vec![
                ScalarFn::square(),
                ScalarFn::Softplus { level: 0.5, sharpness: 8.0 },
                ScalarFn::Linear { slope: 1.0 },
            ],
            identity_tolerance: 1e-8,
            shells: 4,
            p: 4.0,
            alpha: 0.8,
            m: 2,
            t_end: 1.0,
            bridge: vec![(2, 1.5), (2, 4.0)],
            short_time_levels: vec![2.0, 1.0, 0.5, 0.25],
            fd_eps: vec![0.1, 0.05, 0.025],
            commutator_n: 1024,
            commutator_refine: 2,
            kernel: KernelSamplePlan::default(),
        }
    }
}

/// Names accepted by `verify`.
pub const CHECKS: &[&str] = &[
    "cordoba",
    "weighted_identity",
    "lambda_one",
    "decay_envelope",
    "weighted_lp",
    "velocity_dichotomy",
    "velocity_conditional",
    "short_time",
    "finite_difference_velocity",
    "normal_velocity",
    "commutator",
    "kernel",
    "bridge",
];

impl VerifyPlan {
    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for n in &self.names {
            if !CHECKS.contains(&n.as_str()) {
                v.push(format!("verify.names: unknown check `{n}` (known: {})", CHECKS.join(", ")));
            }
        }
        if self.family_size == 0 {
            v.push("verify.family_size must be positive".into());
        }
        if self.refine == 0 || self.commutator_refine == 0 {
            v.push("verify refinement factors must be positive".into());
        }
        if self.shells < 4 {
            v.push(format!("verify.shells must be at least 4, got {}", self.shells));
        }
        if !(self.p > 2.0) {
            v.push(format!("verify.p must exceed 2, got {}", self.p));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            v.push(format!("verify.alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.m == 0 {
            v.push("verify.m must be positive".into());
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            v.push(format!("verify.t_end must be positive, got {}", self.t_end));
        }
        if !(self.identity_tolerance >= 0.0) {
            v.push("verify.identity_tolerance must be non-negative".into());
        }
        if self.commutator_n < 8 {
            v.push(format!("verify.commutator_n: N >= 8 required, got {}", self.commutator_n));
        }
        if self.fd_eps.iter().any(|e| !(*e > 0.0)) {
            v.push("verify.fd_eps entries must be positive".into());
        }
        if self.short_time_levels.iter().any(|c| !(*c > 0.0)) {
            v.push("verify.short_time_levels entries must be positive".into());
        }
        if self.kernel.samples == 0 || !(self.kernel.t_range[0] > 0.0 && self.kernel.t_range[1] > self.kernel.t_range[0]) {
            v.push("verify.kernel needs samples > 0 and 0 < t_range[0] < t_range[1]".into());
        }
        v
    }

    fn selected(&self) -> Vec<String> {
        if self.names.is_empty() {
            CHECKS.iter().map(|s| s.to_string()).collect()
        } else {
            self.names.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsParams,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub verify: VerifyPlan,
}

fn default_seed() -> u64 {
    20240917
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: default_seed(),
            output_dir: default_output_dir(),
            geometry: GeometryConfig::default(),
            initial: InitialCondition::default(),
            solver: SolverConfig::default(),
            diagnostics: DiagnosticsParams::default(),
            output: OutputConfig::default(),
            verify: VerifyPlan::default(),
        }
    }
}

fn diagnostics_violations(d: &DiagnosticsParams) -> Vec<String> {
    let mut v = Vec::new();
    if d.p_values.iter().any(|p| !(*p >= 1.0)) {
        v.push("diagnostics.p_values entries must be >= 1".into());
    }
    if d.m_values.contains(&0) {
        v.push("diagnostics.m_values entries must be positive".into());
    }
    if d.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        v.push("diagnostics.alphas entries must lie in (0, 1)".into());
    }
    if d.holder_levels == 0 {
        v.push("diagnostics.holder_levels must be positive".into());
    }
    v
}

impl RunConfig {
    /// Every violated constraint, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            v.push(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        v.extend(self.geometry.violations());
        v.extend(self.initial.violations(&self.geometry));
        v.extend(self.solver.violations().into_iter().map(|s| format!("solver: {s}")));
        v.extend(diagnostics_violations(&self.diagnostics));
        let o = &self.output;
        if o.holder_monitor {
            if !self.diagnostics.alphas.contains(&o.holder_alpha) {
                v.push(format!("output.holder_alpha = {} is not among diagnostics.alphas", o.holder_alpha));
            }
            if !self.diagnostics.p_values.contains(&o.holder_p) {
                v.push(format!("output.holder_p = {} is not among diagnostics.p_values", o.holder_p));
            }
            if !(o.holder_fit_fraction > 0.0 && o.holder_fit_fraction <= 1.0) {
                v.push(format!("output.holder_fit_fraction must lie in (0, 1], got {}", o.holder_fit_fraction));
            }
        }
        v.extend(self.verify.violations());
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

    /// `output_dir`, unless overridden by the environment.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output_dir.clone(),
        }
    }

    /// Hash of everything that determines the trajectory.
    pub fn trajectory_hash(&self) -> Result<[u8; 32]> {
        config_hash(&(&self.geometry, &self.initial, &self.solver, self.seed))
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_config(&text)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub exit_code: i32,
    pub t: f64,
    pub steps: u64,
    pub records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ledger: Option<EnergyLedger>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overshoot: Option<OvershootMonitor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder: Option<HolderMonitor>,
    pub halvings: u32,
    pub min_dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const FINAL_CHECKPOINT: &str = "final.sqgb";
pub const LAST_GOOD_CHECKPOINT: &str = "last_good.sqgb";
pub const SUMMARY_FILE: &str = "run_summary.json";

pub fn checkpoint_name(index: usize) -> String {
    format!("checkpoint_{index:05}.sqgb")
}

/// Integrates the configured run, writing the diagnostics CSV, checkpoints and a summary
/// into the output directory. Returns the exit code.
pub fn cmd_run(cfg: &RunConfig) -> Result<(i32, RunSummary)> {
    cfg.validate()?;
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let g = cfg.geometry.build()?;
    let theta0 = cfg.initial.build(&g, cfg.seed)?;
    let stepper = Stepper::new(&g, &cfg.solver)?;
    let hash = cfg.trajectory_hash()?;
    let mut writer = RecordWriter::new(BufWriter::new(File::create(dir.join(DIAGNOSTICS_FILE))?), &cfg.diagnostics, cfg.seed)?;
    let mut index = 0usize;
    let mut last = SolverState::new(theta0.clone());
    let every = cfg.output.checkpoint_every;
    let outcome = run(&stepper, &theta0, &cfg.diagnostics, |state, rec| {
        if !rec.is_finite() {
            return Err(Error::Blowup { t: last.t, steps: last.steps, coeffs: Box::new(last.theta.coeffs().clone()) });
        }
        writer.write(rec)?;
        if every > 0 && index % every == 0 {
            write_checkpoint(&dir.join(checkpoint_name(index)), &Checkpoint::from_state(state, hash))?;
        }
        last = state.clone();
        index += 1;
        Ok(())
    });
    let (code, summary) = match outcome {
        Ok(out) => {
            let fin = out.final_state();
            write_checkpoint(&dir.join(FINAL_CHECKPOINT), &Checkpoint::from_state(fin, hash))?;
            let holder = if cfg.output.holder_monitor {
                Some(holder_monitor(&out.records, cfg.output.holder_alpha, cfg.output.holder_p, cfg.output.holder_fit_fraction)?)
            } else {
                None
            };
            let violated = out.overshoot.violated() || holder.as_ref().is_some_and(|h| !h.pass);
            if let Some(h) = holder.as_ref().filter(|h| !h.pass) {
                log::warn!("holder monitor exceeded its bound at t = {:?}", h.violations);
            }
            let code = if violated { EXIT_MONITOR } else { EXIT_OK };
            let summary = RunSummary {
                exit_code: code,
                t: fin.t,
                steps: fin.steps,
                records: out.records.len(),
                ledger: Some(out.ledger),
                overshoot: Some(out.overshoot),
                holder,
                halvings: out.halvings,
                min_dt: out.min_dt,
                error: None,
            };
            (code, summary)
        }
        Err(Error::Blowup { t, steps, coeffs }) => {
            let good = SolverState { t, steps, theta: SpectralField::from_coeffs(&g, *coeffs)? };
            write_checkpoint(&dir.join(LAST_GOOD_CHECKPOINT), &Checkpoint::from_state(&good, hash))?;
            log::error!("non-finite state after t = {t}; last good state written to {LAST_GOOD_CHECKPOINT}");
            (EXIT_NAN, nan_summary(t, steps, index, format!("non-finite state after t = {t}")))
        }
        Err(e) => return Err(e),
    };
    std::fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok((code, summary))
}

fn nan_summary(t: f64, steps: u64, records: usize, error: String) -> RunSummary {
    RunSummary {
        exit_code: EXIT_NAN,
        t,
        steps,
        records,
        ledger: None,
        overshoot: None,
        holder: None,
        halvings: 0,
        min_dt: f64::NAN,
        error: Some(error),
    }
}

/// Outcome of one named check.
#[derive(Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub reports: Vec<InequalityReport>,
    pub error: Option<Error>,
}

impl CheckOutcome {
    pub fn pass(&self) -> bool {
        self.error.is_none() && !self.reports.is_empty() && self.reports.iter().all(|r| r.pass)
    }
}

/// Drift-free run used by the envelope and weighted checks.
fn drift_free_run(g: &Arc<Geometry>, theta0: &SpectralField, cfg: &RunConfig) -> Result<(Stepper, crate::solver::RunOutput)> {
    let solver = SolverConfig {
        drift: Drift::Prescribed { stream: Vec::new() },
        t_end: cfg.verify.t_end,
        ..cfg.solver.clone()
    };
    let stepper = Stepper::new(g, &solver)?;
    let out = run(&stepper, theta0, &DiagnosticsParams { normal_rate: false, alphas: Vec::new(), ..Default::default() }, |_, _| Ok(()))?;
    Ok((stepper, out))
}

/// Runs one named check.
pub fn run_check(name: &str, cfg: &RunConfig) -> Result<Vec<InequalityReport>> {
    let plan = &cfg.verify;
    let g = cfg.geometry.build()?;
    let seed = cfg.seed;
    let w1 = SpectralField::mode(&g, 1, 1, 1.0)?;
    let reports = match name {
        "cordoba" => vec![verify_cordoba_refinement(&g, plan.family_size, seed, &plan.cordoba_phi, plan.refine)?],
        "weighted_identity" => {
            let fields = standard_family(&g, plan.family_size, seed)?;
            let mut out = Vec::new();
            for (case, theta) in &fields {
                let mut r = verify_weighted_identity(theta, &w1, &plan.identity_phis, plan.refine, plan.identity_tolerance)?;
                r.name = format!("{}_{case}", r.name);
                r.seed = Some(seed);
                out.push(r);
            }
            out
        }
        "lambda_one" => vec![verify_lambda_one_lower(&g)?],
        "decay_envelope" => {
            let theta0 = SpectralField::from_modes(&g, &[(1, 1, 1.0), (1, 2, 0.3)])?;
            let (stepper, out) = drift_free_run(&g, &theta0, cfg)?;
            let v = stepper.velocity(&theta0);
            let b = boundary_ratio_nodal(&theta0).max_abs();
            vec![verify_decay_envelope(&out, &v, b, envelope_rate(&v, plan.refine).max(0.0), 1e-6)?]
        }
        "weighted_lp" => {
            let theta0 = cfg.initial.build(&g, seed)?;
            let (stepper, out) = drift_free_run(&g, &theta0, cfg)?;
            vec![verify_weighted_lp_control(&out, &stepper, plan.m, VelocitySplit::Whole, 0.05)?]
        }
        "velocity_dichotomy" => vec![verify_velocity_dichotomy(&g, plan.shells)?],
        "velocity_conditional" => {
            let fields: Vec<_> = (0..plan.family_size as u64)
                .map(|k| Ok((format!("random{k}"), random_field(&g, 5, 6, seed + k)?)))
                .collect::<Result<_>>()?;
            let mut r = verify_velocity_conditional_bound(&fields, plan.p)?;
            r.seed = Some(seed);
            vec![r]
        }
        "short_time" => {
            let theta = random_field(&g, 5, 6, seed)?;
            let mut r = verify_short_time_smallness(&theta, &plan.short_time_levels)?;
            r.seed = Some(seed);
            vec![r]
        }
        "finite_difference_velocity" => {
            let theta = random_field(&g, 5, 6, seed)?;
            let side = g.side();
            let mut r = verify_finite_difference_velocity(
                &theta,
                [0.5 * side, 0.5 * side],
                0.25 * side,
                [g.spacing(), 0.0],
                plan.p,
                &plan.fd_eps,
            )?;
            r.seed = Some(seed);
            vec![r]
        }
        "normal_velocity" => vec![verify_normal_velocity_rate(&w1, f64::INFINITY, plan.alpha)?],
        "commutator" => {
            let fine = Geometry::square(plan.commutator_n, g.side(), g.corner_radius())?;
            let theta = SpectralField::mode(&fine, 1, 1, 1.0)?;
            vec![verify_commutator_scaling(&theta, plan.shells, plan.commutator_refine)?]
        }
        "kernel" => vec![verify_kernel_bounds(&g, &plan.kernel)?],
        "bridge" => {
            let fields = standard_family(&g, plan.family_size, seed)?;
            plan.bridge
                .iter()
                .map(|(m, p)| {
                    let mut r = verify_weight_norm_bridge(&fields, *m, *p)?;
                    r.seed = Some(seed);
                    Ok(r)
                })
                .collect::<Result<_>>()?
        }
        other => return Err(Error::Config(format!("unknown check `{other}` (known: {})", CHECKS.join(", ")))),
    };
    Ok(reports)
}

/// Runs the named checks (all when `names` is empty and the plan lists none), writing
/// `<report>.json` and `<report>_margins.csv` per report. Exit 0 iff every check passes.
pub fn cmd_verify(cfg: &RunConfig, names: &[String]) -> Result<(i32, Vec<CheckOutcome>)> {
    cfg.validate()?;
    let selected = if names.is_empty() { cfg.verify.selected() } else { names.to_vec() };
    let unknown: Vec<String> = selected
        .iter()
        .filter(|n| !CHECKS.contains(&n.as_str()))
        .map(|n| format!("unknown check `{n}` (known: {})", CHECKS.join(", ")))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Invalid(unknown));
    }
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let mut outcomes = Vec::new();
    for name in selected {
        let start = std::time::Instant::now();
        let outcome = match run_check(&name, cfg) {
            Ok(reports) => {
                for r in &reports {
                    r.write_to(&dir)?;
                }
                CheckOutcome { name, reports, error: None }
            }
            Err(e) => {
                log::error!("{name}: {e}");
                CheckOutcome { name, reports: Vec::new(), error: Some(e) }
            }
        };
        log::info!("{}: {} in {:.1} s", outcome.name, if outcome.pass() { "pass" } else { "FAIL" }, start.elapsed().as_secs_f64());
        outcomes.push(outcome);
    }
    let code = if outcomes.iter().all(CheckOutcome::pass) { EXIT_OK } else { EXIT_FAILED };
    Ok((code, outcomes))
}

/// Recomputes the diagnostics record of a checkpoint and writes it as a one-row CSV.
/// With `dump`, the nodal values are also written as `x,y,value` rows.
pub fn cmd_diag<W: Write>(checkpoint: &Path, cfg: &RunConfig, out: W, dump: Option<&Path>) -> Result<i32> {
    let cp = read_checkpoint(checkpoint)?;
    let geometry = GeometryConfig { n: cp.n, side_length: cp.side, corner_radius: cfg.geometry.corner_radius };
    let g = geometry.build()?;
    if cfg.geometry.n == cp.n && cfg.trajectory_hash()? != cp.config_hash {
        log::warn!("checkpoint {} was written by a different configuration", checkpoint.display());
    }
    let state = cp.to_state(&g)?;
    let rec = record(&state.theta, state.t, &cfg.diagnostics)?;
    let mut writer = RecordWriter::new(out, &cfg.diagnostics, cfg.seed)?;
    writer.write(&rec)?;
    if let Some(path) = dump {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x [length]", "y [length]", "value"])?;
        let nodal = state.theta.nodal();
        for ((i, j), v) in nodal.values().indexed_iter() {
            w.serialize((g.coord(i), g.coord(j), *v))?;
        }
        w.flush()?;
    }
    Ok(if rec.is_finite() { EXIT_OK } else { EXIT_NAN })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("schema_version = 1\n").unwrap();
        assert_eq!(cfg.geometry.n, 128);
        assert_eq!(cfg.geometry.side_length, PI);
        assert_eq!(cfg.solver.cfl, 0.5);
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn small_grid_is_rejected() {
        let err = parse_config("schema_version = 1\n[geometry]\nn = 4\n").unwrap_err();
        assert!(err.to_string().contains("N >= 8"), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("schema_version = 1\n[solver]\ndtt = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("dtt"), "{err}");
        let err = parse_config("schema_version = 1\ncolour = 3\n").unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn all_violations_are_reported() {
        let text = "schema_version = 2\n[geometry]\nn = 4\n[solver]\ndt = -1.0\ncfl = 0.0\n[verify]\nnames = [\"nope\"]\n";
        match parse_config(text).unwrap_err() {
            Error::Invalid(v) => {
                assert!(v.len() >= 5, "{v:?}");
                assert!(v.iter().any(|s| s.contains("schema_version")));
                assert!(v.iter().any(|s| s.contains("nope")));
            }
            e => panic!("expected a list of violations, got {e}"),
        }
    }

    #[test]
    fn infinite_exponents_parse() {
        let cfg = parse_config("schema_version = 1\n[diagnostics]\np_values = [4.0, inf]\n").unwrap();
        assert!(cfg.diagnostics.p_values[1].is_infinite());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
