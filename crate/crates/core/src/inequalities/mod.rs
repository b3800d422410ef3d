//! Numerical verification of the pointwise and integral inequalities. Each check
//! produces an [`InequalityReport`] with per-sample margins (non-negative when the
//! inequality holds) and any fitted constants.

mod evolution;
mod fields;
mod kernel;
mod pointwise;
mod velocity;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::regression::LineFit;

pub use evolution::{
    bridge_constant, envelope_rate, verify_decay_envelope, verify_weight_norm_bridge, verify_weighted_lp_control,
    VelocitySplit,
};
pub use fields::{random_field, standard_family, truncated_constant};
pub use kernel::{verify_commutator_scaling, verify_kernel_bounds, KernelSamplePlan};
pub use pointwise::{
    lambda_of_constant, verify_cordoba, verify_cordoba_refinement, verify_lambda_one_lower, verify_weighted_identity, ConstantLambda,
};
pub use velocity::{
    short_time_scale, verify_finite_difference_velocity, verify_velocity_dichotomy, verify_normal_velocity_rate, verify_short_time_smallness,
    verify_velocity_conditional_bound, verify_velocity_log_bound, ShortTimeScale,
};

/// One evaluated instance of an inequality `lhs <= rhs` (or a scalar condition).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginSample {
    pub case: String,
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub samples: usize,
    pub min_margin: f64,
    pub fitted_constants: BTreeMap<String, f64>,
    pub regression: Option<LineFit>,
    pub pass: bool,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip)]
    pub margins: Vec<MarginSample>,
}

impl InequalityReport {
    pub fn constant(&self, key: &str) -> Option<f64> {
        self.fitted_constants.get(key).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-sample margins as CSV, preceded by a comment line with the seed.
    pub fn write_margins<W: Write>(&self, mut out: W) -> Result<()> {
        match self.seed {
            Some(s) => writeln!(out, "# {} seed={s}", self.name)?,
            None => writeln!(out, "# {}", self.name)?,
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["case", "x [length]", "y [length]", "t [time]", "lhs", "rhs", "margin"])?;
        for m in &self.margins {
            w.serialize((&m.case, m.x, m.y, m.t, m.lhs, m.rhs, m.margin))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<name>.json` and `<name>_margins.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.json", self.name));
        std::fs::write(&json, self.to_json()?)?;
        let csv = dir.join(format!("{}_margins.csv", self.name));
        self.write_margins(std::fs::File::create(&csv)?)?;
        Ok((json, csv))
    }
}

/// Accumulates margins and constants for one report.
#[derive(Debug, Clone)]
pub(crate) struct ReportBuilder {
    name: String,
    tolerance: f64,
    margins: Vec<MarginSample>,
    constants: BTreeMap<String, f64>,
    regression: Option<LineFit>,
    notes: Vec<String>,
    seed: Option<u64>,
}

impl ReportBuilder {
    pub(crate) fn new(name: &str, tolerance: f64) -> Self {
        ReportBuilder {
            name: name.to_string(),
            tolerance,
            margins: Vec::new(),
            constants: BTreeMap::new(),
            regression: None,
            notes: Vec::new(),
            seed: None,
        }
    }

    /// `lhs <= rhs` with margin `(rhs - lhs) / scale`.
    pub(crate) fn bound(&mut self, case: &str, x: [f64; 2], t: f64, lhs: f64, rhs: f64, scale: f64) {
        let margin = (rhs - lhs) / scale;
        self.margins.push(MarginSample { case: case.to_string(), x: x[0], y: x[1], t, lhs, rhs, margin });
    }

    /// Scalar condition `value >= threshold`.
    pub(crate) fn at_least(&mut self, case: &str, value: f64, threshold: f64) {
        self.bound(case, [f64::NAN, f64::NAN], f64::NAN, threshold, value, 1.0);
    }

    /// Scalar condition `value <= threshold`.
    pub(crate) fn at_most(&mut self, case: &str, value: f64, threshold: f64) {
        self.bound(case, [f64::NAN, f64::NAN], f64::NAN, value, threshold, 1.0);
    }

    /// Takes over the margins of a finished report, prefixing their cases.
    pub(crate) fn absorb(&mut self, prefix: &str, report: InequalityReport) {
        for mut m in report.margins {
            m.case = format!("{prefix}:{}", m.case);
            self.margins.push(m);
        }
        self.notes.extend(report.notes);
    }

    pub(crate) fn constant(&mut self, key: &str, value: f64) {
        self.constants.insert(key.to_string(), value);
    }

    pub(crate) fn regression(&mut self, fit: LineFit) {
        self.regression = Some(fit);
    }

    pub(crate) fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub(crate) fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub(crate) fn finish(self) -> InequalityReport {
        let mut notes = self.notes;
        let min_margin = if self.margins.is_empty() {
            notes.push("no admissible samples".into());
            f64::NEG_INFINITY
        } else if self.margins.iter().any(|m| m.margin.is_nan()) {
            notes.push("non-finite margin".into());
            f64::NAN
        } else {
            self.margins.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min)
        };
        InequalityReport {
            name: self.name,
            samples: self.margins.len(),
            min_margin,
            fitted_constants: self.constants,
            regression: self.regression,
            pass: min_margin >= -self.tolerance,
            tolerance: self.tolerance,
            seed: self.seed,
            notes,
            margins: self.margins,
        }
    }
}
