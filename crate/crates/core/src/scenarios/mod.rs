//! Named end-to-end experiments. Each scenario takes a [`ScenarioConfig`],
//! runs the relevant chain and returns a [`ScenarioReport`] of pass/fail
//! checks plus CSV files.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

mod bench;
mod chain;
pub mod config;
mod defaults;
pub mod golden;
mod linear;
pub mod plan;

pub use chain::landing_freq;
pub use config::{parse_config, AntennaChainSpec, Band, ScenarioConfig};
pub use plan::{plan_offsets, plan_offsets_with, LadderKind, OffsetPlan};

use crate::correlator::CorrError;
use crate::frontend::FrontendError;
use crate::hwestimate::HwError;
use crate::mixer::MixerError;
use crate::polyphase::DemuxError;
use crate::rational::RationalError;
use crate::resampler::ResampleError;
use crate::sensitivity::SensitivityError;
use crate::signal::SignalError;
use crate::timing::TimingError;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("invalid config at {path}: {msg}")]
    ConfigInvalid { path: String, msg: String },
    #[error("infeasible offset plan: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Rational(#[from] RationalError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Demux(#[from] DemuxError),
    #[error(transparent)]
    Mixer(#[from] MixerError),
    #[error(transparent)]
    Corr(#[from] CorrError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Hw(#[from] HwError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioReport {
    pub name: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    /// `(file name, contents)`, written in order.
    pub files: Vec<(String, String)>,
}

impl ScenarioReport {
    pub fn new(name: &str) -> Self {
        ScenarioReport { name: name.to_string(), ..Default::default() }
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, measured: f64, target: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, measured, target: target.into() });
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn file_contents(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_str())
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One line per check, then notes, then the overall verdict.
    pub fn summary(&self) -> String {
        let mut s = format!("scenario {}\n", self.name);
        for c in &self.checks {
            let v = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{v} {}: measured {} (target {})", c.name, fmt_num(c.measured), c.target);
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let ok = self.checks.iter().filter(|c| c.passed).count();
        let v = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "overall {v} ({ok}/{} checks)", self.checks.len());
        s
    }
}

/// Compact deterministic number formatting for reports.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 || (1e-3..1e7).contains(&x.abs()) {
        format!("{}", (x * 1e9).round() / 1e9)
    } else {
        format!("{x:.6e}")
    }
}

/// Write every report file plus `summary.txt` into `dir`.
pub fn write_report(report: &ScenarioReport, dir: &Path) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in &report.files {
        std::fs::write(dir.join(name), contents)?;
    }
    std::fs::write(dir.join("summary.txt"), report.summary())?;
    Ok(())
}

type Tolerances = &'static [(&'static str, f64)];

pub struct ScenarioInfo {
    pub name: &'static str,
    pub summary: &'static str,
    /// Tolerance keys accepted in `[tolerances]`, with defaults.
    pub tolerances: Tolerances,
    run: fn(&ScenarioConfig) -> Result<ScenarioReport, ScenarioError>,
    validate: fn(&ScenarioConfig) -> Result<(), ScenarioError>,
}

pub const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "selfclock-washout",
        summary: "clock-derived tone pair washed out by the offset, swept over delta-omega T",
        tolerances: linear::WASHOUT_TOL,
        run: linear::selfclock_washout,
        validate: linear::validate_washout,
    },
    ScenarioInfo {
        name: "zone1-vs-zone2-alias",
        summary: "out-of-band probe tones that correlate or wash out depending on Nyquist zone",
        tolerances: linear::ALIAS_TOL,
        run: linear::zone_alias,
        validate: linear::validate_alias,
    },
    ScenarioInfo {
        name: "relaxed-antialias",
        summary: "Zone 2 with a relaxed anti-alias filter; aliased leakage decorrelates",
        tolerances: linear::RELAXED_TOL,
        run: linear::relaxed_antialias,
        validate: linear::validate_relaxed,
    },
    ScenarioInfo {
        name: "frequency-shift",
        summary: "Zone 2 chains shifted by f_c - f_a: flat cross-spectrum phase, clock tones separated",
        tolerances: linear::SHIFT_TOL,
        run: linear::frequency_shift,
        validate: linear::validate_shift,
    },
    ScenarioInfo {
        name: "scfo-off",
        summary: "control run with zero offsets: common tone correlates at its SNR-predicted level",
        tolerances: linear::SCFO_OFF_TOL,
        run: linear::scfo_off,
        validate: linear::validate_scfo_off,
    },
    ScenarioInfo {
        name: "requant-loss",
        summary: "sensitivity loss of 4-bit -> resample -> 8-bit against 4-bit direct",
        tolerances: bench::REQUANT_TOL,
        run: bench::requant_loss,
        validate: bench::validate_requant,
    },
    ScenarioInfo {
        name: "filter-response",
        summary: "passband ripple and delay error of the coefficient bank",
        tolerances: bench::FILTER_TOL,
        run: bench::filter_response,
        validate: bench::validate_filter,
    },
    ScenarioInfo {
        name: "skip-repeat",
        summary: "skip events and impacted-sample fraction of a free-running resampler",
        tolerances: bench::SKIP_TOL,
        run: bench::skip_repeat,
        validate: bench::validate_skip,
    },
    ScenarioInfo {
        name: "timing",
        summary: "1PPS sample counts, synchronizer, FIFO alignment and commutator phase",
        tolerances: bench::TIMING_TOL,
        run: bench::timing,
        validate: bench::validate_timing,
    },
    ScenarioInfo {
        name: "resources",
        summary: "FPGA multiplier, memory and logic estimate for the Band 5 resampler",
        tolerances: bench::RESOURCE_TOL,
        run: bench::resources,
        validate: bench::validate_resources,
    },
];

pub fn scenario_info(name: &str) -> Result<&'static ScenarioInfo, ScenarioError> {
    SCENARIOS.iter().find(|s| s.name == name).ok_or_else(|| ScenarioError::UnknownScenario(name.to_string()))
}

/// The built-in configuration of a scenario, with every tolerance filled
/// in.
pub fn default_config(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    let info = scenario_info(name)?;
    let mut cfg = defaults::config(name);
    cfg.scenario = Some(name.to_string());
    cfg.tolerances = info.tolerances.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    Ok(cfg)
}

/// Validate the config for `name`, without running anything.
pub fn validate(name: &str, cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    let info = scenario_info(name)?;
    cfg.validate_common(name, info.tolerances)?;
    (info.validate)(cfg)
}

pub fn run_scenario(name: &str, cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let info = scenario_info(name)?;
    validate(name, cfg)?;
    (info.run)(cfg)
}

/// Build a CSV document from a header and rows.
pub(crate) fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<String, ScenarioError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}
