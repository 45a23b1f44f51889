//! Scenario configuration: a TOML document describing antennas, chain
//! options, signal content, seeds and check tolerances.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::frontend::{FilterSpec, QuantizerSpec, Zone};
use crate::hwestimate::DeviceTable;
use crate::rational::{Rational, RationalFreq};
use crate::resampler::DEFAULT_PASSBAND;
use crate::signal::{FreqRule, InterferenceKind, InterferenceSpec};

use super::ScenarioError;

/// Receiver band. Carried as metadata and for offset validation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    B1,
    B2,
    B3,
    B4,
    B5stream,
}

impl Band {
    /// Tuning resolution of the sample clock offset, in Hz.
    pub fn offset_resolution_hz(&self) -> i128 {
        match self {
            Band::B5stream => 1000,
            _ => 100,
        }
    }

    /// Full-scale sample rate of the band.
    pub fn nominal_rate_hz(&self) -> f64 {
        match self {
            Band::B1 | Band::B2 => 4.0e9,
            Band::B3 => 3.2e9,
            Band::B4 => 5.4e9,
            Band::B5stream => 6.0e9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantName {
    #[default]
    Float,
    Q4,
    Q8,
}

/// Interference tone added to one antenna's input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InterferenceOptions {
    /// `multiple * f_a` of the antenna's own clock.
    SelfClock {
        multiple: Rational,
        amplitude: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    /// `multiple * f_a` of another antenna's clock.
    CrossClock {
        source: String,
        multiple: Rational,
        amplitude: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    /// Fixed RF line, identical at every antenna.
    FixedRf {
        freq_hz: f64,
        amplitude: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    AliasProbe {
        freq_hz: f64,
        amplitude: f64,
        #[serde(default)]
        phase_rad: f64,
    },
}

impl InterferenceOptions {
    pub fn to_spec(&self) -> InterferenceSpec {
        match self {
            InterferenceOptions::SelfClock { multiple, amplitude, phase_rad } => InterferenceSpec {
                kind: InterferenceKind::SelfClockDerived,
                rule: FreqRule::ClockMultiple(*multiple),
                amplitude: *amplitude,
                phase_rad: *phase_rad,
            },
            InterferenceOptions::CrossClock { source, multiple, amplitude, phase_rad } => InterferenceSpec {
                kind: InterferenceKind::CrossClockLeak { source: source.clone() },
                rule: FreqRule::ClockMultiple(*multiple),
                amplitude: *amplitude,
                phase_rad: *phase_rad,
            },
            InterferenceOptions::FixedRf { freq_hz, amplitude, phase_rad } => InterferenceSpec {
                kind: InterferenceKind::FixedRf,
                rule: FreqRule::AbsoluteHz(*freq_hz),
                amplitude: *amplitude,
                phase_rad: *phase_rad,
            },
            InterferenceOptions::AliasProbe { freq_hz, amplitude, phase_rad } => InterferenceSpec {
                kind: InterferenceKind::AliasProbe,
                rule: FreqRule::AbsoluteHz(*freq_hz),
                amplitude: *amplitude,
                phase_rad: *phase_rad,
            },
        }
    }

    fn amplitude(&self) -> f64 {
        match self {
            InterferenceOptions::SelfClock { amplitude, .. }
            | InterferenceOptions::CrossClock { amplitude, .. }
            | InterferenceOptions::FixedRf { amplitude, .. }
            | InterferenceOptions::AliasProbe { amplitude, .. } => *amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaChainSpec {
    pub id: String,
    pub band: Band,
    pub f_nominal: RationalFreq,
    /// Signed sample clock offset in Hz; `f_a = f_nominal + offset`.
    pub offset: Rational,
    pub zone: Zone,
    #[serde(default)]
    pub quant: QuantName,
    #[serde(default = "one")]
    pub loading: f64,
    /// Allow offsets up to 10 MHz instead of 1 MHz.
    #[serde(default)]
    pub extended: bool,
    /// Sky band for this antenna; defaults to `signal.band_hz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_hz: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interference: Vec<InterferenceOptions>,
}

fn one() -> f64 {
    1.0
}

impl AntennaChainSpec {
    pub fn quantizer(&self) -> QuantizerSpec {
        match self.quant {
            QuantName::Float => QuantizerSpec::FLOAT,
            QuantName::Q4 => QuantizerSpec::q4(self.loading),
            QuantName::Q8 => QuantizerSpec::q8(self.loading),
        }
    }

    pub fn f_a(&self) -> Result<RationalFreq, ScenarioError> {
        self.f_a_with(&self.offset)
    }

    pub fn f_a_with(&self, offset: &Rational) -> Result<RationalFreq, ScenarioError> {
        Ok(self.f_nominal.offset(offset)?)
    }

    /// Check an offset against the band's tuning grid and range.
    pub fn check_offset(&self, offset: &Rational, path: &str) -> Result<(), ScenarioError> {
        let limit = if self.extended { 10_000_000 } else { 1_000_000 };
        if offset.abs() > Rational::integer(limit) {
            return Err(invalid(path, format!("|offset| {offset} Hz exceeds {limit} Hz")));
        }
        let res = self.band.offset_resolution_hz();
        let units = offset.checked_div(&Rational::integer(res))?;
        if units.denom() != 1 {
            return Err(invalid(path, format!("offset {offset} Hz is not a multiple of {res} Hz for {:?}", self.band)));
        }
        match self.f_a_with(offset) {
            Ok(f) if f.as_rational() > Rational::ZERO => Ok(()),
            _ => Err(invalid(path, "f_nominal + offset must be positive".into())),
        }
    }

    fn validate(&self, path: &str) -> Result<(), ScenarioError> {
        if self.id.is_empty() {
            return Err(invalid(&format!("{path}.id"), "empty antenna id".into()));
        }
        if self.f_nominal.as_rational() == Rational::ZERO {
            return Err(invalid(&format!("{path}.f_nominal"), "must be positive".into()));
        }
        self.check_offset(&self.offset, &format!("{path}.offset"))?;
        if !(self.loading > 0.0 && self.loading.is_finite()) {
            return Err(invalid(&format!("{path}.loading"), "must be positive".into()));
        }
        if let Some([lo, hi]) = self.band_hz {
            if !(lo >= 0.0 && lo < hi) {
                return Err(invalid(&format!("{path}.band_hz"), format!("empty band [{lo}, {hi}]")));
            }
        }
        for (i, it) in self.interference.iter().enumerate() {
            if !it.amplitude().is_finite() {
                return Err(invalid(&format!("{path}.interference[{i}].amplitude"), "must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Resampler, Hilbert transformer and mixer settings shared by every
/// antenna.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainOptions {
    pub taps: usize,
    pub phases: usize,
    /// Coefficient width; 0 keeps float taps.
    pub coeff_bits: u32,
    pub passband: [f64; 2],
    pub hilbert_taps: usize,
    pub hilbert_band: [f64; 2],
    pub lut_bits: u32,
    pub lut_word_bits: u32,
    /// Output sample 0 of every chain sits at `epoch_samples / f_c`.
    pub epoch_samples: u32,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            taps: 56,
            phases: 1024,
            coeff_bits: 19,
            passband: [DEFAULT_PASSBAND.0, DEFAULT_PASSBAND.1],
            hilbert_taps: 63,
            hilbert_band: [0.1, 0.9],
            lut_bits: 10,
            lut_word_bits: 20,
            epoch_samples: 128,
        }
    }
}

/// Sky content outside the signal band, still common to all antennas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakOptions {
    pub band_hz: [f64; 2],
    pub tones: usize,
    /// RMS before the anti-alias filter.
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalOptions {
    /// Sky tones; 0 disables the sky.
    pub tones: usize,
    pub band_hz: [f64; 2],
    /// Log-uniform amplitude spread; 0 gives equal amplitudes.
    pub amplitude_span_db: f64,
    /// Independent white noise per antenna.
    pub noise_rms: f64,
    /// Anti-alias response as `[freq_hz, gain_db]` breakpoints; empty
    /// means all-pass.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filter_db: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak: Option<LeakOptions>,
}

impl SignalOptions {
    pub fn filter(&self) -> FilterSpec {
        if self.filter_db.is_empty() {
            FilterSpec::AllPass
        } else {
            FilterSpec::PiecewiseDb(self.filter_db.iter().map(|p| (p[0], p[1])).collect())
        }
    }
}

/// One point of a parameter sweep: per-antenna offsets and window length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub label: String,
    pub offsets: Vec<Rational>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityOptions {
    pub samples: usize,
    pub segment_len: usize,
    /// Sky share of each antenna's variance.
    pub rho: f64,
    pub block: usize,
    pub coeff_bits: u32,
    pub f_a: RationalFreq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkipRepeatOptions {
    /// Input rate over output rate.
    pub ratio: Rational,
    pub outputs: usize,
    /// Taps above this fraction of the peak count toward the effective
    /// window.
    pub effective_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingOptions {
    pub f_a: RationalFreq,
    pub kapb_hz: RationalFreq,
    pub ticks: usize,
    pub jitter_clock_hz: RationalFreq,
    pub jitter_ns: f64,
    pub sync_clock_hz: RationalFreq,
    pub sync_phases: u32,
    pub sync_width_cycles: Rational,
    pub sync_steps: usize,
    pub fifo_offset: i64,
    pub fifo_spread: i64,
    pub fifo_window: usize,
    pub commutator_f_c: RationalFreq,
    pub demux: usize,
    pub commutator_ticks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceOptions {
    pub taps: u64,
    pub demux: u64,
    pub streams: u64,
    pub complex_output: bool,
    pub share_coeff_luts: bool,
    pub sample_bits: u64,
    pub coeff_lut_entries: u64,
    pub sample_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<DeviceTable>,
}

/// Per-column absolute tolerances for golden CSV comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenOptions {
    pub default_abs: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub columns: BTreeMap<String, f64>,
}

impl Default for GoldenOptions {
    fn default() -> Self {
        GoldenOptions { default_abs: 1e-9, columns: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Optional; must match the scenario being run when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub seed: u64,
    /// Common output rate.
    pub f_c: RationalFreq,
    /// Correlation window in output samples.
    pub samples: usize,
    /// Randomized window starts per measurement.
    pub windows: usize,
    pub chain: ChainOptions,
    pub signal: SignalOptions,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub antennas: Vec<AntennaChainSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_repeat: Option<SkipRepeatOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<ResourceOptions>,
    #[serde(default)]
    pub golden: GoldenOptions,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

pub(crate) fn invalid(path: &str, msg: String) -> ScenarioError {
    ScenarioError::ConfigInvalid { path: path.to_string(), msg }
}

/// Parse a TOML scenario config. Errors carry the path of the offending
/// field.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::ConfigInvalid { path, msg: e.into_inner().message().to_string() }
    })
}

impl ScenarioConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Tolerance by key, falling back to the scenario default.
    pub fn tol(&self, key: &str, defaults: &[(&str, f64)]) -> f64 {
        self.tolerances
            .get(key)
            .copied()
            .or_else(|| defaults.iter().find(|d| d.0 == key).map(|d| d.1))
            .expect("tolerance key declared")
    }

    /// Checks shared by every scenario.
    pub(crate) fn validate_common(&self, name: &str, tolerance_keys: &[(&str, f64)]) -> Result<(), ScenarioError> {
        if let Some(s) = &self.scenario {
            if s != name {
                return Err(invalid("scenario", format!("config is for {s:?}, not {name:?}")));
            }
        }
        if self.f_c.as_rational() == Rational::ZERO {
            return Err(invalid("f_c", "must be positive".into()));
        }
        let mut ids = BTreeSet::new();
        for (i, a) in self.antennas.iter().enumerate() {
            a.validate(&format!("antennas[{i}]"))?;
            if !ids.insert(a.id.as_str()) {
                return Err(invalid(&format!("antennas[{i}].id"), format!("duplicate id {:?}", a.id)));
            }
        }
        for (i, a) in self.antennas.iter().enumerate() {
            for (j, it) in a.interference.iter().enumerate() {
                if let InterferenceOptions::CrossClock { source, .. } = it {
                    if !ids.contains(source.as_str()) {
                        return Err(invalid(
                            &format!("antennas[{i}].interference[{j}].source"),
                            format!("unknown antenna {source:?}"),
                        ));
                    }
                }
            }
        }
        for (i, p) in self.sweep.iter().enumerate() {
            if p.offsets.len() != self.antennas.len() {
                return Err(invalid(
                    &format!("sweep[{i}].offsets"),
                    format!("{} offsets for {} antennas", p.offsets.len(), self.antennas.len()),
                ));
            }
            for (j, (o, a)) in p.offsets.iter().zip(&self.antennas).enumerate() {
                a.check_offset(o, &format!("sweep[{i}].offsets[{j}]"))?;
            }
            if p.samples == 0 {
                return Err(invalid(&format!("sweep[{i}].samples"), "must be positive".into()));
            }
        }
        let s = &self.signal;
        if !(s.band_hz[0] >= 0.0 && s.band_hz[0] < s.band_hz[1]) {
            return Err(invalid("signal.band_hz", "empty band".into()));
        }
        if !(s.noise_rms >= 0.0 && s.amplitude_span_db >= 0.0) {
            return Err(invalid("signal", "noise_rms and amplitude_span_db must be non-negative".into()));
        }
        if s.filter_db.windows(2).any(|w| !(w[0][0] < w[1][0])) {
            return Err(invalid("signal.filter_db", "breakpoints must be in ascending frequency".into()));
        }
        for key in self.tolerances.keys() {
            if !tolerance_keys.iter().any(|k| k.0 == key) {
                let known: Vec<&str> = tolerance_keys.iter().map(|k| k.0).collect();
                return Err(invalid(&format!("tolerances.{key}"), format!("unknown tolerance; known: {}", known.join(", "))));
            }
        }
        Ok(())
    }
}
