//! FPGA resource model for a demultiplexed resampler and frequency-shift
//! mixer: multipliers, M20K memory blocks and logic elements.
//!
//! The logic-element figure is a back-of-envelope model, not a synthesis
//! result: adder bits plus sample shift registers plus a fixed allowance
//! for control logic.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Power is deliberately not modeled.
pub const POWER_NOTE: &str = "power not estimated; a vendor spreadsheet estimate for this configuration is quoted as 20-50 W";

/// Entries of one M20K block at up to 20-bit words.
const M20K_ENTRIES: u64 = 1024;

#[derive(Debug, Error)]
pub enum HwError {
    #[error("invalid device table: {0}")]
    Device(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceTable {
    pub name: String,
    pub multipliers: u64,
    pub m20k: u64,
    pub les: u64,
}

impl Default for DeviceTable {
    fn default() -> Self {
        DeviceTable { name: "GX1650".into(), multipliers: 6290, m20k: 5851, les: 1_624_000 }
    }
}

impl DeviceTable {
    pub fn from_toml_str(s: &str) -> Result<DeviceTable, HwError> {
        let d: DeviceTable = toml::from_str(s).map_err(|e| HwError::Device(e.to_string()))?;
        if d.multipliers == 0 || d.m20k == 0 || d.les == 0 {
            return Err(HwError::Device("resource counts must be positive".into()));
        }
        Ok(d)
    }

    pub fn load(path: &Path) -> Result<DeviceTable, HwError> {
        DeviceTable::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HwConfig {
    pub taps: u64,
    pub demux: u64,
    pub streams: u64,
    /// Complex output needs a second (Hilbert) FIR per stream.
    pub complex_output: bool,
    /// The two FIRs of a complex stream read one coefficient LUT.
    pub share_coeff_luts: bool,
    pub sample_bits: u64,
    pub coeff_lut_entries: u64,
    /// Defaults to `2 * demux` (a sine and a cosine multiplier per slice).
    pub mixer_mults_per_stream: Option<u64>,
    /// Defaults to `taps`.
    pub adders_per_fir: Option<u64>,
    pub adder_avg_bits: f64,
    pub pipeline_factor: f64,
    pub misc_les: u64,
    /// Input sample rate, for the throughput figure.
    pub sample_rate_hz: f64,
}

impl Default for HwConfig {
    fn default() -> Self {
        HwConfig {
            taps: 56,
            demux: 8,
            streams: 4,
            complex_output: true,
            share_coeff_luts: true,
            sample_bits: 8,
            coeff_lut_entries: 1024,
            mixer_mults_per_stream: None,
            adders_per_fir: None,
            adder_avg_bits: 37.0,
            pipeline_factor: 2.0,
            misc_les: 20_000,
            sample_rate_hz: 6e9,
        }
    }
}

impl HwConfig {
    pub fn validate(&self) -> Result<(), HwError> {
        if self.taps == 0 || self.demux == 0 || self.streams == 0 {
            return Err(HwError::Config("taps, demux and streams must be positive".into()));
        }
        if !(self.adder_avg_bits >= 0.0 && self.pipeline_factor >= 0.0 && self.sample_rate_hz > 0.0) {
            return Err(HwError::Config("adder width, pipeline factor and sample rate must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Utilization {
    pub multipliers: f64,
    pub m20k: f64,
    pub les: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub fir_multipliers: u64,
    pub mixer_multipliers: u64,
    pub multipliers: u64,
    pub coeff_mems: u64,
    pub mixer_mems: u64,
    pub m20k: u64,
    pub adder_les: u64,
    pub shift_register_les: u64,
    pub misc_les: u64,
    pub les: u64,
    pub utilization: Utilization,
    /// Clock of the demultiplexed FIR logic.
    pub fir_clock_hz: f64,
    /// FIR multiplications per second; independent of the demux factor.
    pub fir_mults_per_second: f64,
}

pub fn estimate(cfg: &HwConfig, device: &DeviceTable) -> Estimate {
    let firs = if cfg.complex_output { 2 } else { 1 };
    let fir_multipliers = cfg.taps * cfg.demux * firs * cfg.streams;
    let mixer_multipliers = cfg.mixer_mults_per_stream.unwrap_or(2 * cfg.demux) * cfg.streams;
    let blocks_per_lut = cfg.coeff_lut_entries.div_ceil(M20K_ENTRIES);
    let luts_per_tap = if cfg.share_coeff_luts { 1 } else { firs };
    let coeff_mems = cfg.taps * cfg.demux * luts_per_tap * cfg.streams * blocks_per_lut;
    let mixer_mems = mixer_multipliers;
    let adders = cfg.adders_per_fir.unwrap_or(cfg.taps) as f64;
    let adder_les = (adders * cfg.adder_avg_bits * (cfg.demux * cfg.streams) as f64 * cfg.pipeline_factor).round() as u64;
    let shift_register_les = cfg.taps * cfg.sample_bits * cfg.demux * cfg.streams;
    let les = adder_les + shift_register_les + cfg.misc_les;
    let multipliers = fir_multipliers + mixer_multipliers;
    let m20k = coeff_mems + mixer_mems;
    let fir_clock_hz = cfg.sample_rate_hz / cfg.demux as f64;
    Estimate {
        fir_multipliers,
        mixer_multipliers,
        multipliers,
        coeff_mems,
        mixer_mems,
        m20k,
        adder_les,
        shift_register_les,
        misc_les: cfg.misc_les,
        les,
        utilization: Utilization {
            multipliers: multipliers as f64 / device.multipliers as f64,
            m20k: m20k as f64 / device.m20k as f64,
            les: les as f64 / device.les as f64,
        },
        fir_clock_hz,
        fir_mults_per_second: fir_multipliers as f64 * fir_clock_hz,
    }
}

impl Estimate {
    /// Human-readable summary, one quantity per line.
    pub fn report(&self, device: &DeviceTable) -> String {
        let u = &self.utilization;
        format!(
            "multipliers {} (fir {}, mixer {}) = {:.1}% of {}\n\
             m20k {} (coefficients {}, mixer {}) = {:.1}% of {}\n\
             les {} (adders {}, shift registers {}, misc {}) = {:.1}% of {}\n\
             fir clock {:.1} MHz, {:.4e} fir multiplies/s\n\
             {}\n",
            self.multipliers,
            self.fir_multipliers,
            self.mixer_multipliers,
            100.0 * u.multipliers,
            device.multipliers,
            self.m20k,
            self.coeff_mems,
            self.mixer_mems,
            100.0 * u.m20k,
            device.m20k,
            self.les,
            self.adder_les,
            self.shift_register_les,
            self.misc_les,
            100.0 * u.les,
            device.les,
            self.fir_clock_hz / 1e6,
            self.fir_mults_per_second,
            POWER_NOTE
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn band5_golden_values() {
        let d = DeviceTable::default();
        let e = estimate(&HwConfig::default(), &d);
        assert_eq!(e.fir_multipliers, 3584);
        assert_eq!(e.multipliers, 3648);
        assert_eq!(e.coeff_mems, 1792);
        assert_eq!(e.m20k, 1856);
        // 56 * 37 * 8 * 4 * 2 adder bits, 56 * 8 * 8 * 4 register bits.
        assert_eq!(e.adder_les, 132_608);
        assert_eq!(e.shift_register_les, 14_336);
        assert_eq!(e.les, 166_944);
        assert!((e.utilization.multipliers - 0.57996).abs() < 1e-5);
        assert!((e.utilization.m20k - 0.31721).abs() < 1e-5);
        assert!((e.utilization.les - 0.10280).abs() < 1e-5);
        assert_eq!(e.fir_clock_hz, 750e6);
        assert!(e.report(&d).contains("3648"));
    }

    #[test]
    fn small_real_fir() {
        let cfg = HwConfig { taps: 9, demux: 3, streams: 1, complex_output: false, share_coeff_luts: false, ..Default::default() };
        let e = estimate(&cfg, &DeviceTable::default());
        assert_eq!(e.fir_multipliers, 27);
        assert_eq!(e.coeff_mems, 27);
    }

    #[test]
    fn unshared_complex_luts_double() {
        let cfg = HwConfig { share_coeff_luts: false, ..Default::default() };
        assert_eq!(estimate(&cfg, &DeviceTable::default()).coeff_mems, 3584);
    }

    #[test]
    fn device_table_toml() {
        let d = DeviceTable::from_toml_str("name = \"small\"\nmultipliers = 100\nm20k = 50\nles = 1000\n").unwrap();
        assert_eq!(d.m20k, 50);
        assert!(DeviceTable::from_toml_str("name = \"x\"\nmultipliers = 0\nm20k = 1\nles = 1\n").is_err());
        assert!(DeviceTable::from_toml_str("name = \"x\"\nmultipliers = 1\nm20k = 1\nles = 1\nextra = 2\n").is_err());
    }

    proptest! {
        #[test]
        fn linear_in_streams(taps in 1u64..200, k in 1u64..16, s in 1u64..16, cx in any::<bool>()) {
            let base = HwConfig { taps, demux: k, streams: s, complex_output: cx, ..Default::default() };
            let d = DeviceTable::default();
            let a = estimate(&base, &d);
            let b = estimate(&HwConfig { streams: 2 * s, ..base.clone() }, &d);
            prop_assert_eq!(b.fir_multipliers, 2 * a.fir_multipliers);
        }

        #[test]
        fn throughput_independent_of_demux(taps in 1u64..200, k1 in 1u64..16, k2 in 1u64..16) {
            let d = DeviceTable::default();
            let a = estimate(&HwConfig { taps, demux: k1, ..Default::default() }, &d);
            let b = estimate(&HwConfig { taps, demux: k2, ..Default::default() }, &d);
            prop_assert!((a.fir_mults_per_second / b.fir_mults_per_second - 1.0).abs() < 1e-12);
        }
    }
}
