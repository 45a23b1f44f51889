//! Single-sideband frequency shifting.
//!
//! A real stream is made analytic with a Hilbert transformer (an
//! antisymmetric FIR whose even-offset taps are zero) and multiplied by
//! `exp(-j 2 pi shift t)`. The oscillator phase is kept as an exact
//! rational number of cycles and quantized to a `2^lut_bits` entry
//! sine/cosine table with `lut_word_bits` signed entries.
//!
//! In Zone 2 each antenna's band folds to `f - f_a`, so the fold point
//! moves with the antenna clock. Conjugating the analytic signal and
//! shifting by `f_c - f_a` puts the common sky at `f - f_c` on every
//! antenna.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::frontend::{ComplexSampleStream, SampleStream, Zone};
use crate::rational::{CycleCounter, Rational, RationalError, RationalFreq};
use crate::resampler::bessel_i0;
use crate::spectrum::{peak, power_spectrum};

#[derive(Debug, Error)]
pub enum MixerError {
    #[error("Hilbert transformer needs an odd tap count >= 3, got {0}")]
    BadTaps(usize),
    #[error("band ({0}, {1}) must satisfy 0 < lo < hi < 1")]
    BadBand(f64, f64),
    #[error("design infeasible: {0}")]
    DesignInfeasible(String),
    #[error("stream of {len} samples is shorter than the {taps}-tap Hilbert filter")]
    StreamTooShort { len: usize, taps: usize },
    #[error("LUT size {0} bits outside 2..=20")]
    BadLut(u32),
    #[error(transparent)]
    Rational(#[from] RationalError),
}

/// Image rejection below this is reported as an infeasible design.
pub const MIN_IMAGE_REJECTION_DB: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HilbertPair {
    /// Quadrature branch taps, antisymmetric about the center.
    pub taps: Vec<f64>,
    /// In-phase branch: a pure delay of `center` samples.
    pub center: usize,
    pub band: (f64, f64),
    pub beta: f64,
    pub ripple_db: f64,
    pub image_rejection_db: f64,
}

impl HilbertPair {
    /// Quadrature-branch amplitude at `f` (fraction of Nyquist); the ideal
    /// is 1 across the band, with phase exactly -90 degrees.
    pub fn amplitude(&self, f: f64) -> f64 {
        let w = PI * f;
        let c = self.center;
        (1..=c).map(|n| 2.0 * self.taps[c + n] * (w * n as f64).sin()).sum()
    }

    /// Complex response of the quadrature branch with the bulk delay
    /// removed.
    pub fn response(&self, f: f64) -> Complex64 {
        let w = PI * f;
        let c = self.center as f64;
        self.taps
            .iter()
            .enumerate()
            .map(|(m, &h)| h * Complex64::from_polar(1.0, -w * (m as f64 - c)))
            .sum()
    }
}

fn image_rejection_db(a: f64) -> f64 {
    20.0 * ((1.0 + a) / (1.0 - a).abs().max(1e-300)).log10()
}

/// Kaiser-windowed ideal Hilbert transformer for `band` (fractions of
/// Nyquist). The Kaiser `beta` follows from the attenuation the length can
/// support across the narrower of the two transition bands.
pub fn design_hilbert(n_taps: usize, band: (f64, f64)) -> Result<HilbertPair, MixerError> {
    if n_taps < 3 || n_taps.is_multiple_of(2) {
        return Err(MixerError::BadTaps(n_taps));
    }
    let (lo, hi) = band;
    if !(lo > 0.0 && lo < hi && hi < 1.0) {
        return Err(MixerError::BadBand(lo, hi));
    }
    let c = (n_taps - 1) / 2;
    let delta = lo.min(1.0 - hi);
    let atten = 14.36 * delta * (n_taps as f64 - 1.0) + 7.95;
    let beta = if atten > 50.0 {
        0.1102 * (atten - 8.7)
    } else if atten >= 21.0 {
        0.5842 * (atten - 21.0).powf(0.4) + 0.07886 * (atten - 21.0)
    } else {
        0.0
    };
    let half = (c + 1) as f64;
    let taps: Vec<f64> = (0..n_taps)
        .map(|m| {
            let n = m as i64 - c as i64;
            if n % 2 == 0 {
                return 0.0;
            }
            let r = n as f64 / half;
            2.0 / (PI * n as f64) * bessel_i0(beta * (1.0 - r * r).sqrt()) / bessel_i0(beta)
        })
        .collect();
    let mut hp = HilbertPair { taps, center: c, band, beta, ripple_db: 0.0, image_rejection_db: f64::INFINITY };
    for i in 0..=256 {
        let f = lo + (hi - lo) * i as f64 / 256.0;
        let a = hp.amplitude(f);
        hp.ripple_db = hp.ripple_db.max((20.0 * a.abs().log10()).abs());
        hp.image_rejection_db = hp.image_rejection_db.min(image_rejection_db(a));
    }
    if hp.image_rejection_db < MIN_IMAGE_REJECTION_DB {
        return Err(MixerError::DesignInfeasible(format!(
            "{n_taps} taps give {:.1} dB image rejection over ({lo}, {hi}), below {MIN_IMAGE_REJECTION_DB} dB",
            hp.image_rejection_db
        )));
    }
    Ok(hp)
}

/// Analytic signal `x + j H{x}`, time-aligned with the input. The first and
/// last `center` samples of the valid range become invalid.
pub fn analytic(stream: &SampleStream, hp: &HilbertPair) -> Result<ComplexSampleStream, MixerError> {
    let x = &stream.data;
    let n = x.len();
    let c = hp.center;
    if n < hp.taps.len() {
        return Err(MixerError::StreamTooShort { len: n, taps: hp.taps.len() });
    }
    // Only odd offsets are nonzero: im[k] = sum_{d odd} h_d (x[k-d] - x[k+d]).
    let odd: Vec<(usize, f64)> = (1..=c).step_by(2).map(|d| (d, hp.taps[c - d])).collect();
    let data = (0..n)
        .map(|k| {
            let mut im = 0.0;
            for &(d, h) in &odd {
                let xp = if k + d < n { x[k + d] } else { 0.0 };
                let xm = if k >= d { x[k - d] } else { 0.0 };
                im += h * (xp - xm);
            }
            Complex64::new(x[k], im)
        })
        .collect();
    let start = (stream.valid.start + c).min(n);
    let end = stream.valid.end.saturating_sub(c).max(start);
    Ok(ComplexSampleStream {
        rate: stream.rate,
        epoch: stream.epoch,
        data,
        quant: stream.quant,
        zone: stream.zone,
        pps_marks: stream.pps_marks.clone(),
        valid: start..end,
    })
}

/// Quantized sine/cosine table.
#[derive(Debug, Clone)]
pub struct PhaseLut {
    pub bits: u32,
    pub word_bits: u32,
    table: Vec<Complex64>,
}

impl PhaseLut {
    pub fn new(bits: u32, word_bits: u32) -> Result<PhaseLut, MixerError> {
        if !(2..=20).contains(&bits) {
            return Err(MixerError::BadLut(bits));
        }
        let size = 1usize << bits;
        let full = ((1i64 << (word_bits.clamp(2, 52) - 1)) - 1) as f64;
        let q = |v: f64| (v * full).round() / full;
        let table = (0..size)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / size as f64;
                Complex64::new(q(th.cos()), q(th.sin()))
            })
            .collect();
        Ok(PhaseLut { bits, word_bits, table })
    }

    #[inline]
    pub fn get(&self, index: usize) -> Complex64 {
        self.table[index]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixerConfig {
    /// Frequency moved down: a tone at `f` ends at `f - shift_hz`.
    pub shift_hz: Rational,
    /// Constant phase added to the oscillator, in cycles.
    pub phase_cycles: Rational,
    pub lut_bits: u32,
    pub lut_word_bits: u32,
    pub hilbert_taps: usize,
    pub hilbert_band: (f64, f64),
    /// Conjugate the analytic signal first (Zone 2 inversion).
    pub spectral_flip: bool,
    pub decimate2: bool,
}

impl Default for MixerConfig {
    fn default() -> Self {
        MixerConfig {
            shift_hz: Rational::ZERO,
            phase_cycles: Rational::ZERO,
            lut_bits: 10,
            lut_word_bits: 20,
            hilbert_taps: 63,
            hilbert_band: (0.1, 0.9),
            spectral_flip: false,
            decimate2: false,
        }
    }
}

impl MixerConfig {
    /// Settings that put a stream sampled at `f_a` in `zone`, already
    /// resampled to `f_c`, onto the common frequency grid.
    pub fn for_zone(zone: Zone, f_a: RationalFreq, f_c: RationalFreq) -> Result<MixerConfig, RationalError> {
        Ok(match zone {
            Zone::One => MixerConfig::default(),
            Zone::Two => MixerConfig {
                shift_hz: f_c.as_rational().checked_sub(&f_a.as_rational())?,
                spectral_flip: true,
                ..MixerConfig::default()
            },
        })
    }
}

/// Shift a complex stream by `cfg.shift_hz` using the quantized oscillator.
pub fn mix(input: &ComplexSampleStream, cfg: &MixerConfig) -> Result<ComplexSampleStream, MixerError> {
    let lut = PhaseLut::new(cfg.lut_bits, cfg.lut_word_bits)?;
    let rate = input.rate.as_rational();
    let start = cfg.phase_cycles.checked_sub(&cfg.shift_hz.checked_mul(&input.epoch)?)?;
    let step = -cfg.shift_hz.checked_div(&rate)?;
    let mut osc = CycleCounter::new(start, step, cfg.lut_bits)?;
    let mut out = input.clone();
    for z in &mut out.data {
        let v = if cfg.spectral_flip { z.conj() } else { *z };
        *z = v * lut.get(osc.index());
        osc.step();
    }
    if cfg.decimate2 {
        out.data = out.data.iter().step_by(2).copied().collect();
        out.rate = RationalFreq::try_from(rate.checked_div(&Rational::integer(2))?)?;
        out.valid = out.valid.start.div_ceil(2)..out.valid.end.div_ceil(2).max(out.valid.start.div_ceil(2));
        out.pps_marks = out.pps_marks.iter().map(|m| m / 2).collect();
    }
    Ok(out)
}

/// Analytic conversion followed by [`mix`].
pub fn ssb_shift(stream: &SampleStream, cfg: &MixerConfig) -> Result<ComplexSampleStream, MixerError> {
    let hp = design_hilbert(cfg.hilbert_taps, cfg.hilbert_band)?;
    mix(&analytic(stream, &hp)?, cfg)
}

/// Largest spur relative to the carrier for a pure oscillator at
/// `cycles_per_sample` through the quantized table, over `n` samples. A
/// 4-term Blackman-Harris window keeps leakage below the spurs; bins within
/// 8 of the carrier are excluded.
pub fn lut_spur_dbc(bits: u32, word_bits: u32, cycles_per_sample: Rational, n: usize) -> Result<f64, MixerError> {
    let lut = PhaseLut::new(bits, word_bits)?;
    let mut osc = CycleCounter::new(Rational::ZERO, cycles_per_sample, bits)?;
    let x: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let w = 0.35875 - 0.48829 * t.cos() + 0.14128 * (2.0 * t).cos() - 0.01168 * (3.0 * t).cos();
            let v = lut.get(osc.index()) * w;
            osc.step();
            v
        })
        .collect();
    let mut p = power_spectrum(&x);
    let (k, carrier) = peak(&p);
    for d in 0..=8usize {
        p[(k + d) % n] = 0.0;
        p[(k + n - d) % n] = 0.0;
    }
    let (_, spur) = peak(&p);
    Ok(10.0 * (spur / carrier).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::sample;
    use crate::signal::ToneBankSignal;

    #[test]
    fn default_design_meets_targets() {
        let hp = design_hilbert(63, (0.1, 0.9)).unwrap();
        assert!(hp.image_rejection_db > 90.0, "{hp:?}");
        assert!(hp.ripple_db < 1e-3);
        // Band center: unit amplitude, exactly -90 degrees.
        let h = hp.response(0.5);
        assert!((20.0 * h.norm().log10()).abs() < 0.01);
        assert!((h.arg().to_degrees() + 90.0).abs() < 0.1);
        // Half-band structure: even offsets are zero.
        for (m, t) in hp.taps.iter().enumerate() {
            if (m as i64 - 31) % 2 == 0 {
                assert_eq!(*t, 0.0);
            }
        }
    }

    #[test]
    fn wide_band_needs_more_taps() {
        assert!(matches!(design_hilbert(63, (0.05, 0.95)), Err(MixerError::DesignInfeasible(_))));
        assert!(design_hilbert(127, (0.05, 0.95)).is_ok());
        assert!(matches!(design_hilbert(64, (0.1, 0.9)), Err(MixerError::BadTaps(64))));
        assert!(matches!(design_hilbert(63, (0.5, 0.2)), Err(MixerError::BadBand(..))));
    }

    fn tone_stream(f: f64, rate: u64, n: usize) -> SampleStream {
        sample(&ToneBankSignal::single(1.0, f, 0.3), RationalFreq::hz(rate), n, Zone::One, Rational::ZERO).unwrap()
    }

    #[test]
    fn analytic_is_one_sided() {
        let s = tone_stream(2.5e5, 1_000_000, 4096);
        let hp = design_hilbert(63, (0.1, 0.9)).unwrap();
        let z = analytic(&s, &hp).unwrap();
        let v: Vec<Complex64> = z.data[z.valid.clone()][..2048].to_vec();
        let p = power_spectrum(&v);
        let (k, pk) = peak(&p);
        assert_eq!(k, 512);
        assert!(10.0 * (p[2048 - 512] / pk).log10() < -60.0);
    }

    #[test]
    fn shift_moves_tone() {
        let s = tone_stream(2.5e5, 1_000_000, 4096);
        let cfg = MixerConfig { shift_hz: Rational::integer(125_000), ..MixerConfig::default() };
        let z = ssb_shift(&s, &cfg).unwrap();
        let v: Vec<Complex64> = z.data[z.valid.clone()][..2048].to_vec();
        let (k, _) = peak(&power_spectrum(&v));
        assert_eq!(k, 256);
        let cfg2 = MixerConfig { decimate2: true, ..cfg };
        let d = ssb_shift(&s, &cfg2).unwrap();
        assert_eq!(d.rate, RationalFreq::hz(500_000));
        let v: Vec<Complex64> = d.data[d.valid.clone()][..1024].to_vec();
        assert_eq!(peak(&power_spectrum(&v)).0, 256);
    }

    #[test]
    fn zone_two_lands_on_common_frequency() {
        // Sky at 700 kHz seen by antennas clocked at 1.001 and 0.999 MHz,
        // both resampled in time to 1 MHz grids (here sampled directly).
        let f_c = RationalFreq::hz(1_000_000);
        let sky = ToneBankSignal::single(1.0, 7.0e5, 0.0);
        for f_a in [1_001_000u64, 999_000] {
            let fa = RationalFreq::hz(f_a);
            let s = sample(&sky, fa, 4096, Zone::Two, Rational::ZERO).unwrap();
            let cfg = MixerConfig::for_zone(Zone::Two, fa, f_c).unwrap();
            let z = ssb_shift(&s, &cfg).unwrap();
            // Resulting frequency in cycles/sample of the f_a stream should
            // be (700 kHz - f_c) / f_a.
            let k0 = z.valid.start;
            let mut rot = Complex64::new(0.0, 0.0);
            for k in k0..k0 + 2000 {
                rot += z.data[k + 1] * z.data[k].conj();
            }
            let got = rot.arg() / (2.0 * PI) * f_a as f64;
            assert!((got - (7.0e5 - 1.0e6)).abs() < 1.0, "{got}");
        }
    }

    #[test]
    fn lut_spur_floor() {
        let spur = lut_spur_dbc(10, 20, Rational::new(1234567, 8388608).unwrap(), 16384).unwrap();
        assert!(spur < -60.0, "{spur}");
    }
}
