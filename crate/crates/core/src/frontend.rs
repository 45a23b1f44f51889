//! Per-antenna analog front end: anti-alias filtering, sampling on the
//! antenna's own clock, and sample quantization.
//!
//! Sample `k` of an antenna stream is taken at `epoch + k / f_a`, computed
//! exactly. In Zone 2 the real-valued samples are taken the same way; the
//! band simply aliases down, with spectral inversion.

use std::ops::Range;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::rational::{FracTracker, Rational, RationalError, RationalFreq};
use crate::signal::{TimePoint, ToneBankSignal};

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("tone at {freq_hz} Hz is outside Nyquist zone {zone} for f_a = {rate_hz} Hz")]
    BandZoneMismatch { freq_hz: f64, zone: u8, rate_hz: f64 },
    #[error("stream is already quantized")]
    AlreadyQuantized,
    #[error("invalid quantizer loading {0}")]
    BadLoading(f64),
    #[error("invalid filter: {0}")]
    BadFilter(String),
    #[error(transparent)]
    Rational(#[from] RationalError),
}

/// Nyquist zone of the sampled band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Zone {
    One,
    Two,
}

impl Zone {
    pub fn number(&self) -> u8 {
        match self {
            Zone::One => 1,
            Zone::Two => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Zone> {
        match n {
            1 => Some(Zone::One),
            2 => Some(Zone::Two),
            _ => None,
        }
    }
}

impl TryFrom<u8> for Zone {
    type Error = String;
    fn try_from(n: u8) -> Result<Zone, String> {
        Zone::from_number(n).ok_or_else(|| format!("unsupported Nyquist zone {n}; expected 1 or 2"))
    }
}

impl From<Zone> for u8 {
    fn from(z: Zone) -> u8 {
        z.number()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantKind {
    Float,
    /// 16-level Lloyd-Max quantizer for a Gaussian input.
    Q4Optimal,
    /// 256-level mid-rise uniform quantizer spanning +-4 sigma.
    Q8Uniform,
}

impl QuantKind {
    pub fn code(&self) -> u8 {
        match self {
            QuantKind::Float => 0,
            QuantKind::Q4Optimal => 4,
            QuantKind::Q8Uniform => 8,
        }
    }

    pub fn from_code(c: u8) -> Option<QuantKind> {
        match c {
            0 => Some(QuantKind::Float),
            4 => Some(QuantKind::Q4Optimal),
            8 => Some(QuantKind::Q8Uniform),
            _ => None,
        }
    }
}

/// Quantizer choice plus its design RMS (`loading`) in signal units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub kind: QuantKind,
    pub loading: f64,
}

impl QuantizerSpec {
    pub const FLOAT: QuantizerSpec = QuantizerSpec { kind: QuantKind::Float, loading: 1.0 };

    pub fn q4(loading: f64) -> Self {
        QuantizerSpec { kind: QuantKind::Q4Optimal, loading }
    }

    pub fn q8(loading: f64) -> Self {
        QuantizerSpec { kind: QuantKind::Q8Uniform, loading }
    }

    pub fn is_float(&self) -> bool {
        self.kind == QuantKind::Float
    }
}

/// Unit-variance Lloyd-Max design: positive thresholds (excluding 0 and
/// infinity) and positive reconstruction levels.
#[derive(Debug, Clone)]
pub struct LloydMax {
    pub thresholds: Vec<f64>,
    pub levels: Vec<f64>,
    pub iterations: usize,
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl LloydMax {
    /// Lloyd's fixed-point iteration for an even number of levels,
    /// converged until no level moves by more than `tol`.
    pub fn design(n_levels: usize, tol: f64) -> LloydMax {
        assert!(n_levels >= 2 && n_levels.is_multiple_of(2), "need an even level count");
        let half = n_levels / 2;
        let mut levels: Vec<f64> = (0..half).map(|i| (i as f64 + 0.5) * 3.0 / half as f64).collect();
        let mut thresholds = vec![0.0; half - 1];
        let mut iterations = 0;
        loop {
            iterations += 1;
            for i in 0..half - 1 {
                thresholds[i] = 0.5 * (levels[i] + levels[i + 1]);
            }
            let mut moved: f64 = 0.0;
            for i in 0..half {
                let a = if i == 0 { 0.0 } else { thresholds[i - 1] };
                let (pb, cb) = if i + 1 == half { (0.0, 1.0) } else { (norm_pdf(thresholds[i]), norm_cdf(thresholds[i])) };
                let c = (norm_pdf(a) - pb) / (cb - norm_cdf(a));
                moved = moved.max((c - levels[i]).abs());
                levels[i] = c;
            }
            if moved < tol || iterations >= 1_000_000 {
                break;
            }
        }
        LloydMax { thresholds, levels, iterations }
    }

    /// Mean-square error for a unit Gaussian input.
    pub fn distortion(&self) -> f64 {
        1.0 - self.output_power()
    }

    /// `E[Q(x)^2]`, which for a centroid quantizer equals `E[x Q(x)]`.
    pub fn output_power(&self) -> f64 {
        let half = self.levels.len();
        (0..half)
            .map(|i| {
                let a = if i == 0 { 0.5 } else { norm_cdf(self.thresholds[i - 1]) };
                let b = if i + 1 == half { 1.0 } else { norm_cdf(self.thresholds[i]) };
                2.0 * (b - a) * self.levels[i] * self.levels[i]
            })
            .sum()
    }

    /// Correlation efficiency for weak signals, `E[xQ]^2 / E[Q^2]`.
    pub fn efficiency(&self) -> f64 {
        self.output_power()
    }
}

/// The cached 16-level design used by [`QuantKind::Q4Optimal`].
pub fn lloyd_max_16() -> &'static LloydMax {
    static CELL: OnceLock<LloydMax> = OnceLock::new();
    CELL.get_or_init(|| LloydMax::design(16, 1e-13))
}

/// A concrete quantizer: codes are signed integers, levels are in signal
/// units.
#[derive(Debug, Clone)]
pub struct Quantizer {
    spec: QuantizerSpec,
    thresholds: Vec<f64>,
    levels: Vec<f64>,
    step: f64,
}

impl Quantizer {
    pub fn new(spec: QuantizerSpec) -> Result<Quantizer, FrontendError> {
        if !(spec.loading.is_finite() && spec.loading > 0.0) {
            return Err(FrontendError::BadLoading(spec.loading));
        }
        let (thresholds, levels, step) = match spec.kind {
            QuantKind::Float => (Vec::new(), Vec::new(), 0.0),
            QuantKind::Q4Optimal => {
                let lm = lloyd_max_16();
                let mut t: Vec<f64> = lm.thresholds.iter().rev().map(|x| -x * spec.loading).collect();
                t.push(0.0);
                t.extend(lm.thresholds.iter().map(|x| x * spec.loading));
                let mut l: Vec<f64> = lm.levels.iter().rev().map(|x| -x * spec.loading).collect();
                l.extend(lm.levels.iter().map(|x| x * spec.loading));
                (t, l, 0.0)
            }
            QuantKind::Q8Uniform => {
                let step = 8.0 * spec.loading / 256.0;
                let l = (-128..128).map(|k| (k as f64 + 0.5) * step).collect();
                (Vec::new(), l, step)
            }
        };
        Ok(Quantizer { spec, thresholds, levels, step })
    }

    pub fn spec(&self) -> QuantizerSpec {
        self.spec
    }

    /// Signed code: `[-8, 7]` for Q4, `[-128, 127]` for Q8.
    #[inline]
    pub fn code(&self, x: f64) -> i8 {
        match self.spec.kind {
            QuantKind::Float => 0,
            QuantKind::Q4Optimal => self.thresholds.partition_point(|&t| t <= x) as i8 - 8,
            QuantKind::Q8Uniform => (x / self.step).floor().clamp(-128.0, 127.0) as i8,
        }
    }

    #[inline]
    pub fn level(&self, code: i8) -> f64 {
        match self.spec.kind {
            QuantKind::Float => 0.0,
            QuantKind::Q4Optimal => self.levels[(code as i32 + 8) as usize],
            QuantKind::Q8Uniform => self.levels[(code as i32 + 128) as usize],
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self.spec.kind {
            QuantKind::Float => x,
            _ => self.level(self.code(x)),
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn max_level(&self) -> f64 {
        self.levels.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Real-valued stream sampled on one clock.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub rate: RationalFreq,
    /// Time of sample 0 in seconds.
    pub epoch: Rational,
    pub data: Vec<f64>,
    pub quant: QuantizerSpec,
    pub zone: Zone,
    /// Indices of samples flagged by a PPS pulse.
    pub pps_marks: Vec<usize>,
    /// Samples outside this range are filter edge transients.
    pub valid: Range<usize>,
}

impl SampleStream {
    pub fn from_data(rate: RationalFreq, epoch: Rational, data: Vec<f64>, zone: Zone) -> SampleStream {
        let n = data.len();
        SampleStream { rate, epoch, data, quant: QuantizerSpec::FLOAT, zone, pps_marks: Vec::new(), valid: 0..n }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Exact time of sample `k`.
    pub fn time_of(&self, k: i128) -> Result<Rational, RationalError> {
        self.epoch.checked_add(&Rational::new(k, 1)?.checked_div(&self.rate.as_rational())?)
    }

    pub fn valid_data(&self) -> &[f64] {
        &self.data[self.valid.clone()]
    }
}

/// Complex-valued stream, produced by the SSB mixer.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSampleStream {
    pub rate: RationalFreq,
    pub epoch: Rational,
    pub data: Vec<Complex64>,
    pub quant: QuantizerSpec,
    pub zone: Zone,
    pub pps_marks: Vec<usize>,
    pub valid: Range<usize>,
}

impl ComplexSampleStream {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// View a real stream as complex with zero imaginary part.
    pub fn from_real(s: &SampleStream) -> ComplexSampleStream {
        ComplexSampleStream {
            rate: s.rate,
            epoch: s.epoch,
            data: s.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            quant: s.quant,
            zone: s.zone,
            pps_marks: s.pps_marks.clone(),
            valid: s.valid.clone(),
        }
    }
}

fn check_zone(sig: &ToneBankSignal, f_a: f64, zone: Zone) -> Result<(), FrontendError> {
    let half = 0.5 * f_a;
    for t in sig.tones.iter().filter(|t| !t.out_of_band && t.amplitude != 0.0) {
        let ok = match zone {
            Zone::One => t.freq_hz >= 0.0 && t.freq_hz < half,
            Zone::Two => t.freq_hz > half && t.freq_hz < f_a,
        };
        if !ok {
            return Err(FrontendError::BandZoneMismatch { freq_hz: t.freq_hz, zone: zone.number(), rate_hz: f_a });
        }
    }
    Ok(())
}

const SAMPLE_CHUNK: usize = 1 << 14;

/// Sample `sig` at `epoch + k / f_a` for `k` in `0..n`.
pub fn sample(
    sig: &ToneBankSignal,
    f_a: RationalFreq,
    n: usize,
    zone: Zone,
    epoch: Rational,
) -> Result<SampleStream, FrontendError> {
    check_zone(sig, f_a.to_f64(), zone)?;
    let period = f_a.as_rational().recip()?;
    let starts: Vec<(usize, Rational)> = (0..n)
        .step_by(SAMPLE_CHUNK)
        .map(|k0| Ok((k0, epoch.checked_add(&period.mul_int(k0 as i128)?)?)))
        .collect::<Result<_, RationalError>>()?;
    let chunks: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&(k0, t0)| -> Result<Vec<f64>, RationalError> {
            let len = SAMPLE_CHUNK.min(n - k0);
            let mut tr = FracTracker::new(t0, period, 1)?;
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let (whole, rem, den) = tr.parts();
                out.push(sig.eval_at(TimePoint { whole: whole as i64, frac: rem as f64 / den as f64 }));
                tr.step();
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;
    Ok(SampleStream::from_data(f_a, epoch, chunks.concat(), zone))
}

/// Replace each sample by its quantized level.
pub fn quantize(stream: &SampleStream, spec: QuantizerSpec) -> Result<SampleStream, FrontendError> {
    if !stream.quant.is_float() {
        return Err(FrontendError::AlreadyQuantized);
    }
    let q = Quantizer::new(spec)?;
    let mut out = stream.clone();
    out.data.par_iter_mut().for_each(|x| *x = q.apply(*x));
    out.quant = spec;
    Ok(out)
}

/// Continuous-time anti-alias response, applied per tone.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterSpec {
    AllPass,
    BrickWall { lo_hz: f64, hi_hz: f64 },
    /// Gain in dB at breakpoints (Hz, ascending), linear in dB between
    /// them and flat beyond the ends.
    PiecewiseDb(Vec<(f64, f64)>),
}

impl FilterSpec {
    pub fn gain(&self, f: f64) -> f64 {
        match self {
            FilterSpec::AllPass => 1.0,
            FilterSpec::BrickWall { lo_hz, hi_hz } => {
                if f >= *lo_hz && f <= *hi_hz {
                    1.0
                } else {
                    0.0
                }
            }
            FilterSpec::PiecewiseDb(pts) => {
                let db = match pts.iter().position(|p| p.0 > f) {
                    None => pts.last().map(|p| p.1).unwrap_or(0.0),
                    Some(0) => pts[0].1,
                    Some(i) => {
                        let (f0, d0) = pts[i - 1];
                        let (f1, d1) = pts[i];
                        d0 + (d1 - d0) * (f - f0) / (f1 - f0)
                    }
                };
                10f64.powf(db / 20.0)
            }
        }
    }

    fn validate(&self) -> Result<(), FrontendError> {
        match self {
            FilterSpec::BrickWall { lo_hz, hi_hz } if !(lo_hz <= hi_hz) => {
                Err(FrontendError::BadFilter(format!("brick wall [{lo_hz}, {hi_hz}]")))
            }
            FilterSpec::PiecewiseDb(p) if p.is_empty() || p.windows(2).any(|w| !(w[0].0 < w[1].0)) => {
                Err(FrontendError::BadFilter("breakpoints must be non-empty and ascending".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Scale every tone by the filter gain at its frequency. Tones rejected by
/// a brick wall stay in the list with amplitude 0.
pub fn antialias(sig: &ToneBankSignal, filt: &FilterSpec) -> Result<ToneBankSignal, FrontendError> {
    filt.validate()?;
    let mut out = sig.clone();
    for t in &mut out.tones {
        t.amplitude *= filt.gain(t.freq_hz);
    }
    Ok(out)
}

/// Add white Gaussian noise of the given RMS.
pub fn add_noise(stream: &SampleStream, rms: f64, seed: u64) -> Result<SampleStream, FrontendError> {
    if !stream.quant.is_float() {
        return Err(FrontendError::AlreadyQuantized);
    }
    let mut out = stream.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for x in &mut out.data {
        let g: f64 = StandardNormal.sample(&mut rng);
        *x += rms * g;
    }
    Ok(out)
}

/// Unit-variance white Gaussian samples.
pub fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synth_signal, AmplitudeDist};
    use proptest::prelude::*;

    // Lloyd-Max 16-level Gaussian reconstruction levels, from the classic
    // tables (Max 1960), to five decimals.
    const MAX_TABLE: [f64; 8] = [0.1284, 0.3881, 0.6568, 0.9424, 1.2562, 1.6181, 2.0690, 2.7326];

    #[test]
    fn lloyd_max_matches_table() {
        let lm = lloyd_max_16();
        for (a, b) in lm.levels.iter().zip(MAX_TABLE) {
            assert!((a - b).abs() < 1.5e-4, "{a} vs {b}");
        }
        // Tabulated mean-square error for 16 levels is 0.009497.
        assert!((lm.distortion() - 0.0095).abs() < 2e-5);
    }

    /// Independent check of `E[Q^2]` by Simpson quadrature over the density.
    #[test]
    fn efficiency_matches_quadrature() {
        let q = Quantizer::new(QuantizerSpec::q4(1.0)).unwrap();
        let n = 400_000;
        let (a, b) = (-9.0, 9.0);
        let h = (b - a) / n as f64;
        let f = |x: f64| x * q.apply(x) * norm_pdf(x);
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let exq = s * h / 3.0;
        let eff = lloyd_max_16().efficiency();
        assert!((exq - eff).abs() < 1e-5, "{exq} vs {eff}");
        // Optimal uniform 4-bit spacing gives about 0.988; Lloyd-Max is
        // slightly better.
        assert!((eff - 0.988).abs() < 0.005);
        assert!((eff - 0.99050).abs() < 5e-5);
    }

    #[test]
    fn measured_efficiency_on_weak_correlation() {
        let rho: f64 = 0.2;
        let n = 4_000_000;
        let s = gaussian(n, 11);
        let na = gaussian(n, 12);
        let nb = gaussian(n, 13);
        let q = Quantizer::new(QuantizerSpec::q4(1.0)).unwrap();
        let (mut ff, mut qq, mut qa, mut qb) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let a = rho.sqrt() * s[i] + (1.0 - rho).sqrt() * na[i];
            let b = rho.sqrt() * s[i] + (1.0 - rho).sqrt() * nb[i];
            let (xa, xb) = (q.apply(a), q.apply(b));
            ff += a * b;
            qq += xa * xb;
            qa += xa * xa;
            qb += xb * xb;
        }
        let rho_f = ff / n as f64;
        let rho_q = qq / (qa * qb).sqrt();
        let eff = rho_q / rho_f;
        assert!((eff - lloyd_max_16().efficiency()).abs() < 2e-3, "{eff}");
    }

    #[test]
    fn q8_levels_and_clipping() {
        let q = Quantizer::new(QuantizerSpec::q8(1.0)).unwrap();
        assert_eq!(q.code(0.0), 0);
        assert_eq!(q.code(-1e-9), -1);
        assert_eq!(q.code(100.0), 127);
        assert_eq!(q.code(-100.0), -128);
        assert_eq!(q.level(0), 0.5 / 32.0);
        assert!((q.max_level() - (4.0 - 0.5 / 32.0)).abs() < 1e-15);
    }

    #[test]
    fn quantize_twice_fails() {
        let s = SampleStream::from_data(RationalFreq::hz(10), Rational::ZERO, vec![0.1, -0.3], Zone::One);
        let q = quantize(&s, QuantizerSpec::q4(1.0)).unwrap();
        assert!(matches!(quantize(&q, QuantizerSpec::q8(1.0)), Err(FrontendError::AlreadyQuantized)));
    }

    #[test]
    fn zone_checks() {
        let f_a = RationalFreq::hz(1000);
        let low = ToneBankSignal::single(1.0, 100.0, 0.0);
        let high = ToneBankSignal::single(1.0, 700.0, 0.0);
        assert!(sample(&low, f_a, 8, Zone::One, Rational::ZERO).is_ok());
        assert!(matches!(sample(&low, f_a, 8, Zone::Two, Rational::ZERO), Err(FrontendError::BandZoneMismatch { .. })));
        assert!(sample(&high, f_a, 8, Zone::Two, Rational::ZERO).is_ok());
        let mut tagged = high.clone();
        tagged.tones[0].out_of_band = true;
        assert!(sample(&tagged, f_a, 8, Zone::One, Rational::ZERO).is_ok());
    }

    #[test]
    fn zone_two_aliases_with_inversion() {
        // 700 Hz sampled at 1 kHz looks like 300 Hz with negated phase.
        let f_a = RationalFreq::hz(1000);
        let hi = sample(&ToneBankSignal::single(1.0, 700.0, 0.3), f_a, 64, Zone::Two, Rational::ZERO).unwrap();
        let lo = ToneBankSignal::single(1.0, 300.0, -0.3);
        for (k, x) in hi.data.iter().enumerate() {
            let t = Rational::new(k as i128, 1000).unwrap();
            assert!((x + lo.eval(&t)).abs() < 1e-9);
        }
    }

    #[test]
    fn sample_uses_exact_times() {
        let f_a: RationalFreq = "3000000000.1".parse().unwrap();
        let sig = ToneBankSignal::single(1.0, 1.0e9 + 0.37, 0.1);
        let s = sample(&sig, f_a, 40_000, Zone::One, Rational::integer(5)).unwrap();
        for k in [0usize, 17, 16_384, 39_999] {
            let t = s.time_of(k as i128).unwrap();
            assert!((s.data[k] - sig.eval(&t)).abs() < 1e-12);
        }
    }

    #[test]
    fn filters_scale_tones() {
        let sig = synth_signal(2, 8, (100.0, 900.0), AmplitudeDist::Constant).unwrap();
        let bw = antialias(&sig, &FilterSpec::BrickWall { lo_hz: 100.0, hi_hz: 500.0 }).unwrap();
        for (a, b) in sig.tones.iter().zip(&bw.tones) {
            assert_eq!(b.amplitude, if a.freq_hz <= 500.0 { a.amplitude } else { 0.0 });
        }
        let pw = FilterSpec::PiecewiseDb(vec![(0.0, 0.0), (1000.0, -20.0)]);
        assert!((pw.gain(500.0) - 10f64.powf(-0.5)).abs() < 1e-12);
        assert_eq!(pw.gain(5000.0), 0.1);
        assert!(antialias(&sig, &FilterSpec::PiecewiseDb(vec![])).is_err());
    }

    proptest! {
        #[test]
        fn q4_is_monotone_and_bounded(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let q = Quantizer::new(QuantizerSpec::q4(1.3)).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(q.apply(lo) <= q.apply(hi));
            prop_assert!((-8..=7).contains(&q.code(a)));
            prop_assert_eq!(q.apply(-a), -q.apply(a) * if a == 0.0 { -1.0 } else { 1.0 });
        }

        #[test]
        fn q8_error_within_half_step(x in -3.99f64..3.99) {
            let q = Quantizer::new(QuantizerSpec::q8(1.0)).unwrap();
            prop_assert!((q.apply(x) - x).abs() <= 0.5 * 8.0 / 256.0 + 1e-15);
        }
    }
}
