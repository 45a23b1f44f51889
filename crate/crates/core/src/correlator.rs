//! Cross-correlation of aligned streams and the closed-form coherence
//! budgets.
//!
//! `rho = sum(a b*) / sqrt(sum|a|^2 sum|b|^2)` over the overlapping valid
//! samples of two streams on the same grid. Sums are formed in fixed
//! blocks of [`BLOCK`] samples and the block sums combined in order, so a
//! run split at block boundaries and merged reproduces the single-pass
//! result exactly.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::frontend::{ComplexSampleStream, SampleStream};
use crate::mixer::{analytic, HilbertPair, MixerError};
use crate::rational::RationalError;

pub const BLOCK: usize = 4096;

#[derive(Debug, Error)]
pub enum CorrError {
    #[error("sample rates differ: {0} vs {1} Hz")]
    RateMismatch(String, String),
    #[error("stream epochs are not on a common sample grid")]
    GridMismatch,
    #[error("overlap of {available} valid samples is shorter than the {needed} requested")]
    InsufficientOverlap { available: usize, needed: usize },
    #[error("delta_f * T = {0} is at or below 1/pi, outside the envelope approximation")]
    EnvelopeRegimeViolated(f64),
    #[error(transparent)]
    Mixer(#[from] MixerError),
    #[error(transparent)]
    Rational(#[from] RationalError),
}

/// Per-block correlation sums.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlockSums {
    pub sab: Complex64,
    pub saa: f64,
    pub sbb: f64,
    pub n: u64,
}

/// Correlation sums kept per block; totals fold the blocks in order, so the
/// result does not depend on how the blocks were produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrAccumulator {
    pub blocks: Vec<BlockSums>,
}

impl CorrAccumulator {
    /// Add one block of samples, summed in index order.
    pub fn add_block(&mut self, a: &[Complex64], b: &[Complex64]) {
        let mut s = BlockSums::default();
        for (x, y) in a.iter().zip(b) {
            s.sab += x * y.conj();
            s.saa += x.norm_sqr();
            s.sbb += y.norm_sqr();
        }
        s.n = a.len().min(b.len()) as u64;
        self.blocks.push(s);
    }

    /// Add samples in [`BLOCK`]-sized pieces.
    pub fn add(&mut self, a: &[Complex64], b: &[Complex64]) {
        for (x, y) in a.chunks(BLOCK).zip(b.chunks(BLOCK)) {
            self.add_block(x, y);
        }
    }

    /// Append a later segment's blocks.
    pub fn merge(&mut self, later: &CorrAccumulator) {
        self.blocks.extend_from_slice(&later.blocks);
    }

    pub fn totals(&self) -> BlockSums {
        self.blocks.iter().fold(BlockSums::default(), |mut t, b| {
            t.sab += b.sab;
            t.saa += b.saa;
            t.sbb += b.sbb;
            t.n += b.n;
            t
        })
    }

    pub fn rho(&self) -> Complex64 {
        let t = self.totals();
        t.sab / (t.saa * t.sbb).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub rho: Complex64,
    pub magnitude: f64,
    /// Integration time, `n_samples / rate`.
    pub t_seconds: f64,
    pub n_samples: usize,
    /// `-10 log10 |rho|`, in the same convention as
    /// [`washing_suppression_db`].
    pub suppression_db: f64,
    /// Index into stream `a` of the first correlated sample.
    pub start_a: usize,
    /// Loss per frequency, when a sub-band analysis was run.
    pub per_freq_loss: Option<Vec<(f64, f64)>>,
}

/// Offset of `b`'s sample grid relative to `a`'s: `b[k]` lines up with
/// `a[k + offset]`.
pub fn grid_offset(a: &ComplexSampleStream, b: &ComplexSampleStream) -> Result<i64, CorrError> {
    if a.rate != b.rate {
        return Err(CorrError::RateMismatch(a.rate.to_string(), b.rate.to_string()));
    }
    let d = b.epoch.checked_sub(&a.epoch)?.checked_mul(&a.rate.as_rational())?;
    if d.denom() != 1 {
        return Err(CorrError::GridMismatch);
    }
    Ok(d.numer() as i64)
}

/// Valid overlap as a range of indices into `a`, plus the grid offset.
pub fn overlap(a: &ComplexSampleStream, b: &ComplexSampleStream) -> Result<(std::ops::Range<usize>, i64), CorrError> {
    let off = grid_offset(a, b)?;
    let lo = (a.valid.start as i64).max(b.valid.start as i64 + off).max(0);
    let hi = (a.valid.end as i64).min(b.valid.end as i64 + off);
    Ok((lo as usize..(hi.max(lo)) as usize, off))
}

/// Correlate `n` samples starting `start` samples into the valid overlap.
pub fn correlate_window(a: &ComplexSampleStream, b: &ComplexSampleStream, start: usize, n: usize) -> Result<CorrelationReport, CorrError> {
    let (ov, off) = overlap(a, b)?;
    if n == 0 || start + n > ov.len() {
        return Err(CorrError::InsufficientOverlap { available: ov.len().saturating_sub(start), needed: n });
    }
    let s = ov.start + start;
    let sb = (s as i64 - off) as usize;
    let mut acc = CorrAccumulator::default();
    acc.add(&a.data[s..s + n], &b.data[sb..sb + n]);
    let rho = acc.rho();
    Ok(CorrelationReport {
        rho,
        magnitude: rho.norm(),
        t_seconds: n as f64 / a.rate.to_f64(),
        n_samples: n,
        suppression_db: -10.0 * rho.norm().log10(),
        start_a: s,
        per_freq_loss: None,
    })
}

/// Correlate over `floor(t_seconds * rate)` samples from the start of the
/// valid overlap.
pub fn correlate(a: &ComplexSampleStream, b: &ComplexSampleStream, t_seconds: f64) -> Result<CorrelationReport, CorrError> {
    let n = (t_seconds * a.rate.to_f64()).floor() as usize;
    correlate_window(a, b, 0, n)
}

/// Correlate real streams through their analytic signals. The Hilbert
/// edges are excluded from the valid range.
pub fn correlate_real(a: &SampleStream, b: &SampleStream, t_seconds: f64, hilbert: &HilbertPair) -> Result<CorrelationReport, CorrError> {
    let za = analytic(a, hilbert)?;
    let zb = analytic(b, hilbert)?;
    correlate(&za, &zb, t_seconds)
}

/// Suppression of a tone pair offset by `delta_f_hz`, integrated for
/// `t_seconds`, on the `1 / (delta_omega T)` envelope, in dB
/// (`10 log10`).
pub fn washing_suppression_db(delta_f_hz: f64, t_seconds: f64) -> Result<f64, CorrError> {
    let x = delta_f_hz * t_seconds;
    if !(x > 1.0 / PI) {
        return Err(CorrError::EnvelopeRegimeViolated(x));
    }
    Ok(10.0 * (2.0 * PI * x).log10())
}

/// Exact normalized correlation magnitude of two unit tones offset by
/// `delta_omega_t` radians over the window: `2 |sin(x/2)| / x`.
pub fn washing_magnitude(delta_omega_t: f64) -> f64 {
    if delta_omega_t == 0.0 {
        return 1.0;
    }
    2.0 * (0.5 * delta_omega_t).sin().abs() / delta_omega_t.abs()
}

/// Correlation loss from a uniform phase error spread of `+-phi` radians,
/// `1 - sin(phi) / phi`.
pub fn coherence_loss(phi: f64) -> f64 {
    let p2 = phi * phi;
    if phi.abs() < 1e-3 {
        // Series keeps full precision where 1 - sin/phi cancels.
        p2 / 6.0 - p2 * p2 / 120.0 + p2 * p2 * p2 / 5040.0
    } else {
        1.0 - phi.sin() / phi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{QuantizerSpec, Zone};
    use crate::rational::{Rational, RationalFreq};
    use proptest::prelude::*;

    fn cs(data: Vec<Complex64>, epoch: Rational) -> ComplexSampleStream {
        let n = data.len();
        ComplexSampleStream {
            rate: RationalFreq::hz(1000),
            epoch,
            data,
            quant: QuantizerSpec::FLOAT,
            zone: Zone::One,
            pps_marks: vec![],
            valid: 0..n,
        }
    }

    fn tone(n: usize, cyc: f64, ph: f64) -> Vec<Complex64> {
        (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * PI * cyc * k as f64 + ph)).collect()
    }

    #[test]
    fn washing_table() {
        // 10 log10(2 pi * 1000), 10 log10(2 pi * 100), and
        // 10 log10(2 pi * 1.4 * 10^-3 * 1000 s * 10^3).
        assert!((washing_suppression_db(1.0, 1000.0).unwrap() - 37.9818).abs() < 1e-4);
        assert!((washing_suppression_db(0.1, 1000.0).unwrap() - 27.9818).abs() < 1e-4);
        assert!((washing_suppression_db(1.4e-3 * 1000.0, 1000.0).unwrap() - 39.4431).abs() < 1e-4);
        assert!((washing_suppression_db(10_000.0, 0.14).unwrap() - 39.4431).abs() < 1e-4);
        assert!(matches!(washing_suppression_db(0.1, 1.0), Err(CorrError::EnvelopeRegimeViolated(_))));
    }

    #[test]
    fn coherence_loss_values() {
        let l = coherence_loss(PI / 1024.0);
        assert!((l - 1.5687e-6).abs() < 1e-9, "{l}");
        let tiny = coherence_loss(PI * 0.875 * 0.2e-4);
        assert!((tiny - (PI * 0.875 * 0.2e-4f64).powi(2) / 6.0).abs() < 1e-15);
        assert!((coherence_loss(0.5) - (1.0 - 0.5f64.sin() / 0.5)).abs() < 1e-15);
    }

    #[test]
    fn offset_tones_follow_sinc_envelope() {
        let n = 100_000;
        for dwt in [30.0, 300.0, 3000.0] {
            let d = dwt / (2.0 * PI * n as f64);
            let a = cs(tone(n, 0.1, 0.0), Rational::ZERO);
            let b = cs(tone(n, 0.1 + d, 0.7), Rational::ZERO);
            let r = correlate_window(&a, &b, 0, n).unwrap();
            let want = washing_magnitude(dwt);
            assert!((r.magnitude / want - 1.0).abs() < 0.05, "{} vs {want}", r.magnitude);
        }
    }

    #[test]
    fn grid_alignment_and_errors() {
        let a = cs(tone(100, 0.1, 0.0), Rational::ZERO);
        // b starts 5 samples later: b[k] is a[k + 5].
        let b = cs(tone(100, 0.1, 2.0 * PI * 0.1 * 5.0), Rational::new(5, 1000).unwrap());
        let r = correlate_window(&a, &b, 0, 95).unwrap();
        assert!((r.rho - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!(matches!(correlate_window(&a, &b, 0, 96), Err(CorrError::InsufficientOverlap { .. })));
        let c = cs(tone(100, 0.1, 0.0), Rational::new(1, 3000).unwrap());
        assert!(matches!(correlate_window(&a, &c, 0, 10), Err(CorrError::GridMismatch)));
        let mut d = a.clone();
        d.rate = RationalFreq::hz(999);
        assert!(matches!(correlate(&a, &d, 0.01), Err(CorrError::RateMismatch(..))));
    }

    #[test]
    fn independent_noise_is_uncorrelated() {
        let n = 1_000_000;
        let z = |seed| {
            let g = crate::frontend::gaussian(2 * n, seed);
            g.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect::<Vec<_>>()
        };
        let r = correlate_window(&cs(z(1), Rational::ZERO), &cs(z(2), Rational::ZERO), 0, n).unwrap();
        assert!(r.magnitude < 5.0 / (n as f64).sqrt(), "{}", r.magnitude);
        let same = correlate_window(&cs(z(3), Rational::ZERO), &cs(z(3), Rational::ZERO), 0, n).unwrap();
        assert!((same.rho - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((same.t_seconds - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn real_streams_via_analytic_signal() {
        let hp = crate::mixer::design_hilbert(63, (0.1, 0.9)).unwrap();
        let n = 20_000;
        let x: Vec<f64> = (0..n).map(|k| (2.0 * PI * 0.2 * k as f64).cos()).collect();
        let y: Vec<f64> = (0..n).map(|k| (2.0 * PI * 0.2 * k as f64 - 0.5).cos()).collect();
        let mk = |d| SampleStream::from_data(RationalFreq::hz(1000), Rational::ZERO, d, Zone::One);
        let r = correlate_real(&mk(x), &mk(y), 19.0, &hp).unwrap();
        assert!((r.magnitude - 1.0).abs() < 1e-3);
        assert!((r.rho.arg() - 0.5).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn scale_invariant(seed in 0u64..1000, ka in 1e-3f64..1e3, kb in 1e-3f64..1e3) {
            let g = crate::frontend::gaussian(4000, seed);
            let a: Vec<Complex64> = g.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
            let b: Vec<Complex64> = a.iter().rev().map(|v| v * 0.5 + a[0]).collect();
            let r1 = correlate_window(&cs(a.clone(), Rational::ZERO), &cs(b.clone(), Rational::ZERO), 0, 2000).unwrap();
            let sa: Vec<Complex64> = a.iter().map(|v| v * ka).collect();
            let sb: Vec<Complex64> = b.iter().map(|v| v * kb).collect();
            let r2 = correlate_window(&cs(sa, Rational::ZERO), &cs(sb, Rational::ZERO), 0, 2000).unwrap();
            prop_assert!((r1.rho - r2.rho).norm() < 1e-13);
        }

        #[test]
        fn magnitude_bounded(re in prop::collection::vec(-1f64..1.0, 64), im in prop::collection::vec(-1f64..1.0, 64)) {
            let a: Vec<Complex64> = re.iter().zip(&im).map(|(&x, &y)| Complex64::new(x, y)).collect();
            let b: Vec<Complex64> = im.iter().zip(&re).map(|(&x, &y)| Complex64::new(x + 0.1, -y)).collect();
            let r = correlate_window(&cs(a, Rational::ZERO), &cs(b, Rational::ZERO), 0, 64).unwrap();
            prop_assert!(r.magnitude <= 1.0 + 1e-12);
        }

        #[test]
        fn block_merge_is_exact(n in 1usize..40_000, cut in 0usize..10) {
            let a = tone(n, 0.013, 0.0);
            let b = tone(n, 0.0131, 0.3);
            let mut one = CorrAccumulator::default();
            one.add(&a, &b);
            let split = (cut * BLOCK).min(n);
            let mut x = CorrAccumulator::default();
            x.add(&a[..split], &b[..split]);
            let mut y = CorrAccumulator::default();
            y.add(&a[split..], &b[split..]);
            x.merge(&y);
            prop_assert_eq!(one, x);
        }
    }
}
