//! Frequency response of individual bank phases.
//!
//! Frequencies are fractions of the input Nyquist rate, so `f = 1` is
//! `f_a / 2` and `omega = pi * f` radians per sample. Delay error is the
//! phase delay of a phase minus its nominal delay `c + d_i`, measured from
//! the residual phase of `H(omega) * exp(j omega (c + d_i))` so no phase
//! unwrapping is needed.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::design::CoefficientBank;
use super::ResampleError;

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub freq: Vec<f64>,
    pub mag_db: Vec<f64>,
    /// Phase delay minus nominal delay, in input samples.
    pub delay_err: Vec<f64>,
}

/// Response of an arbitrary tap vector with nominal delay `delay`.
pub fn taps_response(h: &[f64], delay: f64, freq: &[f64]) -> Response {
    let mut mag_db = Vec::with_capacity(freq.len());
    let mut delay_err = Vec::with_capacity(freq.len());
    for &f in freq {
        let w = PI * f;
        if w == 0.0 {
            let s: f64 = h.iter().sum();
            let moment: f64 = h.iter().enumerate().map(|(m, v)| m as f64 * v).sum();
            mag_db.push(20.0 * s.abs().log10());
            delay_err.push(moment / s - delay);
            continue;
        }
        let hw: Complex64 = h.iter().enumerate().map(|(m, &v)| v * Complex64::from_polar(1.0, -w * m as f64)).sum();
        let rot = hw * Complex64::from_polar(1.0, w * delay);
        mag_db.push(20.0 * hw.norm().log10());
        delay_err.push(-rot.arg() / w);
    }
    Response { freq: freq.to_vec(), mag_db, delay_err }
}

/// Uniform grid of `n` points on `[lo, hi]`.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Response of bank phase `phase` on `n_freq` points over `[0, 1]`.
pub fn response(bank: &CoefficientBank, phase: usize, n_freq: usize) -> Result<Response, ResampleError> {
    if phase >= bank.phases() {
        return Err(ResampleError::BadSpec(format!("phase {phase} out of range")));
    }
    if n_freq < 2 {
        return Err(ResampleError::BadSpec("need at least 2 frequency points".into()));
    }
    let delay = bank.center() + bank.phase_offset(phase);
    Ok(taps_response(bank.phase(phase), delay, &grid(0.0, 1.0, n_freq)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankMetrics {
    /// Largest `|mag_db|` over the band and the phases examined.
    pub ripple_db: f64,
    /// Peak-to-peak delay error over the band and phases, in samples.
    pub delay_pp: f64,
    pub max_abs_delay_err: f64,
    pub band: (f64, f64),
}

/// Passband metrics over every `stride`-th phase.
pub fn bank_metrics(bank: &CoefficientBank, band: (f64, f64), n_freq: usize, stride: usize) -> BankMetrics {
    let freq = grid(band.0, band.1, n_freq);
    let per_phase: Vec<(f64, f64, f64)> = (0..bank.phases())
        .into_par_iter()
        .step_by(stride.max(1))
        .map(|i| {
            let r = taps_response(bank.phase(i), bank.center() + bank.phase_offset(i), &freq);
            let rip = r.mag_db.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let lo = r.delay_err.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = r.delay_err.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (rip, lo, hi)
        })
        .collect();
    let ripple_db = per_phase.iter().map(|p| p.0).fold(0.0, f64::max);
    let lo = per_phase.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = per_phase.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    BankMetrics { ripple_db, delay_pp: hi - lo, max_abs_delay_err: lo.abs().max(hi.abs()), band }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resampler::design::{design_bank, BankSpec, Window};

    #[test]
    fn pure_delay_has_zero_error() {
        let mut h = vec![0.0; 9];
        h[4] = 1.0;
        let r = taps_response(&h, 4.0, &grid(0.0, 1.0, 33));
        assert!(r.mag_db.iter().all(|v| v.abs() < 1e-12));
        assert!(r.delay_err.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn two_tap_average_response() {
        // (0.5, 0.5) has |H| = cos(omega / 2) and delay exactly 0.5.
        let r = taps_response(&[0.5, 0.5], 0.5, &grid(0.0, 0.9, 10));
        for (f, m) in r.freq.iter().zip(&r.mag_db) {
            let want = 20.0 * (PI * f / 2.0).cos().log10();
            assert!((m - want).abs() < 1e-12);
        }
        assert!(r.delay_err.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn default_bank_meets_response_targets() {
        let bank = design_bank(&BankSpec::default()).unwrap();
        let m = bank_metrics(&bank, bank.passband(), 64, 1);
        assert!(m.ripple_db < 0.01, "{m:?}");
        assert!(m.delay_pp < 1e-3, "{m:?}");
        // Zero-delay phase is flat at half Nyquist.
        let r = response(&bank, 512, 3).unwrap();
        assert!(r.mag_db[1].abs() < 1e-3);
        assert!(r.delay_err[1].abs() < 1e-4);
    }

    #[test]
    fn odd_bank_zero_phase_is_identity() {
        let bank = design_bank(&BankSpec::plain(55, 64, Window::Kaiser { beta: 7.0 })).unwrap();
        let r = response(&bank, 32, 17).unwrap();
        assert!(r.mag_db.iter().all(|v| v.abs() < 1e-9));
    }
}
