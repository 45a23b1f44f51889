//! FFT helpers: windowed block spectra, cross-spectra and peak search.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

pub fn plan_fft(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

/// Power spectrum of `x` (no window), bin `k` at `k / n` cycles per sample.
pub fn power_spectrum(x: &[Complex64]) -> Vec<f64> {
    let mut buf = x.to_vec();
    plan_fft(x.len()).process(&mut buf);
    buf.iter().map(|v| v.norm_sqr()).collect()
}

/// Largest bin and its value.
pub fn peak(p: &[f64]) -> (usize, f64) {
    p.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a })
}

/// Averaged cross-spectral sums over Hann-windowed blocks of two complex
/// sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrum {
    pub block: usize,
    pub sab: Vec<Complex64>,
    pub saa: Vec<f64>,
    pub sbb: Vec<f64>,
    pub blocks: usize,
}

impl CrossSpectrum {
    pub fn new(block: usize) -> Self {
        CrossSpectrum {
            block,
            sab: vec![Complex64::new(0.0, 0.0); block],
            saa: vec![0.0; block],
            sbb: vec![0.0; block],
            blocks: 0,
        }
    }

    /// Accumulate blocks starting every `hop` samples.
    pub fn add_complex(&mut self, a: &[Complex64], b: &[Complex64], hop: usize) {
        let n = self.block;
        let fft = plan_fft(n);
        let w = hann(n);
        let mut fa = vec![Complex64::new(0.0, 0.0); n];
        let mut fb = fa.clone();
        let len = a.len().min(b.len());
        let mut s = 0;
        while s + n <= len {
            for i in 0..n {
                fa[i] = a[s + i] * w[i];
                fb[i] = b[s + i] * w[i];
            }
            fft.process(&mut fa);
            fft.process(&mut fb);
            for k in 0..n {
                self.sab[k] += fa[k] * fb[k].conj();
                self.saa[k] += fa[k].norm_sqr();
                self.sbb[k] += fb[k].norm_sqr();
            }
            self.blocks += 1;
            s += hop;
        }
    }

    /// Accumulate two real sequences with one complex FFT per block.
    /// Only bins `0..=n/2` are meaningful.
    pub fn add_real(&mut self, a: &[f64], b: &[f64], hop: usize) {
        let n = self.block;
        let fft = plan_fft(n);
        let w = hann(n);
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        let len = a.len().min(b.len());
        let mut s = 0;
        while s + n <= len {
            for i in 0..n {
                z[i] = Complex64::new(a[s + i] * w[i], b[s + i] * w[i]);
            }
            fft.process(&mut z);
            for k in 0..=n / 2 {
                let zk = z[k];
                let zm = z[(n - k) % n].conj();
                let fa = 0.5 * (zk + zm);
                let fb = Complex64::new(0.0, -0.5) * (zk - zm);
                self.sab[k] += fa * fb.conj();
                self.saa[k] += fa.norm_sqr();
                self.sbb[k] += fb.norm_sqr();
            }
            self.blocks += 1;
            s += hop;
        }
    }

    pub fn merge(&mut self, o: &CrossSpectrum) {
        for k in 0..self.block {
            self.sab[k] += o.sab[k];
            self.saa[k] += o.saa[k];
            self.sbb[k] += o.sbb[k];
        }
        self.blocks += o.blocks;
    }

    /// Normalized real coherence per bin, `Re(Sab) / sqrt(Saa Sbb)`.
    pub fn coherence_re(&self) -> Vec<f64> {
        (0..self.block).map(|k| self.sab[k].re / (self.saa[k] * self.sbb[k]).sqrt()).collect()
    }

    /// Bin frequency in cycles per sample, in `[-0.5, 0.5)`.
    pub fn bin_freq(&self, k: usize) -> f64 {
        let f = k as f64 / self.block as f64;
        if f >= 0.5 {
            f - 1.0
        } else {
            f
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_pair_matches_complex_path() {
        let n = 4096;
        let a: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).sin() + 0.1 * (1.7 * i as f64).cos()).collect();
        let b: Vec<f64> = (0..n).map(|i| (0.3 * i as f64 + 0.4).sin()).collect();
        let mut r = CrossSpectrum::new(256);
        r.add_real(&a, &b, 64);
        let ca: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let cb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut c = CrossSpectrum::new(256);
        c.add_complex(&ca, &cb, 64);
        assert_eq!(r.blocks, c.blocks);
        for k in 0..=128 {
            assert!((r.sab[k] - c.sab[k]).norm() < 1e-9 * (1.0 + c.sab[k].norm()));
            assert!((r.saa[k] - c.saa[k]).abs() < 1e-9 * (1.0 + c.saa[k]));
        }
    }

    #[test]
    fn tone_peak_bin() {
        let x: Vec<Complex64> = (0..64).map(|i| Complex64::from_polar(1.0, 2.0 * PI * 5.0 * i as f64 / 64.0)).collect();
        let (k, v) = peak(&power_spectrum(&x));
        assert_eq!(k, 5);
        assert!((v - 64.0 * 64.0).abs() < 1e-6);
    }
}
