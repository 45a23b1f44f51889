//! Correlated sensitivity loss of quantizing and resampling chains,
//! estimated by Monte Carlo against the same chain run in float.
//!
//! Each antenna sees a common Gaussian sky plus its own Gaussian noise,
//! scaled to unit total variance with sky fraction `rho`. Both antennas go
//! through the chain under test and through its float reference (same
//! resampling, no quantization). Per-bin coherences come from
//! Hann-windowed cross-spectra, and `loss(f) = 1 - coh_chain / coh_ref`.
//! Work is split into independently seeded segments, which also give the
//! batch-means standard error.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::frontend::{quantize, FrontendError, QuantizerSpec, SampleStream, Zone};
use crate::rational::{Rational, RationalFreq};
use crate::resampler::{resample_with, CoefficientBank, ResampleError, ResampleOptions, DEFAULT_PASSBAND};
use crate::spectrum::CrossSpectrum;

#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error("Monte Carlo standard error {se:.3e} exceeds the requested {tol:.3e}; use more samples")]
    InsufficientSamples { se: f64, tol: f64 },
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
}

/// One processing chain: quantize at the sampler, optionally resample,
/// optionally requantize the resampler output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    pub quant: QuantizerSpec,
    pub resample: bool,
    pub requant: Option<QuantizerSpec>,
}

impl ChainSpec {
    pub const FLOAT: ChainSpec = ChainSpec { quant: QuantizerSpec::FLOAT, resample: false, requant: None };

    /// 4-bit sampling, correlated directly.
    pub fn q4_direct() -> ChainSpec {
        ChainSpec { quant: QuantizerSpec::q4(1.0), resample: false, requant: None }
    }

    /// 4-bit sampling, resampled, requantized to 8 bits with headroom for
    /// the worst-case filter gain.
    pub fn q4_resampled_q8(bank: &CoefficientBank) -> ChainSpec {
        let q4 = QuantizerSpec::q4(1.0);
        ChainSpec { quant: q4, resample: true, requant: Some(QuantizerSpec::q8(headroom_loading(bank, q4))) }
    }

    fn reference(&self) -> ChainSpec {
        ChainSpec { quant: QuantizerSpec::FLOAT, resample: self.resample, requant: None }
    }
}

/// Q8 loading whose full scale (`4 * loading`) just holds the largest
/// filter output: the largest input level times the largest phase L1 norm.
pub fn headroom_loading(bank: &CoefficientBank, input: QuantizerSpec) -> f64 {
    let max_in = crate::frontend::Quantizer::new(input).map(|q| q.max_level()).unwrap_or(f64::INFINITY);
    max_in * bank.max_l1_norm() / 4.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityConfig {
    pub seed: u64,
    /// Total correlated samples per antenna.
    pub samples: usize,
    pub segment_len: usize,
    /// Sky share of each antenna's variance.
    pub rho: f64,
    pub block: usize,
    /// Nyquist-normalized band over which the broadband loss is averaged.
    pub band: (f64, f64),
    /// Antenna sample rate and resampler output rate.
    pub f_a: RationalFreq,
    pub f_c: RationalFreq,
    /// Fail if the standard error of the loss difference exceeds this.
    pub tolerance: Option<f64>,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            seed: 1,
            samples: 1 << 24,
            segment_len: 1 << 20,
            rho: 0.5,
            block: 1024,
            band: DEFAULT_PASSBAND,
            f_a: RationalFreq::hz(1_001_000),
            f_c: RationalFreq::hz(1_000_000),
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    /// `(normalized freq, loss_a, loss_b)` per in-band bin.
    pub per_freq: Vec<(f64, f64, f64)>,
    pub loss_a: f64,
    pub loss_b: f64,
    /// `loss_b - loss_a`.
    pub difference: f64,
    pub se_a: f64,
    pub se_b: f64,
    pub se_difference: f64,
    pub segments: usize,
    pub samples: usize,
}

/// Real cross-spectral sums of one chain and its reference for a segment.
struct Pair {
    chain: CrossSpectrum,
    reference: CrossSpectrum,
}

fn segment_inputs(cfg: &SensitivityConfig, seg: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(seg);
    let (gs, gn) = (cfg.rho.sqrt(), (1.0 - cfg.rho).sqrt());
    let mut x = Vec::with_capacity(cfg.segment_len);
    let mut y = Vec::with_capacity(cfg.segment_len);
    for _ in 0..cfg.segment_len {
        let s: f64 = StandardNormal.sample(&mut rng);
        let na: f64 = StandardNormal.sample(&mut rng);
        let nb: f64 = StandardNormal.sample(&mut rng);
        x.push(gs * s + gn * na);
        y.push(gs * s + gn * nb);
    }
    (x, y)
}

fn run_chain(chain: &ChainSpec, x: &[f64], cfg: &SensitivityConfig, bank: &CoefficientBank) -> Result<Vec<f64>, SensitivityError> {
    let mut s = SampleStream::from_data(cfg.f_a, Rational::ZERO, x.to_vec(), Zone::One);
    if !chain.quant.is_float() {
        s = quantize(&s, chain.quant)?;
    }
    if chain.resample {
        let opts = ResampleOptions { requant: chain.requant, ..ResampleOptions::float() };
        let r = resample_with(&s, cfg.f_c, bank, &opts)?.stream;
        return Ok(r.data[r.valid].to_vec());
    }
    if let Some(q) = chain.requant {
        s = quantize(&SampleStream { quant: QuantizerSpec::FLOAT, ..s }, q)?;
    }
    Ok(s.data)
}

fn chain_pair(chain: &ChainSpec, x: &[f64], y: &[f64], cfg: &SensitivityConfig, bank: &CoefficientBank) -> Result<Pair, SensitivityError> {
    let hop = cfg.block / 4;
    let mut out = Vec::with_capacity(2);
    for c in [*chain, chain.reference()] {
        let a = run_chain(&c, x, cfg, bank)?;
        let b = run_chain(&c, y, cfg, bank)?;
        let mut cs = CrossSpectrum::new(cfg.block);
        cs.add_real(&a, &b, hop);
        out.push(cs);
    }
    let reference = out.pop().unwrap();
    Ok(Pair { chain: out.pop().unwrap(), reference })
}

fn in_band_bins(cfg: &SensitivityConfig) -> Vec<usize> {
    (1..cfg.block / 2)
        .filter(|&k| {
            let f = 2.0 * k as f64 / cfg.block as f64;
            f >= cfg.band.0 && f <= cfg.band.1
        })
        .collect()
}

fn per_bin_loss(p: &Pair, bins: &[usize]) -> Vec<f64> {
    let c = p.chain.coherence_re();
    let r = p.reference.coherence_re();
    bins.iter().map(|&k| 1.0 - c[k] / r[k]).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_err(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return f64::INFINITY;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0) / n).sqrt()
}

/// Sensitivity loss of `chain_a` and `chain_b` on the same sky and noise.
pub fn sensitivity_loss(
    cfg: &SensitivityConfig,
    chain_a: &ChainSpec,
    chain_b: &ChainSpec,
    bank: &CoefficientBank,
) -> Result<SensitivityReport, SensitivityError> {
    if cfg.block < 8 || !cfg.block.is_power_of_two() || cfg.segment_len < 4 * cfg.block + bank.taps() {
        return Err(SensitivityError::BadConfig("block must be a power of two and segments several blocks long".into()));
    }
    if !(cfg.rho > 0.0 && cfg.rho < 1.0) {
        return Err(SensitivityError::BadConfig(format!("rho {} outside (0, 1)", cfg.rho)));
    }
    let segments = cfg.samples.div_ceil(cfg.segment_len).max(2);
    let bins = in_band_bins(cfg);
    if bins.is_empty() {
        return Err(SensitivityError::BadConfig("no bins in band".into()));
    }
    let parts: Vec<(Pair, Pair)> = (0..segments as u64)
        .into_par_iter()
        .map(|seg| {
            let (x, y) = segment_inputs(cfg, seg);
            Ok((chain_pair(chain_a, &x, &y, cfg, bank)?, chain_pair(chain_b, &x, &y, cfg, bank)?))
        })
        .collect::<Result<_, SensitivityError>>()?;

    let seg_a: Vec<f64> = parts.iter().map(|(a, _)| mean(&per_bin_loss(a, &bins))).collect();
    let seg_b: Vec<f64> = parts.iter().map(|(_, b)| mean(&per_bin_loss(b, &bins))).collect();
    let seg_d: Vec<f64> = seg_a.iter().zip(&seg_b).map(|(a, b)| b - a).collect();

    let total = |pick: fn(&(Pair, Pair)) -> &Pair| {
        let mut it = parts.iter();
        let first = pick(it.next().unwrap());
        let mut acc = Pair { chain: first.chain.clone(), reference: first.reference.clone() };
        for p in it {
            acc.chain.merge(&pick(p).chain);
            acc.reference.merge(&pick(p).reference);
        }
        acc
    };
    let la = per_bin_loss(&total(|p| &p.0), &bins);
    let lb = per_bin_loss(&total(|p| &p.1), &bins);
    let report = SensitivityReport {
        per_freq: bins.iter().zip(la.iter().zip(&lb)).map(|(&k, (&a, &b))| (2.0 * k as f64 / cfg.block as f64, a, b)).collect(),
        loss_a: mean(&la),
        loss_b: mean(&lb),
        difference: mean(&lb) - mean(&la),
        se_a: std_err(&seg_a),
        se_b: std_err(&seg_b),
        se_difference: std_err(&seg_d),
        segments,
        samples: segments * cfg.segment_len,
    };
    if let Some(tol) = cfg.tolerance {
        if !(report.se_difference <= tol) {
            return Err(SensitivityError::InsufficientSamples { se: report.se_difference, tol });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::lloyd_max_16;
    use crate::resampler::{design_bank, BankSpec};

    fn bank() -> CoefficientBank {
        design_bank(&BankSpec { coeff_bits: Some(18), ..BankSpec::default() }).unwrap()
    }

    fn small(samples: usize) -> SensitivityConfig {
        SensitivityConfig { samples, segment_len: 1 << 18, ..Default::default() }
    }

    #[test]
    fn float_chain_has_no_loss() {
        let b = bank();
        let r = sensitivity_loss(&small(1 << 19), &ChainSpec::FLOAT, &ChainSpec { resample: true, ..ChainSpec::FLOAT }, &b).unwrap();
        assert_eq!(r.loss_a, 0.0);
        assert_eq!(r.loss_b, 0.0);
    }

    #[test]
    fn q4_loss_matches_quantizer_efficiency() {
        let b = bank();
        let r = sensitivity_loss(&small(1 << 21), &ChainSpec::q4_direct(), &ChainSpec::q4_resampled_q8(&b), &b).unwrap();
        let want = 1.0 - lloyd_max_16().efficiency();
        assert!((r.loss_a - want).abs() < 4.0 * r.se_a + 2e-4, "{} vs {want} (se {})", r.loss_a, r.se_a);
        assert!(r.difference > 0.0 && r.difference < 1e-3, "{r:?}");
    }

    #[test]
    fn headroom_loading_holds_worst_case() {
        let b = bank();
        let l = headroom_loading(&b, QuantizerSpec::q4(1.0));
        assert!((1.8..2.0).contains(&l), "{l}");
    }

    #[test]
    fn tolerance_is_enforced() {
        let b = bank();
        let cfg = SensitivityConfig { tolerance: Some(1e-12), ..small(1 << 19) };
        assert!(matches!(
            sensitivity_loss(&cfg, &ChainSpec::q4_direct(), &ChainSpec::q4_resampled_q8(&b), &b),
            Err(SensitivityError::InsufficientSamples { .. })
        ));
    }
}
