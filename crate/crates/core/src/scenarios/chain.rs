//! Per-antenna processing for the simulated scenarios: sample at `f_a`,
//! resample onto the common grid at `f_c`, form the analytic signal and
//! shift it onto the common frequency axis.
//!
//! The chain is linear when the sampler is not quantized, so each input
//! component (sky, out-of-band sky, interference tones, noise) is run
//! separately and the outputs are summed where a combined stream is
//! needed.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::correlator::{correlate_window, overlap};
use crate::frontend::{antialias, gaussian, quantize, sample, ComplexSampleStream, QuantizerSpec, SampleStream, Zone};
use crate::mixer::{analytic, design_hilbert, mix, HilbertPair, MixerConfig};
use crate::rational::{Rational, RationalFreq};
use crate::resampler::{design_bank, resample_with, BankSpec, CoefficientBank, ResampleOptions};
use crate::signal::{inject, synth_signal, AmplitudeDist, ToneBankSignal};

use super::config::{ChainOptions, ScenarioConfig};
use super::ScenarioError;

/// Independent seed for one use of the scenario seed.
pub(crate) fn sub_seed(seed: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng.next_u64()
}

pub(crate) const SKY_STREAM: u64 = 1;
pub(crate) const LEAK_STREAM: u64 = 2;
pub(crate) const WINDOW_STREAM: u64 = 3;
pub(crate) const NOISE_STREAM: u64 = 1000;

pub(crate) struct Chain {
    pub bank: CoefficientBank,
    pub hilbert: HilbertPair,
    pub opts: ChainOptions,
    pub f_c: RationalFreq,
    /// Time of output sample 0 for every antenna.
    pub epoch: Rational,
}

impl Chain {
    pub fn new(opts: &ChainOptions, f_c: RationalFreq) -> Result<Chain, ScenarioError> {
        let spec = BankSpec {
            taps: opts.taps,
            phases: opts.phases,
            coeff_bits: (opts.coeff_bits > 0).then_some(opts.coeff_bits),
            passband: (opts.passband[0], opts.passband[1]),
            max_ripple_db: None,
            ..BankSpec::default()
        };
        let bank = design_bank(&spec)?;
        let hilbert = design_hilbert(opts.hilbert_taps, (opts.hilbert_band[0], opts.hilbert_band[1]))?;
        let epoch = Rational::integer(opts.epoch_samples as i128).checked_div(&f_c.as_rational())?;
        Ok(Chain { bank, hilbert, opts: opts.clone(), f_c, epoch })
    }

    fn mixer(&self, zone: Zone, f_a: RationalFreq, shift: bool) -> Result<MixerConfig, ScenarioError> {
        let base = MixerConfig::for_zone(zone, f_a, self.f_c)?;
        Ok(MixerConfig {
            shift_hz: if shift { base.shift_hz } else { Rational::ZERO },
            lut_bits: self.opts.lut_bits,
            lut_word_bits: self.opts.lut_word_bits,
            hilbert_taps: self.opts.hilbert_taps,
            hilbert_band: (self.opts.hilbert_band[0], self.opts.hilbert_band[1]),
            ..base
        })
    }

    /// Input length giving at least `outputs` valid chain outputs.
    pub fn input_len(&self, f_a: RationalFreq, outputs: usize) -> usize {
        let out = outputs + self.opts.hilbert_taps + self.opts.epoch_samples as usize + 16;
        (out as f64 * f_a.to_f64() / self.f_c.to_f64()).ceil() as usize + self.opts.taps + 16
    }

    /// Resample, convert to analytic form and mix. With `shift` false the
    /// Zone 2 spectral flip is kept but the frequency shift is dropped.
    pub fn run(&self, input: &SampleStream, shift: bool) -> Result<ComplexSampleStream, ScenarioError> {
        let opts = ResampleOptions { out_epoch: Some(self.epoch), ..ResampleOptions::float() };
        let r = resample_with(input, self.f_c, &self.bank, &opts)?.stream;
        let z = analytic(&r, &self.hilbert)?;
        Ok(mix(&z, &self.mixer(input.zone, input.rate, shift)?)?)
    }

    pub fn run_signal(
        &self,
        sig: &ToneBankSignal,
        f_a: RationalFreq,
        zone: Zone,
        quant: QuantizerSpec,
        outputs: usize,
        shift: bool,
    ) -> Result<ComplexSampleStream, ScenarioError> {
        let mut s = sample(sig, f_a, self.input_len(f_a, outputs), zone, Rational::ZERO)?;
        if !quant.is_float() {
            s = quantize(&s, quant)?;
        }
        self.run(&s, shift)
    }

    pub fn run_noise(&self, rms: f64, seed: u64, f_a: RationalFreq, zone: Zone, outputs: usize, shift: bool) -> Result<ComplexSampleStream, ScenarioError> {
        let data: Vec<f64> = gaussian(self.input_len(f_a, outputs), seed).into_iter().map(|g| rms * g).collect();
        self.run(&SampleStream::from_data(f_a, Rational::ZERO, data, zone), shift)
    }
}

/// Analog inputs of one antenna, split into components.
#[derive(Debug, Clone)]
pub(crate) struct AntennaSignals {
    pub f_a: RationalFreq,
    pub sky: Option<ToneBankSignal>,
    pub leak: Option<ToneBankSignal>,
    /// One single-tone signal per interference entry.
    pub interference: Vec<ToneBankSignal>,
}

impl AntennaSignals {
    pub fn interference_freqs(&self) -> Vec<f64> {
        self.interference.iter().map(|s| s.tones[0].freq_hz).collect()
    }
}

/// Chain outputs of one antenna, one stream per input component.
#[derive(Debug, Clone)]
pub(crate) struct AntennaOutputs {
    pub f_a: RationalFreq,
    pub zone: Zone,
    pub inputs: AntennaSignals,
    pub sky: Option<ComplexSampleStream>,
    pub leak: Option<ComplexSampleStream>,
    pub interference: Vec<ComplexSampleStream>,
    pub noise: Option<ComplexSampleStream>,
}

impl AntennaOutputs {
    pub fn interference_sum(&self) -> Option<ComplexSampleStream> {
        sum_streams(self.interference.iter())
    }

    pub fn combined(&self) -> ComplexSampleStream {
        sum_streams(self.sky.iter().chain(&self.leak).chain(&self.interference).chain(&self.noise))
            .expect("at least one component")
    }
}

/// Element-wise sum of streams on the same grid.
pub(crate) fn sum_streams<'a>(mut it: impl Iterator<Item = &'a ComplexSampleStream>) -> Option<ComplexSampleStream> {
    let mut acc = it.next()?.clone();
    for s in it {
        debug_assert_eq!((s.epoch, s.data.len()), (acc.epoch, acc.data.len()));
        for (a, b) in acc.data.iter_mut().zip(&s.data) {
            *a += b;
        }
    }
    Some(acc)
}

pub(crate) fn sky_signal(cfg: &ScenarioConfig, band: [f64; 2]) -> Result<Option<ToneBankSignal>, ScenarioError> {
    let s = &cfg.signal;
    if s.tones == 0 {
        return Ok(None);
    }
    let amp = if s.amplitude_span_db > 0.0 { AmplitudeDist::LogUniform { span_db: s.amplitude_span_db } } else { AmplitudeDist::Constant };
    let sig = synth_signal(sub_seed(cfg.seed, SKY_STREAM), s.tones, (band[0], band[1]), amp)?;
    Ok(Some(antialias(&sig, &s.filter())?))
}

fn leak_signal(cfg: &ScenarioConfig) -> Result<Option<ToneBankSignal>, ScenarioError> {
    let Some(l) = &cfg.signal.leak else { return Ok(None) };
    let mut sig = synth_signal(sub_seed(cfg.seed, LEAK_STREAM), l.tones, (l.band_hz[0], l.band_hz[1]), AmplitudeDist::Constant)?;
    for t in &mut sig.tones {
        t.amplitude *= l.rms;
        t.out_of_band = true;
    }
    Ok(Some(antialias(&sig, &cfg.signal.filter())?))
}

/// Build each antenna's analog inputs with the given offsets.
pub(crate) fn antenna_signals(cfg: &ScenarioConfig, offsets: &[Rational]) -> Result<Vec<AntennaSignals>, ScenarioError> {
    let mut clocks = BTreeMap::new();
    for (a, o) in cfg.antennas.iter().zip(offsets) {
        clocks.insert(a.id.clone(), a.f_a_with(o)?);
    }
    let leak = leak_signal(cfg)?;
    let filt = cfg.signal.filter();
    cfg.antennas
        .iter()
        .map(|a| {
            let band = a.band_hz.unwrap_or(cfg.signal.band_hz);
            let empty = ToneBankSignal::empty((band[0], band[1]));
            let interference = a
                .interference
                .iter()
                .map(|it| {
                    let mut one = inject(&empty, &it.to_spec(), &clocks, &a.id)?;
                    one.band_hz = (one.tones[0].freq_hz, one.tones[0].freq_hz);
                    Ok(antialias(&one, &filt)?)
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?;
            Ok(AntennaSignals { f_a: clocks[&a.id], sky: sky_signal(cfg, band)?, leak: leak.clone(), interference })
        })
        .collect()
}

/// Run every antenna's components through the chain, antennas in
/// parallel.
pub(crate) fn run_antennas(
    cfg: &ScenarioConfig,
    chain: &Chain,
    offsets: &[Rational],
    outputs: usize,
    shift: bool,
) -> Result<Vec<AntennaOutputs>, ScenarioError> {
    let signals = antenna_signals(cfg, offsets)?;
    cfg.antennas
        .par_iter()
        .zip(signals)
        .enumerate()
        .map(|(i, (a, inputs))| {
            let q = a.quantizer();
            let run = |s: &ToneBankSignal| chain.run_signal(s, inputs.f_a, a.zone, q, outputs, shift);
            let noise = if cfg.signal.noise_rms > 0.0 {
                let seed = sub_seed(cfg.seed, NOISE_STREAM + i as u64);
                Some(chain.run_noise(cfg.signal.noise_rms, seed, inputs.f_a, a.zone, outputs, shift)?)
            } else {
                None
            };
            Ok(AntennaOutputs {
                f_a: inputs.f_a,
                zone: a.zone,
                sky: inputs.sky.as_ref().map(run).transpose()?,
                leak: inputs.leak.as_ref().map(run).transpose()?,
                interference: inputs.interference.iter().map(run).collect::<Result<_, _>>()?,
                noise,
                inputs,
            })
        })
        .collect()
}

/// Where a real input tone at `f` ends up on the common complex frequency
/// axis after sampling at `f_a` in `zone`, analytic conversion and the
/// zone's mixer settings.
pub fn landing_freq(f: f64, f_a: f64, f_c: f64, zone: Zone) -> f64 {
    let d = f.rem_euclid(f_a);
    let g = if d > 0.5 * f_a { f_a - d } else { d };
    match zone {
        Zone::One => g,
        Zone::Two => -g - (f_c - f_a),
    }
}

/// A landed complex component: `(freq_hz, amplitude)`.
pub(crate) type Component = (f64, f64);

/// Where a real input tone ends up in the chain output: the wanted
/// component at [`landing_freq`] and the image the finite Hilbert
/// transformer leaves on the opposite side.
pub(crate) fn landed_components(f: f64, amp: f64, f_a: f64, f_c: f64, zone: Zone, hp: &HilbertPair) -> [Component; 2] {
    let d = f.rem_euclid(f_a);
    let g = if d > 0.5 * f_a { f_a - d } else { d };
    let q = hp.amplitude(g / (0.5 * f_c));
    let (wanted, image) = (0.5 * amp * (1.0 + q).abs(), 0.5 * amp * (1.0 - q).abs());
    let image_freq = match zone {
        Zone::One => -g,
        Zone::Two => g + f_a - f_c,
    };
    [(landing_freq(f, f_a, f_c, zone), wanted), (image_freq, image)]
}

/// Washing envelope of the correlation coefficient between two sets of
/// components: every pair adds its amplitude product times
/// `min(1, 1 / (delta_omega T))`.
pub(crate) fn washing_envelope(a: &[Component], b: &[Component], t_s: f64) -> f64 {
    let norm = (a.iter().map(|c| c.1 * c.1).sum::<f64>() * b.iter().map(|c| c.1 * c.1).sum::<f64>()).sqrt();
    let mut s = 0.0;
    for &(fa, xa) in a {
        for &(fb, xb) in b {
            s += xa * xb * (1.0 / (TAU * (fa - fb).abs() * t_s)).min(1.0);
        }
    }
    s / norm
}

/// Amplitude of the component of `z` at `freq_hz`, by projection.
pub(crate) fn tone_amplitude(z: &[Complex64], freq_hz: f64, rate: f64) -> f64 {
    let w = -TAU * freq_hz / rate;
    let s: Complex64 = z.iter().enumerate().map(|(k, v)| v * Complex64::from_polar(1.0, w * k as f64)).sum();
    s.norm() / z.len().max(1) as f64
}

/// Aligned slices of `n` samples, `start` samples into the valid overlap.
pub(crate) fn aligned<'a>(
    a: &'a ComplexSampleStream,
    b: &'a ComplexSampleStream,
    start: usize,
    n: usize,
) -> Result<(&'a [Complex64], &'a [Complex64]), ScenarioError> {
    let (ov, off) = overlap(a, b)?;
    if start + n > ov.len() {
        return Err(crate::correlator::CorrError::InsufficientOverlap { available: ov.len().saturating_sub(start), needed: n }.into());
    }
    let s = ov.start + start;
    let sb = (s as i64 - off) as usize;
    Ok((&a.data[s..s + n], &b.data[sb..sb + n]))
}

pub(crate) fn window_rho(a: &ComplexSampleStream, b: &ComplexSampleStream, start: usize, n: usize) -> Result<Complex64, ScenarioError> {
    Ok(correlate_window(a, b, start, n)?.rho)
}

pub(crate) fn mean_power(z: &[Complex64]) -> f64 {
    z.iter().map(|v| v.norm_sqr()).sum::<f64>() / z.len().max(1) as f64
}

/// Frequency of a dominant single tone from the mean phase increment.
pub(crate) fn tone_freq(z: &[Complex64], rate: f64) -> f64 {
    let s: Complex64 = z.windows(2).map(|w| w[1] * w[0].conj()).sum();
    s.arg() * rate / TAU
}

/// `count` window starts drawn uniformly from `0..=span`.
pub(crate) fn window_starts(seed: u64, count: usize, span: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, WINDOW_STREAM));
    (0..count).map(|_| rng.random_range(0..=span)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landing_rules() {
        let (fa, fc) = (1_002_000.0, 1_000_000.0);
        assert_eq!(landing_freq(300e3, fa, fc, Zone::One), 300e3);
        // In-zone Zone 2 tones land at f - f_c whatever f_a is.
        assert!((landing_freq(700e3, fa, fc, Zone::Two) - (700e3 - fc)).abs() < 1e-9);
        assert!((landing_freq(700e3, 998e3, fc, Zone::Two) - (700e3 - fc)).abs() < 1e-9);
        // A Zone 3 tone moves with twice the clock offset.
        let d = landing_freq(1.2e6, fa, fc, Zone::Two) - landing_freq(1.2e6, 998e3, fc, Zone::Two);
        assert!((d - 8000.0).abs() < 1e-6);
    }

    #[test]
    fn windows_are_seeded() {
        let a = window_starts(5, 16, 1000);
        assert_eq!(a, window_starts(5, 16, 1000));
        assert_ne!(a, window_starts(6, 16, 1000));
        assert!(a.iter().all(|&s| s <= 1000));
    }
}
