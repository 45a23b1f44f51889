//! Demultiplexed resampling, as run on hardware clocked at `f_c / k`.
//!
//! Input arrives as `k`-sample words; word `w` holds samples
//! `w*k .. w*k + k` in lanes `0..k`. Each hardware clock produces `k`
//! outputs, one per slice. The slice phase table for a block is computed
//! directly from the block's start position (`p + j * ratio`), not by
//! stepping, and each slice gathers its `N` taps through a barrel roll of
//! the lanes. The arithmetic (tap order and reduction order) is the same as
//! the direct form, so outputs are bit-identical.

use thiserror::Error;

use crate::frontend::SampleStream;
use crate::rational::{PhaseAccumulator, RationalError, RationalFreq};
use crate::resampler::{dot, dot_fixed, finish, plan, CoefficientBank, ResampleError, ResampleOptions, ResampleStats, Resampled, Samples};

#[derive(Debug, Error)]
pub enum DemuxError {
    #[error("tap count {taps} is not divisible by demux factor {factor}")]
    TapCountNotDivisible { taps: usize, factor: usize },
    #[error("demux factor must be at least 1")]
    ZeroFactor,
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Rational(#[from] RationalError),
}

/// Phase and input advance for one slice of a demultiplexed block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlicePhase {
    pub base: i128,
    pub advance: i128,
    pub lut_index: u32,
}

/// Slice phases for the `k` outputs starting at `acc`'s position. `prev_base`
/// is the base of the output just before the block.
pub fn slice_phase_table(acc: &PhaseAccumulator, prev_base: i128, k: usize) -> Result<Vec<SlicePhase>, RationalError> {
    let mut prev = prev_base;
    (0..k)
        .map(|j| {
            let (base, lut_index) = acc.peek(j as u64)?;
            let s = SlicePhase { base, advance: base - prev, lut_index };
            prev = base;
            Ok(s)
        })
        .collect()
}

/// Input words held as `k` lanes.
enum Lanes {
    Float(Vec<Vec<f64>>),
    Fixed(Vec<Vec<i32>>, f64),
}

fn split_lanes<T: Copy + Default>(x: &[T], k: usize) -> Vec<Vec<T>> {
    let words = x.len().div_ceil(k);
    (0..k).map(|l| (0..words).map(|w| x.get(w * k + l).copied().unwrap_or_default()).collect()).collect()
}

/// Commutator bookkeeping: barrel-roll offset of the last slice and the
/// number of new words each block pulled in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommutatorState {
    pub roll: usize,
    pub words_loaded: i128,
    /// `hist[w]` counts blocks that consumed `w` new words.
    pub words_per_block: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemuxResampled {
    pub resampled: Resampled,
    pub commutator: CommutatorState,
}

pub fn demux_resample(
    input: &SampleStream,
    f_c: RationalFreq,
    bank: &CoefficientBank,
    factor: usize,
    opts: &ResampleOptions,
) -> Result<DemuxResampled, DemuxError> {
    let k = factor;
    if k == 0 {
        return Err(DemuxError::ZeroFactor);
    }
    let n = bank.taps();
    if !n.is_multiple_of(k) {
        return Err(DemuxError::TapCountNotDivisible { taps: n, factor: k });
    }
    let groups = (n / k) as i128;
    let plan = plan(input, f_c, bank, opts)?;
    let lanes = match Samples::prepare(&input.data, bank, opts.arithmetic)? {
        Samples::Float(d) => Lanes::Float(split_lanes(&d, k)),
        Samples::Fixed { data, scale } => Lanes::Fixed(split_lanes(&data, k), scale),
    };
    let n_words = input.data.len().div_ceil(k) as i128;
    let len = input.data.len() as i128;

    let mut acc = plan.acc.clone();
    let mut prev_base = acc.base() - 1;
    let mut comm = CommutatorState { words_per_block: vec![0; 4], ..Default::default() };
    let mut stats = ResampleStats { outputs: plan.count, macs: (plan.count * n) as u64, ..Default::default() };
    let mut out = Vec::with_capacity(plan.count);
    let mut wf = vec![0.0f64; n];
    let mut wi = vec![0i32; n];

    let mut n0 = 0usize;
    while n0 < plan.count {
        let table = slice_phase_table(&acc, prev_base, k)?;
        let last = table[k - 1].base;
        let need = (last + 1).div_euclid(k as i128) + 1;
        let fresh = (need.min(n_words) - comm.words_loaded).max(0);
        comm.words_loaded += fresh;
        let slot = (fresh as usize).min(comm.words_per_block.len() - 1);
        comm.words_per_block[slot] += 1;
        for (j, sp) in table.iter().enumerate() {
            if n0 + j >= plan.count {
                break;
            }
            if n0 + j > 0 {
                match sp.advance {
                    1 => {}
                    0 => {
                        stats.repeats += 1;
                        stats.events.push(n0 + j);
                    }
                    _ => {
                        stats.skips += 1;
                        stats.events.push(n0 + j);
                    }
                }
            }
            let roll = (sp.base + 1).rem_euclid(k as i128) as usize;
            comm.roll = roll;
            let phase = sp.lut_index as usize;
            // Tap m = g*k + l reads lane (roll + l) mod k of word
            // floor((b + 1 + l) / k) + g - N/k.
            let gather = |put: &mut dyn FnMut(usize, Option<(usize, usize)>)| {
                for l in 0..k {
                    let lane = (roll + l) % k;
                    let w0 = (sp.base + 1 + l as i128).div_euclid(k as i128) - groups;
                    for g in 0..groups {
                        let w = w0 + g;
                        let idx = w * k as i128 + lane as i128;
                        let m = g as usize * k + l;
                        let src = if w >= 0 && idx < len { Some((lane, w as usize)) } else { None };
                        put(m, src);
                    }
                }
            };
            let y = match &lanes {
                Lanes::Float(lv) => {
                    gather(&mut |m, src| wf[m] = src.map(|(ln, w)| lv[ln][w]).unwrap_or(0.0));
                    dot(bank.phase(phase), &wf)
                }
                Lanes::Fixed(lv, scale) => {
                    gather(&mut |m, src| wi[m] = src.map(|(ln, w)| lv[ln][w]).unwrap_or(0));
                    dot_fixed(bank.fixed_phase(phase).expect("checked in prepare"), &wi) as f64 * scale
                }
            };
            out.push(y);
        }
        prev_base = last;
        n0 += k;
        acc.jump(k as u64)?;
    }
    let stream = finish(input, f_c, &plan, out, opts.requant, n)?;
    Ok(DemuxResampled { resampled: Resampled { stream, stats }, commutator: comm })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemuxReport {
    pub identical: bool,
    pub first_divergence: Option<usize>,
    pub outputs: usize,
    pub skips: usize,
    pub repeats: usize,
}

/// Run both datapaths and compare outputs bit for bit.
pub fn verify_demux(
    input: &SampleStream,
    f_c: RationalFreq,
    bank: &CoefficientBank,
    factor: usize,
    opts: &ResampleOptions,
) -> Result<DemuxReport, DemuxError> {
    let direct = crate::resampler::resample_with(input, f_c, bank, opts)?;
    let demux = demux_resample(input, f_c, bank, factor, opts)?.resampled;
    let a = &direct.stream.data;
    let b = &demux.stream.data;
    let first = a
        .iter()
        .zip(b.iter())
        .position(|(x, y)| x.to_bits() != y.to_bits())
        .or(if a.len() != b.len() { Some(a.len().min(b.len())) } else { None });
    let identical = first.is_none() && direct.stats == demux.stats && direct.stream.valid == demux.stream.valid;
    Ok(DemuxReport { identical, first_divergence: first, outputs: a.len(), skips: direct.stats.skips, repeats: direct.stats.repeats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{gaussian, quantize, QuantizerSpec, Zone};
    use crate::rational::Rational;
    use crate::resampler::{design_bank, Arithmetic, BankSpec, Window};
    use proptest::prelude::*;

    fn stream(n: usize, rate: u64, seed: u64) -> SampleStream {
        SampleStream::from_data(RationalFreq::hz(rate), Rational::ZERO, gaussian(n, seed), Zone::One)
    }

    #[test]
    fn table_equals_sequential_steps() {
        let ratio = Rational::new(1001, 1000).unwrap();
        let mut acc = PhaseAccumulator::with_position(ratio, 1024, Rational::integer(55)).unwrap();
        let mut seq = acc.clone();
        let mut prev = acc.base() - 1;
        for _ in 0..300 {
            let t = slice_phase_table(&acc, prev, 8).unwrap();
            for sp in &t {
                assert_eq!((sp.base, sp.lut_index), (seq.base(), seq.lut_index()));
                seq.step();
            }
            prev = t[7].base;
            acc.jump(8).unwrap();
        }
    }

    #[test]
    fn indivisible_taps_rejected() {
        let bank = design_bank(&BankSpec::plain(10, 8, Window::Rectangular)).unwrap();
        let s = stream(100, 1000, 1);
        assert!(matches!(
            demux_resample(&s, RationalFreq::hz(1000), &bank, 4, &ResampleOptions::float()),
            Err(DemuxError::TapCountNotDivisible { taps: 10, factor: 4 })
        ));
    }

    #[test]
    fn identical_on_default_bank() {
        let bank = design_bank(&BankSpec::default()).unwrap();
        for rate in [1_001_000, 999_000, 1_000_000] {
            let s = stream(20_000, rate, 3);
            let r = verify_demux(&s, RationalFreq::hz(1_000_000), &bank, 8, &ResampleOptions::float()).unwrap();
            assert!(r.identical, "{r:?}");
        }
    }

    #[test]
    fn identical_in_fixed_point() {
        let bank = design_bank(&BankSpec::default()).unwrap();
        let s = quantize(&stream(20_000, 1_001_000, 4), QuantizerSpec::q4(1.0)).unwrap();
        let opts = ResampleOptions { arithmetic: Arithmetic::Fixed { sample_frac_bits: 14 }, ..ResampleOptions::default() };
        let r = verify_demux(&s, RationalFreq::hz(1_000_000), &bank, 4, &opts).unwrap();
        assert!(r.identical, "{r:?}");
    }

    #[test]
    fn commutator_words_per_block() {
        let bank = design_bank(&BankSpec::plain(8, 16, Window::Kaiser { beta: 5.0 })).unwrap();
        let s = stream(40_000, 1_001_000, 5);
        let d = demux_resample(&s, RationalFreq::hz(1_000_000), &bank, 4, &ResampleOptions::float()).unwrap();
        // At ratio ~1, a block of 4 outputs consumes about one 4-sample word.
        let h = &d.commutator.words_per_block;
        assert!(h[1] > 9 * (h[0] + h[2]), "{h:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn demux_matches_direct(k_sel in 0usize..4, off in -3000i64..3000, n in 40usize..2500, seed in 0u64..100, p0n in 0i64..400, fixed in any::<bool>()) {
            let k = [1usize, 2, 3, 4][k_sel];
            let taps = 12;
            let bank = design_bank(&BankSpec { coeff_bits: Some(16), ..BankSpec::plain(taps, 32, Window::Kaiser { beta: 6.0 }) }).unwrap();
            let s = quantize(&stream(n, (1_000_000 + off) as u64, seed), QuantizerSpec::q8(1.0)).unwrap();
            let arithmetic = if fixed { Arithmetic::Fixed { sample_frac_bits: 10 } } else { Arithmetic::Float };
            let opts = ResampleOptions { start_position: Some(Rational::new(p0n as i128, 7).unwrap()), arithmetic, requant: None, ..Default::default() };
            let r = verify_demux(&s, RationalFreq::hz(1_000_000), &bank, k, &opts).unwrap();
            prop_assert!(r.identical, "{:?}", r);
        }
    }
}
