//! Fractional-delay resampling from an antenna clock `f_a` to the common
//! clock `f_c`.
//!
//! Output `n` sits at exact input position `p_n = p_0 + n * f_a / f_c`. The
//! [`PhaseAccumulator`] splits `p_n` into a base sample `b_n` and a bank
//! phase, and the output is
//! `y[n] = sum_m h[m] * x[b_n - (N - 1) + m]`, an estimate of the input at
//! position `p_n - c` with `c = (N - 1) / 2`. When `f_a > f_c` the base
//! occasionally advances by two (a skip); when `f_a < f_c` it sometimes
//! stays put (a repeat).
//!
//! Outputs are produced while the filter window overlaps the input. Outputs
//! whose window is not entirely inside the input's valid range are computed
//! with zeros and excluded from the output's valid range.

pub mod design;
pub mod response;

use std::collections::VecDeque;
use std::ops::Range;

use rayon::prelude::*;
use thiserror::Error;

pub use design::{bessel_i0, design_bank, sinc, BankSpec, CoefficientBank, Window, DEFAULT_PASSBAND};
pub use response::{bank_metrics, response, taps_response, BankMetrics, Response};

use crate::frontend::{FrontendError, Quantizer, QuantizerSpec, SampleStream, Zone};
use crate::rational::{PhaseAccumulator, Rational, RationalError, RationalFreq};
use crate::signal::{TimePoint, ToneBankSignal};

#[derive(Debug, Error)]
pub enum ResampleError {
    #[error("invalid bank specification: {0}")]
    BadSpec(String),
    #[error("design infeasible: {0}")]
    DesignInfeasible(String),
    #[error("stream of {len} samples is shorter than the {taps}-tap filter")]
    StreamTooShort { len: usize, taps: usize },
    #[error("error analysis needs a float chain, but the output was quantized")]
    ChainWasQuantized,
    #[error("bank has no fixed-point taps")]
    NoFixedTaps,
    #[error("sample {index} does not fit the fixed-point sample format")]
    FixedPointRange { index: usize },
    #[error(transparent)]
    Rational(#[from] RationalError),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arithmetic {
    /// f64 accumulation in a fixed lane order.
    Float,
    /// Samples scaled by `2^sample_frac_bits` to `i32`, products summed in
    /// `i64`.
    Fixed { sample_frac_bits: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleOptions {
    /// Exact input position of output 0. Defaults to `N - 1`, the first
    /// position whose window lies fully inside the input.
    pub start_position: Option<Rational>,
    /// Alternatively, the time output 0 should represent. Streams resampled
    /// with the same `out_epoch` share a sample grid.
    pub out_epoch: Option<Rational>,
    pub arithmetic: Arithmetic,
    /// Requantize outputs; `None` keeps them as f64.
    pub requant: Option<QuantizerSpec>,
}

impl Default for ResampleOptions {
    fn default() -> Self {
        ResampleOptions {
            start_position: None,
            out_epoch: None,
            arithmetic: Arithmetic::Float,
            requant: Some(QuantizerSpec::q8(1.0)),
        }
    }
}

impl ResampleOptions {
    /// Float datapath with float output, for error analysis.
    pub fn float() -> Self {
        ResampleOptions { requant: None, ..Default::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResampleStats {
    pub outputs: usize,
    pub skips: usize,
    pub repeats: usize,
    pub macs: u64,
    /// Output indices where the base advanced by other than one.
    pub events: Vec<usize>,
}

impl ResampleStats {
    /// Fraction of outputs within a window of `window` samples centered on
    /// some skip or repeat event.
    pub fn impacted_fraction(&self, window: usize) -> f64 {
        if self.outputs == 0 {
            return 0.0;
        }
        let half = (window / 2) as i64;
        let mut covered = 0i64;
        let mut reach = 0i64;
        for &e in &self.events {
            let start = e as i64 - half;
            let lo = start.max(reach).max(0);
            let hi = (start + window as i64).min(self.outputs as i64);
            if hi > lo {
                covered += hi - lo;
                reach = hi;
            }
        }
        covered as f64 / self.outputs as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub stream: SampleStream,
    pub stats: ResampleStats,
}

/// Output schedule shared by the direct and demultiplexed resamplers.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub acc: PhaseAccumulator,
    pub count: usize,
    pub valid: Range<usize>,
    pub epoch: Rational,
    pub p0: Rational,
}

/// First `n >= 0` with `b_n >= target`, given non-decreasing bases.
fn first_at_least(acc: &PhaseAccumulator, target: i128) -> Result<u64, RationalError> {
    let ratio = acc.ratio().to_f64();
    let p0 = acc.position()?.to_f64();
    let mut n = (((target as f64 - 0.5 - p0) / ratio).floor().max(0.0)) as u64;
    n = n.saturating_sub(2);
    while n > 0 && acc.peek(n - 1)?.0 >= target {
        n -= 1;
    }
    while acc.peek(n)?.0 < target {
        n += 1;
    }
    Ok(n)
}

pub(crate) fn plan(
    input: &SampleStream,
    f_c: RationalFreq,
    bank: &CoefficientBank,
    opts: &ResampleOptions,
) -> Result<Plan, ResampleError> {
    let taps = bank.taps();
    if input.len() < taps {
        return Err(ResampleError::StreamTooShort { len: input.len(), taps });
    }
    let ratio = input.rate.ratio_to(&f_c)?;
    let c = Rational::new(taps as i128 - 1, 2)?;
    let p0 = match (opts.start_position, opts.out_epoch) {
        (Some(p), _) => p,
        (None, Some(t)) => c.checked_add(&t.checked_sub(&input.epoch)?.checked_mul(&input.rate.as_rational())?)?,
        (None, None) => Rational::integer(taps as i128 - 1),
    };
    let acc = PhaseAccumulator::with_position(ratio, bank.phases() as u32, p0)?;
    let n1 = taps as i128 - 1;
    // Emit while the window start b - (N - 1) is inside the data.
    let count = first_at_least(&acc, input.len() as i128 + n1)? as usize;
    let vs = first_at_least(&acc, input.valid.start as i128 + n1)? as usize;
    let ve = first_at_least(&acc, input.valid.end as i128)? as usize;
    let valid = vs.min(count)..ve.min(count).max(vs.min(count));
    let epoch = input.epoch.checked_add(&p0.checked_sub(&c)?.checked_div(&input.rate.as_rational())?)?;
    Ok(Plan { acc, count, valid, epoch, p0 })
}

/// Float dot product with a fixed reduction order: four interleaved lane
/// sums, then `(l0 + l1) + (l2 + l3)`. Every float datapath uses this.
#[inline]
pub fn dot(h: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(h.len(), x.len());
    let mut acc = [0.0f64; 4];
    let hc = h.chunks_exact(4);
    let xc = x.chunks_exact(4);
    let (hr, xr) = (hc.remainder(), xc.remainder());
    for (a, b) in hc.zip(xc) {
        for l in 0..4 {
            acc[l] += a[l] * b[l];
        }
    }
    for (l, (a, b)) in hr.iter().zip(xr).enumerate() {
        acc[l] += a * b;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

#[inline]
pub fn dot_fixed(h: &[i32], x: &[i32]) -> i64 {
    h.iter().zip(x).map(|(&a, &b)| a as i64 * b as i64).sum()
}

/// Input samples in the representation the datapath consumes.
pub(crate) enum Samples {
    Float(Vec<f64>),
    Fixed { data: Vec<i32>, scale: f64 },
}

impl Samples {
    pub(crate) fn prepare(input: &[f64], bank: &CoefficientBank, arith: Arithmetic) -> Result<Samples, ResampleError> {
        match arith {
            Arithmetic::Float => Ok(Samples::Float(input.to_vec())),
            Arithmetic::Fixed { sample_frac_bits } => {
                let cfb = bank.coeff_frac_bits().ok_or(ResampleError::NoFixedTaps)?;
                let s = (1u64 << sample_frac_bits) as f64;
                let data = input
                    .iter()
                    .enumerate()
                    .map(|(index, &x)| {
                        let v = (x * s).round();
                        if v.abs() < (1u64 << 31) as f64 {
                            Ok(v as i32)
                        } else {
                            Err(ResampleError::FixedPointRange { index })
                        }
                    })
                    .collect::<Result<_, _>>()?;
                Ok(Samples::Fixed { data, scale: 1.0 / (s * (1u64 << cfb) as f64) })
            }
        }
    }

    pub(crate) fn len(&self) -> usize {
        match self {
            Samples::Float(d) => d.len(),
            Samples::Fixed { data, .. } => data.len(),
        }
    }
}

/// One output from a window ending at input sample `b`.
#[inline]
fn direct_output(samples: &Samples, bank: &CoefficientBank, b: i128, phase: usize, sf: &mut [f64], si: &mut [i32]) -> f64 {
    let n = bank.taps();
    let start = b - (n as i128 - 1);
    let len = samples.len() as i128;
    let inside = start >= 0 && b < len;
    match samples {
        Samples::Float(d) => {
            let x: &[f64] = if inside {
                &d[start as usize..=b as usize]
            } else {
                for (m, v) in sf.iter_mut().enumerate() {
                    let k = start + m as i128;
                    *v = if k >= 0 && k < len { d[k as usize] } else { 0.0 };
                }
                sf
            };
            dot(bank.phase(phase), x)
        }
        Samples::Fixed { data, scale } => {
            let x: &[i32] = if inside {
                &data[start as usize..=b as usize]
            } else {
                for (m, v) in si.iter_mut().enumerate() {
                    let k = start + m as i128;
                    *v = if k >= 0 && k < len { data[k as usize] } else { 0 };
                }
                si
            };
            dot_fixed(bank.fixed_phase(phase).expect("checked in prepare"), x) as f64 * scale
        }
    }
}

const CHUNK: usize = 1 << 16;

struct ChunkOut {
    data: Vec<f64>,
    events: Vec<usize>,
    skips: usize,
    repeats: usize,
}

fn run_chunk(samples: &Samples, bank: &CoefficientBank, plan: &Plan, n0: usize, len: usize) -> Result<ChunkOut, ResampleError> {
    let mut acc = plan.acc.clone();
    acc.jump(n0 as u64)?;
    let mut prev = if n0 == 0 { None } else { Some(plan.acc.peek(n0 as u64 - 1)?.0) };
    let mut sf = vec![0.0; bank.taps()];
    let mut si = vec![0; bank.taps()];
    let mut out = ChunkOut { data: Vec::with_capacity(len), events: Vec::new(), skips: 0, repeats: 0 };
    for j in 0..len {
        let b = acc.base();
        out.data.push(direct_output(samples, bank, b, acc.lut_index() as usize, &mut sf, &mut si));
        if let Some(p) = prev {
            match b - p {
                1 => {}
                0 => {
                    out.repeats += 1;
                    out.events.push(n0 + j);
                }
                _ => {
                    out.skips += 1;
                    out.events.push(n0 + j);
                }
            }
        }
        prev = Some(b);
        acc.step();
    }
    Ok(out)
}

/// Map input PPS marks to the nearest output sample.
pub(crate) fn map_marks(marks: &[usize], plan: &Plan, taps: usize) -> Result<Vec<usize>, ResampleError> {
    let c = Rational::new(taps as i128 - 1, 2)?;
    let ratio = plan.acc.ratio();
    let mut out = Vec::new();
    for &j in marks {
        let n = Rational::integer(j as i128).checked_add(&c)?.checked_sub(&plan.p0)?.checked_div(&ratio)?.round_half_even();
        if n >= 0 && (n as usize) < plan.count {
            out.push(n as usize);
        }
    }
    Ok(out)
}

pub(crate) fn finish(
    input: &SampleStream,
    f_c: RationalFreq,
    plan: &Plan,
    mut data: Vec<f64>,
    requant: Option<QuantizerSpec>,
    taps: usize,
) -> Result<SampleStream, ResampleError> {
    let mut quant = QuantizerSpec::FLOAT;
    if let Some(spec) = requant.filter(|s| !s.is_float()) {
        let q = Quantizer::new(spec)?;
        data.par_iter_mut().for_each(|x| *x = q.apply(*x));
        quant = spec;
    }
    Ok(SampleStream {
        rate: f_c,
        epoch: plan.epoch,
        data,
        quant,
        zone: input.zone,
        pps_marks: map_marks(&input.pps_marks, plan, taps)?,
        valid: plan.valid.clone(),
    })
}

/// Resample with the default options (float datapath, 8-bit requantized
/// output).
pub fn resample(input: &SampleStream, f_c: RationalFreq, bank: &CoefficientBank) -> Result<Resampled, ResampleError> {
    resample_with(input, f_c, bank, &ResampleOptions::default())
}

pub fn resample_with(
    input: &SampleStream,
    f_c: RationalFreq,
    bank: &CoefficientBank,
    opts: &ResampleOptions,
) -> Result<Resampled, ResampleError> {
    let plan = plan(input, f_c, bank, opts)?;
    let samples = Samples::prepare(&input.data, bank, opts.arithmetic)?;
    let starts: Vec<usize> = (0..plan.count).step_by(CHUNK).collect();
    let chunks: Vec<ChunkOut> = starts
        .par_iter()
        .map(|&n0| run_chunk(&samples, bank, &plan, n0, CHUNK.min(plan.count - n0)))
        .collect::<Result<_, _>>()?;
    let mut stats = ResampleStats { outputs: plan.count, macs: (plan.count * bank.taps()) as u64, ..Default::default() };
    let mut data = Vec::with_capacity(plan.count);
    for c in chunks {
        data.extend(c.data);
        stats.events.extend(c.events);
        stats.skips += c.skips;
        stats.repeats += c.repeats;
    }
    let stream = finish(input, f_c, &plan, data, opts.requant, bank.taps())?;
    Ok(Resampled { stream, stats })
}

/// Sample-at-a-time resampler with an explicit input FIFO, as a hardware
/// implementation would run it. Float datapath only.
#[derive(Debug, Clone)]
pub struct ResamplerState<'a> {
    bank: &'a CoefficientBank,
    acc: PhaseAccumulator,
    fifo: VecDeque<f64>,
    fifo_start: i128,
    pushed: i128,
    window: Vec<f64>,
}

impl<'a> ResamplerState<'a> {
    pub fn new(bank: &'a CoefficientBank, ratio: Rational, start_position: Rational) -> Result<Self, ResampleError> {
        Ok(ResamplerState {
            bank,
            acc: PhaseAccumulator::with_position(ratio, bank.phases() as u32, start_position)?,
            fifo: VecDeque::with_capacity(2 * bank.taps()),
            fifo_start: 0,
            pushed: 0,
            window: vec![0.0; bank.taps()],
        })
    }

    pub fn push(&mut self, x: f64) {
        self.fifo.push_back(x);
        self.pushed += 1;
    }

    /// Emit the next output if its newest input sample has arrived.
    pub fn pull(&mut self) -> Option<f64> {
        let b = self.acc.base();
        if b >= self.pushed {
            return None;
        }
        let n = self.bank.taps() as i128;
        for (m, v) in self.window.iter_mut().enumerate() {
            let k = b - (n - 1) + m as i128;
            *v = if k >= self.fifo_start { self.fifo[(k - self.fifo_start) as usize] } else { 0.0 };
        }
        let y = dot(self.bank.phase(self.acc.lut_index() as usize), &self.window);
        self.acc.step();
        let oldest_needed = self.acc.base() - (n - 1);
        while self.fifo_start < oldest_needed && !self.fifo.is_empty() {
            self.fifo.pop_front();
            self.fifo_start += 1;
        }
        Some(y)
    }

    /// Samples held beyond the newest one the next output needs.
    pub fn fill_level(&self) -> i128 {
        self.pushed - 1 - self.acc.base()
    }

    pub fn fifo_len(&self) -> usize {
        self.fifo.len()
    }

    pub fn process(&mut self, input: &[f64], out: &mut Vec<f64>) {
        for &x in input {
            self.push(x);
            while let Some(y) = self.pull() {
                out.push(y);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    /// RMS error relative to the signal RMS.
    pub rms_err: f64,
    pub max_abs_err: f64,
    pub samples: usize,
}

/// Signal whose samples at `f_a` match those of `sig` sampled in `zone`.
/// In Zone 2 every tone folds to `f - f_a`.
pub fn baseband_equivalent(sig: &ToneBankSignal, f_a: f64, zone: Zone) -> ToneBankSignal {
    let mut out = sig.clone();
    if zone == Zone::Two {
        for t in &mut out.tones {
            t.freq_hz -= f_a;
        }
    }
    out
}

/// Compare resampled output against the signal evaluated at the output
/// sample times, over the output's valid range.
pub fn resample_error(sig: &ToneBankSignal, f_a: RationalFreq, out: &SampleStream) -> Result<ErrorStats, ResampleError> {
    if !out.quant.is_float() {
        return Err(ResampleError::ChainWasQuantized);
    }
    let reference = baseband_equivalent(sig, f_a.to_f64(), out.zone);
    let mut sum = 0.0;
    let mut max_abs_err: f64 = 0.0;
    for k in out.valid.clone() {
        let t = out.time_of(k as i128)?;
        let e = out.data[k] - reference.eval_at(TimePoint::from_rational(&t));
        sum += e * e;
        max_abs_err = max_abs_err.max(e.abs());
    }
    let samples = out.valid.len();
    let rms = sig.rms();
    Ok(ErrorStats { rms_err: (sum / samples.max(1) as f64).sqrt() / rms, max_abs_err, samples })
}
