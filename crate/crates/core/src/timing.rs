//! 1PPS tick registration against non-integer-Hz sample clocks, the
//! multi-phase pulse synchronizer, delay-FIFO centroid alignment and the
//! demux commutator phase at reference ticks.
//!
//! Tick times are exact rationals: tick `k` nominally falls at `k` seconds,
//! offset by a jitter quantized to whole femtoseconds. A tick is registered
//! in sample `floor(t * f)`, the sample whose period contains it.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::rational::{Rational, RationalError, RationalFreq};

const FS_PER_S: i128 = 1_000_000_000_000_000;

#[derive(Debug, Error)]
pub enum TimingError {
    #[error("pulse covers {detected} sub-phase samples; at least 2 are needed")]
    PulseTooNarrow { detected: i128 },
    #[error("synchronizer needs at least 3 phases, got {0}")]
    TooFewPhases(u32),
    #[error("alignment window of {window} ticks needs at least 2 and at most {available}")]
    WindowTooShort { window: usize, available: usize },
    #[error("bad jitter {0} ns")]
    BadJitter(f64),
    #[error(transparent)]
    Rational(#[from] RationalError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// 1PPS source: ticks one second apart on average, each displaced by
/// Gaussian jitter truncated at four sigma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpsModel {
    pub jitter_ns: f64,
    pub seed: u64,
}

impl PpsModel {
    pub const IDEAL: PpsModel = PpsModel { jitter_ns: 0.0, seed: 0 };

    /// Jitter of each tick in femtoseconds.
    pub fn jitter_fs(&self, n_ticks: usize) -> Result<Vec<i64>, TimingError> {
        if !(self.jitter_ns.is_finite() && self.jitter_ns >= 0.0) {
            return Err(TimingError::BadJitter(self.jitter_ns));
        }
        if self.jitter_ns == 0.0 {
            return Ok(vec![0; n_ticks]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok((0..n_ticks)
            .map(|_| loop {
                let g: f64 = StandardNormal.sample(&mut rng);
                if g.abs() <= 4.0 {
                    break (g * self.jitter_ns * 1e6).round() as i64;
                }
            })
            .collect())
    }
}

fn tick_time(k: usize, jitter_fs: i64) -> Result<Rational, RationalError> {
    Rational::new(k as i128 * FS_PER_S + jitter_fs as i128, FS_PER_S)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: usize,
    pub jitter_fs: i64,
    pub sample_index: i128,
    /// Samples since the previous tick.
    pub inter_tick: Option<i128>,
}

impl TickRecord {
    pub fn jittered_time(&self) -> Rational {
        tick_time(self.tick, self.jitter_fs).expect("fits")
    }
}

/// Ticks registered on the sample grid of `f`.
pub fn tick_trace(f: RationalFreq, pps: &PpsModel, n_ticks: usize) -> Result<Vec<TickRecord>, TimingError> {
    let jit = pps.jitter_fs(n_ticks)?;
    let mut prev = None;
    let mut out = Vec::with_capacity(n_ticks);
    for (k, &j) in jit.iter().enumerate() {
        let idx = tick_time(k, j)?.checked_mul(&f.as_rational())?.floor();
        out.push(TickRecord { tick: k, jitter_fs: j, sample_index: idx, inter_tick: prev.map(|p| idx - p) });
        prev = Some(idx);
    }
    Ok(out)
}

/// Index of the sample during which each tick occurs.
pub fn pps_sample_indices(f_a: RationalFreq, pps: &PpsModel, n_ticks: usize) -> Result<Vec<i128>, TimingError> {
    Ok(tick_trace(f_a, pps, n_ticks)?.into_iter().map(|r| r.sample_index).collect())
}

/// Inter-tick sample counts.
pub fn inter_tick_counts(indices: &[i128]) -> Vec<i128> {
    indices.windows(2).map(|w| w[1] - w[0]).collect()
}

fn fmt_seconds(whole: i128, fs: i128) -> String {
    let total = whole * FS_PER_S + fs;
    let sign = if total < 0 { "-" } else { "" };
    let t = total.abs();
    format!("{sign}{}.{:015}", t / FS_PER_S, t % FS_PER_S)
}

/// CSV columns: `tick, ideal_time_s, jittered_time_s, sample_index,
/// inter_tick_count` (empty for the first tick).
pub fn write_tick_csv<W: Write>(w: W, rows: &[TickRecord]) -> Result<(), TimingError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["tick", "ideal_time_s", "jittered_time_s", "sample_index", "inter_tick_count"])?;
    for r in rows {
        wr.write_record([
            r.tick.to_string(),
            r.tick.to_string(),
            fmt_seconds(r.tick as i128, r.jitter_fs as i128),
            r.sample_index.to_string(),
            r.inter_tick.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncResult {
    /// Sub-phase at the center of the run that saw the pulse.
    pub chosen_phase: u32,
    /// Phase-0 sample in which the pulse is re-registered.
    pub resampled_index: i128,
    /// Number of sub-phase samples that saw the pulse.
    pub detected: i128,
}

/// Multi-phase synchronizer. The clock is sampled on `n_phases` evenly
/// spaced sub-phases; sub-phase sample `u` is at time `u / (f * P)`. The
/// pulse is high over `[tick, tick + width_cycles / f)`. The center of the
/// detecting run picks the phase, and the pulse is then re-registered at
/// the first phase-0 edge at or after that center sample.
pub fn synchronize_pps(tick_time: Rational, clock: RationalFreq, n_phases: u32, width_cycles: Rational) -> Result<SyncResult, TimingError> {
    if n_phases < 3 {
        return Err(TimingError::TooFewPhases(n_phases));
    }
    let p = n_phases as i128;
    let scale = clock.as_rational().mul_int(p)?;
    let first = tick_time.checked_mul(&scale)?.ceil();
    let end = tick_time.checked_add(&width_cycles.checked_div(&clock.as_rational())?)?.checked_mul(&scale)?.ceil();
    let detected = end - first;
    if detected < 2 {
        return Err(TimingError::PulseTooNarrow { detected });
    }
    let center = num_integer::Integer::div_floor(&(first + end - 1), &2);
    Ok(SyncResult {
        chosen_phase: center.rem_euclid(p) as u32,
        resampled_index: num_integer::Integer::div_ceil(&center, &p),
        detected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentState {
    /// FIFO depth change, in samples.
    pub fifo_depth: i64,
    pub centroid_window: usize,
    /// Mean antenna-minus-reference tick offset over the window.
    pub offset_estimate: f64,
    /// `offset_estimate - fifo_depth`, always within half a sample.
    pub residual: f64,
}

fn centroid(ant: &[i128], kapb: &[i128]) -> f64 {
    ant.iter().zip(kapb).map(|(a, k)| (a - k) as f64).sum::<f64>() / ant.len().min(kapb.len()) as f64
}

/// Line up the centroid of the first `window` antenna ticks with the
/// reference ticks.
pub fn align_fifo(antenna_ticks: &[i128], kapb_ticks: &[i128], window: usize) -> Result<AlignmentState, TimingError> {
    let available = antenna_ticks.len().min(kapb_ticks.len());
    if window < 2 || window > available {
        return Err(TimingError::WindowTooShort { window, available });
    }
    let off = centroid(&antenna_ticks[..window], &kapb_ticks[..window]);
    let depth = off.round() as i64;
    Ok(AlignmentState { fifo_depth: depth, centroid_window: window, offset_estimate: off, residual: off - depth as f64 })
}

/// Re-align on each consecutive window of ticks.
pub fn track_fifo(antenna_ticks: &[i128], kapb_ticks: &[i128], window: usize) -> Result<Vec<AlignmentState>, TimingError> {
    let available = antenna_ticks.len().min(kapb_ticks.len());
    if window < 2 || window > available {
        return Err(TimingError::WindowTooShort { window, available });
    }
    (0..available / window)
        .map(|w| align_fifo(&antenna_ticks[w * window..], &kapb_ticks[w * window..], window))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommutatorMode {
    /// Free-running from the first tick.
    Flywheel,
    /// Forced to slice 0 at every reference tick.
    Reseed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommutatorReport {
    pub mode: CommutatorMode,
    /// Commutator slice of the first output at or after each tick.
    pub phase_at_tick: Vec<usize>,
    /// Ticks at which the slice sequence jumped.
    pub discontinuities: usize,
}

/// Commutator slice at each reference tick for a `k`-way demux clocked
/// from the common rate `f_c`.
pub fn commutator_at_ticks(f_c: RationalFreq, k: usize, n_ticks: usize, mode: CommutatorMode) -> Result<CommutatorReport, TimingError> {
    let k = k.max(1) as i128;
    let first: Vec<i128> = (0..n_ticks)
        .map(|t| Ok(Rational::integer(t as i128).checked_mul(&f_c.as_rational())?.ceil()))
        .collect::<Result<_, RationalError>>()?;
    let mut phases = Vec::with_capacity(n_ticks);
    let mut jumps = 0;
    for (i, &idx) in first.iter().enumerate() {
        let free = (idx - first[0]).rem_euclid(k) as usize;
        match mode {
            CommutatorMode::Flywheel => phases.push(free),
            CommutatorMode::Reseed => {
                if i > 0 && (idx - first[i - 1]).rem_euclid(k) != 0 {
                    jumps += 1;
                }
                phases.push(0);
            }
        }
    }
    Ok(CommutatorReport { mode, phase_at_tick: phases, discontinuities: jumps })
}
