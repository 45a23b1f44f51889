//! Continuous-time test signals.
//!
//! The analog sky is modeled as a deterministic bank of sinusoids so that
//! any sample instant can be evaluated exactly, independent of how a
//! particular antenna's clock happens to slice time. Interference lines
//! (clock harmonics, cross-clock leakage, fixed RF tones) are added as
//! extra tones whose frequency follows a clock rule.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rational::{Rational, RationalError, RationalFreq};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("band [{0}, {1}] Hz is empty or invalid")]
    EmptyBand(f64, f64),
    #[error("tone count must be positive")]
    NoTones,
    #[error("unknown antenna {0:?}")]
    UnknownAntenna(String),
    #[error("interference rule {0} is not valid for {1}")]
    RuleMismatch(&'static str, &'static str),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Rational(#[from] RationalError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub amplitude: f64,
    pub freq_hz: f64,
    pub phase_rad: f64,
    /// Set for tones deliberately placed outside the sky band, so band and
    /// zone checks skip them.
    pub out_of_band: bool,
}

/// Instant split into whole seconds and a fractional part, so that
/// `f * t` keeps full precision for long runs at high rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePoint {
    pub whole: i64,
    pub frac: f64,
}

impl TimePoint {
    pub fn from_rational(t: &Rational) -> TimePoint {
        let whole = t.floor();
        let rem = t.numer() - whole * t.denom();
        TimePoint { whole: whole as i64, frac: rem as f64 / t.denom() as f64 }
    }

    pub fn from_f64(t: f64) -> TimePoint {
        let whole = t.floor();
        TimePoint { whole: whole as i64, frac: t - whole }
    }

    pub fn to_f64(&self) -> f64 {
        self.whole as f64 + self.frac
    }

    /// Phase `f * t` in cycles, reduced mod 1.
    #[inline]
    pub fn cycles(&self, freq_hz: f64) -> f64 {
        let w = freq_hz * self.whole as f64;
        (w - w.floor()) + freq_hz * self.frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmplitudeDist {
    Constant,
    /// Amplitudes log-uniform over `span_db` (amplitude dB).
    LogUniform { span_db: f64 },
}

impl Default for AmplitudeDist {
    fn default() -> Self {
        AmplitudeDist::LogUniform { span_db: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToneBankSignal {
    pub tones: Vec<Tone>,
    pub band_hz: (f64, f64),
    pub seed: u64,
}

/// Random tone bank over `band_hz`, normalized to unit RMS.
///
/// Frequencies are drawn one per equal-width slot of the band (jittered
/// grid), which keeps occupancy even while each frequency is still uniform
/// within its slot.
pub fn synth_signal(
    seed: u64,
    n_tones: usize,
    band_hz: (f64, f64),
    amp: AmplitudeDist,
) -> Result<ToneBankSignal, SignalError> {
    let (lo, hi) = band_hz;
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
        return Err(SignalError::EmptyBand(lo, hi));
    }
    if n_tones == 0 {
        return Err(SignalError::NoTones);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slot = (hi - lo) / n_tones as f64;
    let mut tones: Vec<Tone> = (0..n_tones)
        .map(|i| {
            let freq_hz = lo + slot * (i as f64 + rng.random::<f64>());
            let amplitude = match amp {
                AmplitudeDist::Constant => 1.0,
                AmplitudeDist::LogUniform { span_db } => 10f64.powf(-span_db * rng.random::<f64>() / 20.0),
            };
            let phase_rad = TAU * rng.random::<f64>();
            Tone { amplitude, freq_hz, phase_rad, out_of_band: false }
        })
        .collect();
    let power: f64 = tones.iter().map(|t| 0.5 * t.amplitude * t.amplitude).sum();
    let g = power.sqrt().recip();
    for t in &mut tones {
        t.amplitude *= g;
    }
    Ok(ToneBankSignal { tones, band_hz, seed })
}

impl ToneBankSignal {
    pub fn single(amplitude: f64, freq_hz: f64, phase_rad: f64) -> ToneBankSignal {
        ToneBankSignal {
            tones: vec![Tone { amplitude, freq_hz, phase_rad, out_of_band: false }],
            band_hz: (freq_hz, freq_hz),
            seed: 0,
        }
    }

    pub fn empty(band_hz: (f64, f64)) -> ToneBankSignal {
        ToneBankSignal { tones: Vec::new(), band_hz, seed: 0 }
    }

    #[inline]
    pub fn eval_at(&self, t: TimePoint) -> f64 {
        self.tones
            .iter()
            .map(|tone| tone.amplitude * (TAU * t.cycles(tone.freq_hz) + tone.phase_rad).sin())
            .sum()
    }

    pub fn eval(&self, t: &Rational) -> f64 {
        self.eval_at(TimePoint::from_rational(t))
    }

    /// Mean power of the tone bank, `sum(a^2) / 2`.
    pub fn power(&self) -> f64 {
        self.tones.iter().map(|t| 0.5 * t.amplitude * t.amplitude).sum()
    }

    pub fn rms(&self) -> f64 {
        self.power().sqrt()
    }

    pub fn merged(&self, other: &ToneBankSignal) -> ToneBankSignal {
        let mut out = self.clone();
        out.tones.extend(other.tones.iter().copied());
        out
    }

    /// One line per tone: `amplitude frequency_hz phase_rad`, preceded by
    /// `#` comment lines with the seed and band.
    pub fn to_text(&self) -> String {
        let mut s = format!("# seed {}\n# band_hz {} {}\n", self.seed, self.band_hz.0, self.band_hz.1);
        for t in &self.tones {
            let tag = if t.out_of_band { " oob" } else { "" };
            writeln!(s, "{:e} {:e} {:e}{}", t.amplitude, t.freq_hz, t.phase_rad, tag).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<ToneBankSignal, SignalError> {
        let mut sig = ToneBankSignal::empty((0.0, 0.0));
        for (i, line) in text.lines().enumerate() {
            let perr = |msg: &str| SignalError::Parse { line: i + 1, msg: msg.to_string() };
            let line = line.trim();
            if let Some(c) = line.strip_prefix('#') {
                let f: Vec<&str> = c.split_whitespace().collect();
                match f.as_slice() {
                    ["seed", v] => sig.seed = v.parse().map_err(|_| perr("bad seed"))?,
                    ["band_hz", a, b] => {
                        sig.band_hz = (a.parse().map_err(|_| perr("bad band"))?, b.parse().map_err(|_| perr("bad band"))?)
                    }
                    _ => {}
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 3 || f.len() > 4 {
                return Err(perr("expected amplitude frequency_hz phase_rad"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| perr("bad number"));
            let out_of_band = match f.get(3) {
                None => false,
                Some(&"oob") => true,
                Some(_) => return Err(perr("unknown tag")),
            };
            sig.tones.push(Tone { amplitude: num(f[0])?, freq_hz: num(f[1])?, phase_rad: num(f[2])?, out_of_band });
        }
        Ok(sig)
    }
}

pub type AntennaId = String;

#[derive(Debug, Clone, PartialEq)]
pub enum InterferenceKind {
    /// Harmonic or sub-harmonic of the receiving antenna's own clock.
    SelfClockDerived,
    /// Leakage of another antenna's clock into this chain.
    CrossClockLeak { source: AntennaId },
    /// Fixed RF line, the same for every antenna.
    FixedRf,
    /// Tone deliberately placed to probe aliasing behavior.
    AliasProbe,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FreqRule {
    ClockMultiple(Rational),
    AbsoluteHz(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceSpec {
    pub kind: InterferenceKind,
    pub rule: FreqRule,
    pub amplitude: f64,
    pub phase_rad: f64,
}

/// Add an interference tone to `target`'s copy of the signal.
pub fn inject(
    sig: &ToneBankSignal,
    spec: &InterferenceSpec,
    clocks: &BTreeMap<AntennaId, RationalFreq>,
    target: &str,
) -> Result<ToneBankSignal, SignalError> {
    let clock = |id: &str| clocks.get(id).copied().ok_or_else(|| SignalError::UnknownAntenna(id.to_string()));
    let own = clock(target)?;
    let freq_hz = match (&spec.kind, &spec.rule) {
        (InterferenceKind::SelfClockDerived, FreqRule::ClockMultiple(m)) => own.scale(m)?.to_f64(),
        (InterferenceKind::CrossClockLeak { source }, FreqRule::ClockMultiple(m)) => clock(source)?.scale(m)?.to_f64(),
        (InterferenceKind::FixedRf | InterferenceKind::AliasProbe, FreqRule::AbsoluteHz(f)) => *f,
        (InterferenceKind::AliasProbe, FreqRule::ClockMultiple(m)) => own.scale(m)?.to_f64(),
        (InterferenceKind::SelfClockDerived, _) => return Err(SignalError::RuleMismatch("absolute", "self-clock")),
        (InterferenceKind::CrossClockLeak { .. }, _) => return Err(SignalError::RuleMismatch("absolute", "cross-clock")),
        (InterferenceKind::FixedRf, _) => return Err(SignalError::RuleMismatch("clock multiple", "fixed RF")),
    };
    let (lo, hi) = sig.band_hz;
    let mut out = sig.clone();
    out.tones.push(Tone {
        amplitude: spec.amplitude,
        freq_hz,
        phase_rad: spec.phase_rad,
        out_of_band: freq_hz < lo || freq_hz > hi,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_tone_rms() {
        let s = synth_signal(3, 1, (10.0, 20.0), AmplitudeDist::Constant).unwrap();
        assert!((s.tones[0].amplitude - 2f64.sqrt()).abs() < 1e-15);
        // Sampled RMS over whole periods agrees.
        let f = s.tones[0].freq_hz;
        let n = 100_000;
        let ms: f64 = (0..n)
            .map(|k| s.eval_at(TimePoint::from_f64(k as f64 / n as f64 * (1000.0 / f))).powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((ms - 1.0).abs() < 1e-6);
    }

    #[test]
    fn band_errors() {
        assert!(matches!(synth_signal(1, 4, (5.0, 1.0), AmplitudeDist::Constant), Err(SignalError::EmptyBand(..))));
        assert!(matches!(synth_signal(1, 0, (1.0, 5.0), AmplitudeDist::Constant), Err(SignalError::NoTones)));
        assert!(synth_signal(1, 4, (2.0, 2.0), AmplitudeDist::Constant).is_ok());
    }

    #[test]
    fn occupancy_is_flat_for_seed_one() {
        let s = synth_signal(1, 256, (0.0, 1.0), AmplitudeDist::default()).unwrap();
        let mut bins = [0.0f64; 32];
        for t in &s.tones {
            bins[((t.freq_hz * 32.0) as usize).min(31)] += 0.5 * t.amplitude * t.amplitude;
        }
        let mean = bins.iter().sum::<f64>() / 32.0;
        for b in bins {
            assert!((10.0 * (b / mean).log10()).abs() <= 6.0, "{b} vs {mean}");
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = synth_signal(9, 16, (1.0, 2.0), AmplitudeDist::default()).unwrap();
        let b = synth_signal(9, 16, (1.0, 2.0), AmplitudeDist::default()).unwrap();
        assert_eq!(a, b);
        let c = synth_signal(10, 16, (1.0, 2.0), AmplitudeDist::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn long_time_keeps_phase() {
        // 3 GHz tone, one hour in: whole/frac split keeps the phase exact to
        // well below a microradian.
        let s = ToneBankSignal::single(1.0, 3.0e9, 0.0);
        let t = Rational::new(3600 * 4 + 1, 4).unwrap();
        assert!(s.eval(&t).abs() < 1e-6);
    }

    #[test]
    fn inject_follows_clock() {
        let mut clocks = BTreeMap::new();
        clocks.insert("a".to_string(), RationalFreq::hz(1_000_000));
        clocks.insert("b".to_string(), RationalFreq::hz(1_000_100));
        let sky = ToneBankSignal::empty((1.0e5, 4.0e5));
        let spec = InterferenceSpec {
            kind: InterferenceKind::CrossClockLeak { source: "b".into() },
            rule: FreqRule::ClockMultiple(Rational::new(1, 4).unwrap()),
            amplitude: 0.1,
            phase_rad: 0.0,
        };
        let s = inject(&sky, &spec, &clocks, "a").unwrap();
        assert_eq!(s.tones[0].freq_hz, 250_025.0);
        assert!(!s.tones[0].out_of_band);
        assert!(matches!(inject(&sky, &spec, &clocks, "c"), Err(SignalError::UnknownAntenna(_))));
        let fixed = InterferenceSpec { kind: InterferenceKind::FixedRf, rule: FreqRule::AbsoluteHz(1.0e3), ..spec };
        assert!(inject(&sky, &fixed, &clocks, "a").unwrap().tones[0].out_of_band);
    }

    proptest! {
        #[test]
        fn text_round_trip(seed in 0u64..1000, n in 1usize..40) {
            let s = synth_signal(seed, n, (1.0e3, 5.0e5), AmplitudeDist::default()).unwrap();
            prop_assert_eq!(ToneBankSignal::from_text(&s.to_text()).unwrap(), s);
        }

        #[test]
        fn unit_rms_after_normalization(seed in 0u64..1000, n in 1usize..64) {
            let s = synth_signal(seed, n, (0.1, 0.4), AmplitudeDist::default()).unwrap();
            prop_assert!((s.rms() - 1.0).abs() < 1e-12);
            prop_assert!(s.tones.iter().all(|t| (0.1..=0.4).contains(&t.freq_hz)));
        }
    }
}
