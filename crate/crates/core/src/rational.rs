//! Exact rational time and frequency arithmetic.
//!
//! Clock frequencies, epochs and sample positions are kept as ratios of
//! `i128` so that accumulated sample positions never drift. Every arithmetic
//! operation is checked and reports [`RationalError::Overflow`] instead of
//! wrapping.
//!
//! [`PhaseAccumulator`] is the resampler's position counter. It tracks
//! `p_n = p_0 + n * ratio` exactly with integer adds only, and maps each
//! position to a (base input sample, filter phase) pair.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RationalError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("negative frequency {0}")]
    NegativeFrequency(Rational),
    #[error("rational arithmetic overflow")]
    Overflow,
    #[error("cannot parse {0:?} as an exact rational")]
    Parse(String),
    #[error("ratio {0} is outside (0.5, 1.5)")]
    RatioOutOfRange(Rational),
    #[error("phase count {0} must be even and at least 2")]
    BadPhaseCount(u32),
}

/// Exact signed rational number backed by `Ratio<i128>`, always reduced.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rational(Ratio<i128>);

impl Rational {
    pub const ZERO: Rational = Rational(Ratio::new_raw(0, 1));
    pub const ONE: Rational = Rational(Ratio::new_raw(1, 1));

    pub fn new(num: i128, den: i128) -> Result<Self, RationalError> {
        if den == 0 {
            return Err(RationalError::ZeroDenominator);
        }
        if num == i128::MIN || den == i128::MIN {
            return Err(RationalError::Overflow);
        }
        Ok(Rational(Ratio::new(num, den)))
    }

    pub fn integer(n: i128) -> Self {
        Rational(Ratio::from_integer(n))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn checked_add(&self, o: &Self) -> Result<Self, RationalError> {
        self.0.checked_add(&o.0).map(Rational).ok_or(RationalError::Overflow)
    }

    pub fn checked_sub(&self, o: &Self) -> Result<Self, RationalError> {
        self.0.checked_sub(&o.0).map(Rational).ok_or(RationalError::Overflow)
    }

    pub fn checked_mul(&self, o: &Self) -> Result<Self, RationalError> {
        self.0.checked_mul(&o.0).map(Rational).ok_or(RationalError::Overflow)
    }

    pub fn checked_div(&self, o: &Self) -> Result<Self, RationalError> {
        if o.is_zero() {
            return Err(RationalError::ZeroDenominator);
        }
        self.0.checked_div(&o.0).map(Rational).ok_or(RationalError::Overflow)
    }

    pub fn mul_int(&self, k: i128) -> Result<Self, RationalError> {
        self.checked_mul(&Rational::integer(k))
    }

    pub fn recip(&self) -> Result<Self, RationalError> {
        Rational::ONE.checked_div(self)
    }

    pub fn floor(&self) -> i128 {
        Integer::div_floor(&self.numer(), &self.denom())
    }

    pub fn ceil(&self) -> i128 {
        Integer::div_ceil(&self.numer(), &self.denom())
    }

    /// Round to nearest integer, ties to even.
    pub fn round_half_even(&self) -> i128 {
        let (q, r) = self.numer().div_mod_floor(&self.denom());
        match (2 * r).cmp(&self.denom()) {
            Ordering::Less => q,
            Ordering::Greater => q + 1,
            Ordering::Equal => q + (q & 1),
        }
    }

    /// `self - floor(self)`, in `[0, 1)`.
    pub fn fract(&self) -> Self {
        let r = self.numer().mod_floor(&self.denom());
        Rational(Ratio::new_raw(r, self.denom()))
    }

    /// Nearest `f64`, splitting off the integer part first so large values
    /// keep their fractional precision.
    pub fn to_f64(&self) -> f64 {
        let (q, r) = self.numer().div_mod_floor(&self.denom());
        q as f64 + r as f64 / self.denom() as f64
    }

    /// Nearest rational with the given denominator.
    pub fn approx_f64(x: f64, den: i128) -> Result<Self, RationalError> {
        let scaled = (x * den as f64).round();
        if !scaled.is_finite() || scaled.abs() >= 1.0e37 {
            return Err(RationalError::Overflow);
        }
        Rational::new(scaled as i128, den)
    }

    pub fn inner(&self) -> &Ratio<i128> {
        &self.0
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl std::ops::Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

/// Parses `"n"`, `"n/d"` or an exact decimal such as `"3000000000.1"` or
/// `"-1.25e3"`. Decimals never pass through a float.
impl FromStr for Rational {
    type Err = RationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RationalError::Parse(s.to_string());
        let t = s.trim().replace('_', "");
        if let Some((n, d)) = t.split_once('/') {
            let n: i128 = n.trim().parse().map_err(|_| bad())?;
            let d: i128 = d.trim().parse().map_err(|_| bad())?;
            return Rational::new(n, d).map_err(|e| match e {
                RationalError::ZeroDenominator => e,
                _ => bad(),
            });
        }
        let (mant, exp) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (&t[..], 0),
        };
        let (neg, mant) = match mant.strip_prefix('-') {
            Some(m) => (true, m),
            None => (false, mant.strip_prefix('+').unwrap_or(mant)),
        };
        let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        let mut num: i128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
        let scale = exp - frac.len() as i32;
        if scale.unsigned_abs() > 36 {
            return Err(RationalError::Overflow);
        }
        let p = 10i128.pow(scale.unsigned_abs());
        if neg {
            num = -num;
        }
        if scale >= 0 {
            num.checked_mul(p).map(Rational::integer).ok_or(RationalError::Overflow)
        } else {
            Rational::new(num, p)
        }
    }
}

/// Non-negative frequency in hertz.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalFreq(Rational);

/// Builds a frequency from numerator and denominator.
pub fn make_rational(num: i128, den: i128) -> Result<RationalFreq, RationalError> {
    RationalFreq::try_from(Rational::new(num, den)?)
}

impl RationalFreq {
    pub fn hz(n: u64) -> Self {
        RationalFreq(Rational::integer(n as i128))
    }

    pub fn new(num: i128, den: i128) -> Result<Self, RationalError> {
        make_rational(num, den)
    }

    pub fn as_rational(&self) -> Rational {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    /// `self / other` as an exact ratio.
    pub fn ratio_to(&self, other: &RationalFreq) -> Result<Rational, RationalError> {
        self.0.checked_div(&other.0)
    }

    /// Frequency shifted by a signed offset.
    pub fn offset(&self, delta: &Rational) -> Result<RationalFreq, RationalError> {
        RationalFreq::try_from(self.0.checked_add(delta)?)
    }

    pub fn scale(&self, k: &Rational) -> Result<RationalFreq, RationalError> {
        RationalFreq::try_from(self.0.checked_mul(k)?)
    }
}

impl TryFrom<Rational> for RationalFreq {
    type Error = RationalError;
    fn try_from(r: Rational) -> Result<Self, RationalError> {
        if r.is_negative() {
            Err(RationalError::NegativeFrequency(r))
        } else {
            Ok(RationalFreq(r))
        }
    }
}

impl FromStr for RationalFreq {
    type Err = RationalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RationalFreq::try_from(s.parse::<Rational>()?)
    }
}

impl fmt::Debug for RationalFreq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Hz", self.0)
    }
}

impl fmt::Display for RationalFreq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Serialized as a string (`"1001/1000"`, `"3000000000.1"`); integers are
/// also accepted on input. Floats are rejected because they are not exact.
impl serde::Serialize for Rational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

struct RationalVisitor;

impl serde::de::Visitor<'_> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("an integer or a string such as \"1001/1000\" or \"3000000000.1\"")
    }

    fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Rational, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Rational, E> {
        Ok(Rational::integer(v as i128))
    }

    fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Rational, E> {
        Ok(Rational::integer(v as i128))
    }
}

impl<'de> serde::Deserialize<'de> for Rational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(RationalVisitor)
    }
}

impl serde::Serialize for RationalFreq {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for RationalFreq {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = Rational::deserialize(d)?;
        RationalFreq::try_from(r).map_err(serde::de::Error::custom)
    }
}

/// Exact `x = int + rem / den` with `0 <= rem < den`, plus the split
/// `rem * m = sub * den + sub_rem` for a fixed multiplier `m`. Stepping by a
/// constant increment needs only additions and compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct FracTracker {
    den: i128,
    m: i128,
    int: i128,
    rem: i128,
    sub: i128,
    sub_rem: i128,
    // Increment in the same representation.
    inc_int: i128,
    inc_rem: i128,
    inc_sub: i128,
    inc_sub_rem: i128,
}

impl FracTracker {
    pub(crate) fn new(start: Rational, inc: Rational, m: i128) -> Result<Self, RationalError> {
        let den = num_integer::lcm(start.denom(), inc.denom());
        let scale = |r: Rational| -> Result<(i128, i128), RationalError> {
            let n = r.numer().checked_mul(den / r.denom()).ok_or(RationalError::Overflow)?;
            Ok(n.div_mod_floor(&den))
        };
        let (int, rem) = scale(start)?;
        let (inc_int, inc_rem) = scale(inc)?;
        let split = |rem: i128| -> Result<(i128, i128), RationalError> {
            Ok(rem.checked_mul(m).ok_or(RationalError::Overflow)?.div_mod_floor(&den))
        };
        let (sub, sub_rem) = split(rem)?;
        let (inc_sub, inc_sub_rem) = split(inc_rem)?;
        Ok(FracTracker { den, m, int, rem, sub, sub_rem, inc_int, inc_rem, inc_sub, inc_sub_rem })
    }

    #[inline]
    pub(crate) fn step(&mut self) {
        self.int += self.inc_int;
        self.rem += self.inc_rem;
        self.sub += self.inc_sub;
        self.sub_rem += self.inc_sub_rem;
        if self.sub_rem >= self.den {
            self.sub_rem -= self.den;
            self.sub += 1;
        }
        if self.rem >= self.den {
            self.rem -= self.den;
            self.int += 1;
            self.sub -= self.m;
        }
    }

    pub(crate) fn value(&self) -> Result<Rational, RationalError> {
        let n = self
            .int
            .checked_mul(self.den)
            .and_then(|v| v.checked_add(self.rem))
            .ok_or(RationalError::Overflow)?;
        Rational::new(n, self.den)
    }

    /// `(int, rem, den)` with `x = int + rem / den`.
    #[inline]
    pub(crate) fn parts(&self) -> (i128, i128, i128) {
        (self.int, self.rem, self.den)
    }

    /// `round_half_even(frac(x) * m)` in `[0, m]`, and the integer part.
    #[inline]
    pub(crate) fn rounded_sub(&self) -> (i128, i128) {
        let up = match (2 * self.sub_rem).cmp(&self.den) {
            Ordering::Less => 0,
            Ordering::Greater => 1,
            Ordering::Equal => self.sub & 1,
        };
        (self.int, self.sub + up)
    }
}

/// One accumulator update: how many new input samples the output consumes
/// and which filter phase it uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub advance: i128,
    pub lut_index: u32,
}

/// Exact fractional-position counter for a resampler with `phases` filter
/// phases.
///
/// Position `p` maps to base sample `b` and phase index `i` via
/// `q = round_half_even(p * P)`, `b = floor((q + P/2) / P)`,
/// `i = (q + P/2) mod P`. Phase `i` carries the fractional offset
/// `(i - P/2) / P`, so `p ~= b + (i - P/2) / P`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseAccumulator {
    ratio: Rational,
    phases: u32,
    track: FracTracker,
    base: i128,
    lut_index: u32,
}

impl PhaseAccumulator {
    pub fn new(ratio: Rational, phases: u32) -> Result<Self, RationalError> {
        Self::with_position(ratio, phases, Rational::ZERO)
    }

    /// `ratio` is input samples per output sample, `f_a / f_c`.
    pub fn with_position(ratio: Rational, phases: u32, position: Rational) -> Result<Self, RationalError> {
        let half = Rational::new(1, 2)?;
        if ratio.checked_sub(&Rational::ONE)?.abs() >= half {
            return Err(RationalError::RatioOutOfRange(ratio));
        }
        if phases < 2 || !phases.is_multiple_of(2) {
            return Err(RationalError::BadPhaseCount(phases));
        }
        let track = FracTracker::new(position, ratio, phases as i128)?;
        let (base, lut_index) = Self::map(&track, phases);
        Ok(PhaseAccumulator { ratio, phases, track, base, lut_index })
    }

    #[inline]
    fn map(track: &FracTracker, phases: u32) -> (i128, u32) {
        let p = phases as i128;
        let (int, sub) = track.rounded_sub();
        let shifted = sub + p / 2;
        if shifted >= p {
            (int + 1, (shifted - p) as u32)
        } else {
            (int, shifted as u32)
        }
    }

    /// Map an arbitrary position to `(base, lut_index)`.
    pub fn quantize(position: Rational, phases: u32) -> Result<(i128, u32), RationalError> {
        let track = FracTracker::new(position, Rational::ZERO, phases as i128)?;
        Ok(Self::map(&track, phases))
    }

    /// Advance to the next output position.
    #[inline]
    pub fn step(&mut self) -> Step {
        self.track.step();
        let (base, lut_index) = Self::map(&self.track, self.phases);
        let advance = base - self.base;
        self.base = base;
        self.lut_index = lut_index;
        Step { advance, lut_index }
    }

    /// Position `k` steps ahead, computed by multiplication rather than by
    /// repeated stepping.
    pub fn peek(&self, k: u64) -> Result<(i128, u32), RationalError> {
        let p = self.position()?.checked_add(&self.ratio.mul_int(k as i128)?)?;
        Self::quantize(p, self.phases)
    }

    /// Jump `k` steps ahead by multiplication.
    pub fn jump(&mut self, k: u64) -> Result<(), RationalError> {
        let p = self.position()?.checked_add(&self.ratio.mul_int(k as i128)?)?;
        *self = Self::with_position(self.ratio, self.phases, p)?;
        Ok(())
    }

    pub fn position(&self) -> Result<Rational, RationalError> {
        self.track.value()
    }

    pub fn base(&self) -> i128 {
        self.base
    }

    pub fn lut_index(&self) -> u32 {
        self.lut_index
    }

    pub fn ratio(&self) -> Rational {
        self.ratio
    }

    pub fn phases(&self) -> u32 {
        self.phases
    }
}

/// Exact phase in cycles advancing by a constant per sample, quantized to a
/// `2^bits` entry table. Used for the SSB mixer's numerically controlled
/// oscillator.
#[derive(Debug, Clone)]
pub struct CycleCounter {
    track: FracTracker,
    bits: u32,
}

impl CycleCounter {
    pub fn new(start_cycles: Rational, cycles_per_sample: Rational, bits: u32) -> Result<Self, RationalError> {
        if bits == 0 || bits > 24 {
            return Err(RationalError::Overflow);
        }
        Ok(CycleCounter { track: FracTracker::new(start_cycles, cycles_per_sample, 1i128 << bits)?, bits })
    }

    /// Table index for the current phase, rounded to nearest.
    #[inline]
    pub fn index(&self) -> usize {
        let (_, sub) = self.track.rounded_sub();
        (sub as usize) & ((1usize << self.bits) - 1)
    }

    #[inline]
    pub fn step(&mut self) {
        self.track.step();
    }

    pub fn cycles(&self) -> Result<Rational, RationalError> {
        self.track.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d).unwrap()
    }

    #[test]
    fn parses_decimal_exactly() {
        let f: RationalFreq = "3000000000.1".parse().unwrap();
        assert_eq!(f.as_rational(), r(30000000001, 10));
        assert_eq!("1001/1000".parse::<Rational>().unwrap(), r(1001, 1000));
        assert_eq!("-2.5e3".parse::<Rational>().unwrap(), Rational::integer(-2500));
        assert_eq!("12e-2".parse::<Rational>().unwrap(), r(3, 25));
        assert!("1/0".parse::<Rational>().is_err());
        assert!("abc".parse::<Rational>().is_err());
        assert!(matches!("-5".parse::<RationalFreq>(), Err(RationalError::NegativeFrequency(_))));
    }

    #[test]
    fn make_rational_errors() {
        assert_eq!(make_rational(1, 0), Err(RationalError::ZeroDenominator));
        assert!(matches!(make_rational(-1, 3), Err(RationalError::NegativeFrequency(_))));
        assert_eq!(make_rational(4, -8).unwrap_err(), RationalError::NegativeFrequency(r(-1, 2)));
    }

    #[test]
    fn overflow_is_reported() {
        let big = Rational::integer(i128::MAX / 2);
        assert_eq!(big.mul_int(4), Err(RationalError::Overflow));
    }

    #[test]
    fn rounding_ties_to_even() {
        assert_eq!(r(5, 2).round_half_even(), 2);
        assert_eq!(r(7, 2).round_half_even(), 4);
        assert_eq!(r(-5, 2).round_half_even(), -2);
        assert_eq!(r(-7, 3).round_half_even(), -2);
        assert_eq!(r(-7, 3).floor(), -3);
        assert_eq!(r(-7, 3).ceil(), -2);
    }

    #[test]
    fn unit_ratio_never_skips() {
        let mut acc = PhaseAccumulator::new(Rational::ONE, 1024).unwrap();
        for _ in 0..10_000 {
            assert_eq!(acc.step().advance, 1);
        }
    }

    #[test]
    fn slow_ratio_repeats_ten_times_in_ten_thousand() {
        let mut acc = PhaseAccumulator::new(r(999, 1000), 1024).unwrap();
        let repeats = (0..10_000).filter(|_| acc.step().advance == 0).count();
        assert_eq!(repeats, 10);
    }

    #[test]
    fn fast_ratio_skips_per_million() {
        // Outputs 0..10^6 starting at p = 0 consume
        // round(999_999 * 1.001) = 1_000_999 input steps, 1000 more than
        // the number of output steps.
        let mut acc = PhaseAccumulator::new(r(1001, 1000), 1024).unwrap();
        let skips = (0..999_999).filter(|_| acc.step().advance == 2).count();
        assert_eq!(skips, 1000);
        assert_eq!(acc.base(), 1_000_999);
    }

    #[test]
    fn ratio_bounds() {
        assert!(matches!(PhaseAccumulator::new(r(3, 2), 8), Err(RationalError::RatioOutOfRange(_))));
        assert!(matches!(PhaseAccumulator::new(r(1, 2), 8), Err(RationalError::RatioOutOfRange(_))));
        assert!(matches!(PhaseAccumulator::new(Rational::ONE, 3), Err(RationalError::BadPhaseCount(3))));
    }

    #[test]
    fn quantize_midpoint_and_carry() {
        // p = 0.5 exactly: frac = -1/2 relative to base 1, phase 0.
        assert_eq!(PhaseAccumulator::quantize(r(1, 2), 8).unwrap(), (1, 0));
        // p just below 0.5 rounds onto the carry boundary.
        assert_eq!(PhaseAccumulator::quantize(r(4999, 10000), 8).unwrap(), (1, 0));
        assert_eq!(PhaseAccumulator::quantize(r(3, 8), 8).unwrap(), (0, 7));
        assert_eq!(PhaseAccumulator::quantize(r(-3, 8), 8).unwrap(), (0, 1));
        assert_eq!(PhaseAccumulator::quantize(Rational::integer(5), 8).unwrap(), (5, 4));
    }

    #[test]
    fn cycle_counter_indexes() {
        let mut c = CycleCounter::new(Rational::ZERO, r(1, 4), 4).unwrap();
        let idx: Vec<usize> = (0..6)
            .map(|_| {
                let i = c.index();
                c.step();
                i
            })
            .collect();
        assert_eq!(idx, vec![0, 4, 8, 12, 0, 4]);
        let c = CycleCounter::new(r(-1, 16), r(1, 3), 4).unwrap();
        assert_eq!(c.index(), 15);
    }

    fn brute_period(seq: &[u32]) -> usize {
        (1..seq.len() / 2).find(|&p| seq.iter().zip(&seq[p..]).all(|(a, b)| a == b)).unwrap_or(0)
    }

    proptest! {
        #[test]
        fn position_is_exact(num in 1u32..2000, den in 1u32..2000, p0n in -50i64..50, p0d in 1i64..40, n in 1u64..3000) {
            let ratio = r(num as i128, den as i128);
            prop_assume!((ratio.to_f64() - 1.0).abs() < 0.49);
            let p0 = r(p0n as i128, p0d as i128);
            let mut acc = PhaseAccumulator::with_position(ratio, 1024, p0).unwrap();
            for _ in 0..n {
                acc.step();
            }
            let expect = p0.checked_add(&ratio.mul_int(n as i128).unwrap()).unwrap();
            prop_assert_eq!(acc.position().unwrap(), expect);
            prop_assert_eq!((acc.base(), acc.lut_index()), PhaseAccumulator::quantize(expect, 1024).unwrap());
        }

        #[test]
        fn advance_and_index_ranges(num in 501u32..1499, steps in 1usize..2000) {
            let mut acc = PhaseAccumulator::new(r(num as i128, 1000), 64).unwrap();
            for _ in 0..steps {
                let s = acc.step();
                prop_assert!((0..=2).contains(&s.advance));
                prop_assert!(s.lut_index < 64);
            }
        }

        #[test]
        fn quantized_position_error_is_half_phase(pn in -10_000i64..10_000, pd in 1i64..5000) {
            let p = r(pn as i128, pd as i128);
            let (b, i) = PhaseAccumulator::quantize(p, 256).unwrap();
            let approx = b as f64 + (i as f64 - 128.0) / 256.0;
            prop_assert!((approx - p.to_f64()).abs() <= 0.5 / 256.0 + 1e-12);
        }

        #[test]
        fn lut_period_is_fraction_denominator(den in 2i64..200, k in 1i64..200) {
            // Ratios 1 + k/den with den <= P give a LUT-index sequence whose
            // minimal period is the reduced denominator.
            let frac = r(k as i128 % den as i128, den as i128);
            prop_assume!(!frac.is_zero() && frac.to_f64() < 0.49);
            let ratio = Rational::ONE.checked_add(&frac).unwrap();
            let mut acc = PhaseAccumulator::new(ratio, 256).unwrap();
            let seq: Vec<u32> = (0..4 * den as usize + 8).map(|_| acc.step().lut_index).collect();
            prop_assert_eq!(brute_period(&seq) as i128, frac.denom());
        }
    }
}
