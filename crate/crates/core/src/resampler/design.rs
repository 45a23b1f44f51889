//! Polyphase fractional-delay coefficient bank.
//!
//! Phase `i` of a `P`-phase, `N`-tap bank interpolates at fractional offset
//! `d_i = (i - P/2) / P`: its taps are a Kaiser-windowed sinc centered at
//! `c + d_i`, where `c = (N - 1) / 2`. Each phase is normalized to unit DC
//! gain before quantization, and the quantized taps are nudged so every
//! phase sums to exactly `2^(bits - 1)`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use super::response::bank_metrics;
use super::ResampleError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Kaiser { beta: f64 },
    /// Kaiser with `beta` chosen to minimize the worst passband delay error.
    KaiserAuto,
    Rectangular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankSpec {
    pub taps: usize,
    pub phases: usize,
    /// Signed tap width in bits; `None` keeps float taps.
    pub coeff_bits: Option<u32>,
    /// Passband as fractions of the input Nyquist frequency.
    pub passband: (f64, f64),
    pub window: Window,
    /// Reject the design if passband ripple exceeds this.
    pub max_ripple_db: Option<f64>,
}

pub const DEFAULT_PASSBAND: (f64, f64) = (0.0833, 0.9167);

impl Default for BankSpec {
    fn default() -> Self {
        BankSpec {
            taps: 56,
            phases: 1024,
            coeff_bits: Some(19),
            passband: DEFAULT_PASSBAND,
            window: Window::KaiserAuto,
            max_ripple_db: Some(0.01),
        }
    }
}

impl BankSpec {
    /// Unconstrained bank with no response check, for small test filters.
    pub fn plain(taps: usize, phases: usize, window: Window) -> BankSpec {
        BankSpec { taps, phases, coeff_bits: None, window, max_ripple_db: None, ..BankSpec::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBank {
    taps: usize,
    phases: usize,
    coeff_bits: Option<u32>,
    window: Window,
    beta: Option<f64>,
    passband: (f64, f64),
    /// Unquantized, DC-normalized taps, `phases * taps`, phase-major.
    prototype: Vec<f64>,
    /// Quantized taps, if `coeff_bits` is set.
    fixed: Option<Vec<i32>>,
    /// Taps actually used by the float datapath.
    effective: Vec<f64>,
}

/// Modified Bessel function of the first kind, order 0, by power series.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// `sin(pi x) / (pi x)`, exactly zero at nonzero integers.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.fract() == 0.0 {
        0.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

fn window_at(window: Window, beta: f64, x: f64, half_width: f64) -> f64 {
    match window {
        Window::Rectangular => 1.0,
        _ => {
            let r = x / half_width;
            if r.abs() >= 1.0 {
                return bessel_i0(0.0) / bessel_i0(beta);
            }
            bessel_i0(beta * (1.0 - r * r).sqrt()) / bessel_i0(beta)
        }
    }
}

fn prototype_phase(taps: usize, phases: usize, i: usize, window: Window, beta: f64) -> Vec<f64> {
    let c = (taps as f64 - 1.0) / 2.0;
    let d = (i as f64 - phases as f64 / 2.0) / phases as f64;
    let half = taps as f64 / 2.0;
    let mut h: Vec<f64> = (0..taps)
        .map(|m| {
            let x = m as f64 - c - d;
            sinc(x) * window_at(window, beta, x, half)
        })
        .collect();
    let s: f64 = h.iter().sum();
    for v in &mut h {
        *v /= s;
    }
    h
}

/// Quantize one DC-normalized phase to `bits`-bit signed taps whose sum is
/// exactly `2^(bits - 1)`.
fn quantize_phase(h: &[f64], bits: u32, delay: f64) -> Vec<i32> {
    let scale = (1i64 << (bits - 1)) as f64;
    let (lo, hi) = (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1);
    let mut q: Vec<i64> = h.iter().map(|&v| ((v * scale).round() as i64).clamp(lo, hi)).collect();
    let mut resid = (1i64 << (bits - 1)) - q.iter().sum::<i64>();
    while resid != 0 {
        let dir = resid.signum();
        // Move the tap whose rounding error points most toward the
        // residual; on ties prefer taps nearest the interpolation point.
        let best = (0..h.len())
            .filter(|&m| (q[m] + dir) >= lo && (q[m] + dir) <= hi)
            .max_by(|&a, &b| {
                let ea = (h[a] * scale - q[a] as f64) * dir as f64;
                let eb = (h[b] * scale - q[b] as f64) * dir as f64;
                ea.total_cmp(&eb).then_with(|| (b as f64 - delay).abs().total_cmp(&(a as f64 - delay).abs()))
            })
            .expect("some tap can absorb the residual");
        q[best] += dir;
        resid -= dir;
    }
    q.into_iter().map(|v| v as i32).collect()
}

fn build(spec: &BankSpec, beta: f64) -> CoefficientBank {
    let (n, p) = (spec.taps, spec.phases);
    let prototype: Vec<f64> = (0..p).flat_map(|i| prototype_phase(n, p, i, spec.window, beta)).collect();
    let c = (n as f64 - 1.0) / 2.0;
    let fixed = spec.coeff_bits.map(|bits| {
        (0..p)
            .flat_map(|i| {
                let d = (i as f64 - p as f64 / 2.0) / p as f64;
                quantize_phase(&prototype[i * n..(i + 1) * n], bits, c + d)
            })
            .collect::<Vec<i32>>()
    });
    let effective = match (&fixed, spec.coeff_bits) {
        (Some(f), Some(bits)) => {
            let s = (1i64 << (bits - 1)) as f64;
            f.iter().map(|&v| v as f64 / s).collect()
        }
        _ => prototype.clone(),
    };
    let beta = match spec.window {
        Window::Rectangular => None,
        _ => Some(beta),
    };
    CoefficientBank {
        taps: n,
        phases: p,
        coeff_bits: spec.coeff_bits,
        window: spec.window,
        beta,
        passband: spec.passband,
        prototype,
        fixed,
        effective,
    }
}

/// Worst absolute passband delay error of the float prototype at `beta`,
/// over a subset of phases.
fn delay_objective(spec: &BankSpec, beta: f64) -> f64 {
    let probe = BankSpec { coeff_bits: None, window: Window::Kaiser { beta }, ..spec.clone() };
    let stride = (spec.phases / 32).max(1);
    let bank = build(&probe, beta);
    let m = bank_metrics(&bank, spec.passband, 48, stride);
    m.max_abs_delay_err
}

fn golden_section(lo: f64, hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

pub fn design_bank(spec: &BankSpec) -> Result<CoefficientBank, ResampleError> {
    let bad = |m: String| Err(ResampleError::BadSpec(m));
    if spec.taps < 2 {
        return bad(format!("need at least 2 taps, got {}", spec.taps));
    }
    if spec.phases < 2 || !spec.phases.is_power_of_two() {
        return bad(format!("phase count {} is not a power of two >= 2", spec.phases));
    }
    if let Some(b) = spec.coeff_bits {
        if !(2..=31).contains(&b) {
            return bad(format!("coefficient width {b} outside 2..=31"));
        }
    }
    let (lo, hi) = spec.passband;
    if !(0.0..1.0).contains(&lo) || !(lo < hi && hi <= 1.0) {
        return bad(format!("passband ({lo}, {hi}) must lie in [0, 1]"));
    }
    let beta = match spec.window {
        Window::Kaiser { beta } if beta >= 0.0 => beta,
        Window::Kaiser { beta } => return bad(format!("negative Kaiser beta {beta}")),
        Window::KaiserAuto => golden_section(4.0, 10.0, 24, |b| delay_objective(spec, b)),
        Window::Rectangular => 0.0,
    };
    let bank = build(spec, beta);
    if let Some(limit) = spec.max_ripple_db {
        let m = bank_metrics(&bank, spec.passband, 96, 1);
        if m.ripple_db > limit {
            return Err(ResampleError::DesignInfeasible(format!(
                "passband ripple {:.4} dB exceeds {limit} dB",
                m.ripple_db
            )));
        }
    }
    Ok(bank)
}

impl CoefficientBank {
    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn coeff_bits(&self) -> Option<u32> {
        self.coeff_bits
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn passband(&self) -> (f64, f64) {
        self.passband
    }

    /// `(N - 1) / 2`, the bulk delay in input samples.
    pub fn center(&self) -> f64 {
        (self.taps as f64 - 1.0) / 2.0
    }

    /// Fractional offset carried by phase `i`.
    pub fn phase_offset(&self, i: usize) -> f64 {
        (i as f64 - self.phases as f64 / 2.0) / self.phases as f64
    }

    /// Effective taps of phase `i`, oldest sample first.
    #[inline]
    pub fn phase(&self, i: usize) -> &[f64] {
        &self.effective[i * self.taps..(i + 1) * self.taps]
    }

    pub fn prototype_phase(&self, i: usize) -> &[f64] {
        &self.prototype[i * self.taps..(i + 1) * self.taps]
    }

    #[inline]
    pub fn fixed_phase(&self, i: usize) -> Option<&[i32]> {
        self.fixed.as_ref().map(|f| &f[i * self.taps..(i + 1) * self.taps])
    }

    /// Fraction bits of the fixed taps (`bits - 1`).
    pub fn coeff_frac_bits(&self) -> Option<u32> {
        self.coeff_bits.map(|b| b - 1)
    }

    /// Largest L1 norm across phases, the worst-case gain for a full-scale
    /// input.
    pub fn max_l1_norm(&self) -> f64 {
        (0..self.phases).map(|i| self.phase(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Text form: header lines, then one phase per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "taps {}", self.taps).unwrap();
        writeln!(s, "phases {}", self.phases).unwrap();
        match self.coeff_bits {
            Some(b) => writeln!(s, "coeff_bits {b}").unwrap(),
            None => writeln!(s, "coeff_bits float").unwrap(),
        }
        if let Some(b) = self.beta {
            writeln!(s, "beta {b:e}").unwrap();
        }
        writeln!(s, "passband {:e} {:e}", self.passband.0, self.passband.1).unwrap();
        for i in 0..self.phases {
            let row: Vec<String> = match self.fixed_phase(i) {
                Some(f) => f.iter().map(|v| v.to_string()).collect(),
                None => self.phase(i).iter().map(|v| format!("{v:e}")).collect(),
            };
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        s
    }

    /// Parse the text form. The unquantized prototype of a fixed bank is
    /// not stored, so it is reconstructed from the quantized taps.
    pub fn from_text(text: &str) -> Result<CoefficientBank, ResampleError> {
        let bad = |m: &str| ResampleError::BadSpec(format!("bank text: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<Vec<String>, ResampleError> {
            let l = lines.next().ok_or_else(|| bad("truncated header"))?;
            let mut f = l.split_whitespace();
            if f.next() != Some(key) {
                return Err(bad(&format!("expected {key}")));
            }
            Ok(f.map(str::to_string).collect())
        };
        let num = |v: &[String]| v.first().and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| bad("bad count"));
        let taps = num(&header("taps")?)?;
        let phases = num(&header("phases")?)?;
        let cb = header("coeff_bits")?;
        let coeff_bits = match cb.first().map(String::as_str) {
            Some("float") => None,
            Some(v) => Some(v.parse::<u32>().map_err(|_| bad("bad coeff_bits"))?),
            None => return Err(bad("bad coeff_bits")),
        };
        let rest: Vec<&str> = lines.collect();
        let (beta, rest) = match rest.first().and_then(|l| l.strip_prefix("beta ")) {
            Some(b) => (Some(b.trim().parse::<f64>().map_err(|_| bad("bad beta"))?), &rest[1..]),
            None => (None, &rest[..]),
        };
        let (passband, rest) = match rest.first().and_then(|l| l.strip_prefix("passband ")) {
            Some(p) => {
                let v: Vec<f64> = p.split_whitespace().map(|x| x.parse().map_err(|_| bad("bad passband"))).collect::<Result<_, _>>()?;
                ((v[0], v[1]), &rest[1..])
            }
            None => (DEFAULT_PASSBAND, rest),
        };
        if rest.len() != phases {
            return Err(bad("phase row count"));
        }
        let mut fixed = Vec::new();
        let mut effective = Vec::new();
        for row in rest {
            let f: Vec<&str> = row.split_whitespace().collect();
            if f.len() != taps {
                return Err(bad("tap count"));
            }
            for v in f {
                match coeff_bits {
                    Some(b) => {
                        let q: i32 = v.parse().map_err(|_| bad("bad tap"))?;
                        fixed.push(q);
                        effective.push(q as f64 / (1i64 << (b - 1)) as f64);
                    }
                    None => effective.push(v.parse::<f64>().map_err(|_| bad("bad tap"))?),
                }
            }
        }
        Ok(CoefficientBank {
            taps,
            phases,
            coeff_bits,
            window: beta.map(|beta| Window::Kaiser { beta }).unwrap_or(Window::Rectangular),
            beta,
            passband,
            prototype: effective.clone(),
            fixed: coeff_bits.map(|_| fixed),
            effective,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bessel_i0_values() {
        // I0(1) and I0(5), from standard tables.
        assert!((bessel_i0(1.0) - 1.2660658777520082).abs() < 1e-14);
        assert!((bessel_i0(5.0) - 27.239871823604442).abs() < 1e-11);
    }

    #[test]
    fn two_phase_two_tap_linear_interpolator() {
        let bank = design_bank(&BankSpec::plain(2, 2, Window::Rectangular)).unwrap();
        // Phase P/2 interpolates halfway between the two samples.
        assert_eq!(bank.phase(1), &[0.5, 0.5]);
        // Phase 0 sits exactly on a sample.
        assert_eq!(bank.phase(0), &[1.0, 0.0]);
    }

    #[test]
    fn default_bank_sums_and_symmetry() {
        let bank = design_bank(&BankSpec::default()).unwrap();
        let beta = bank.beta().unwrap();
        assert!((6.5..8.5).contains(&beta), "beta {beta}");
        let one = 1i64 << 18;
        for i in 0..bank.phases() {
            let f = bank.fixed_phase(i).unwrap();
            assert_eq!(f.iter().map(|&v| v as i64).sum::<i64>(), one);
        }
        let mid = bank.fixed_phase(512).unwrap();
        for m in 0..28 {
            assert!((mid[m] - mid[55 - m]).abs() <= 1, "tap {m}");
        }
        // Gain bound used for requantizer headroom.
        let l1 = bank.max_l1_norm();
        assert!((2.6..3.0).contains(&l1), "{l1}");
    }

    #[test]
    fn rejects_bad_specs() {
        let s = BankSpec { phases: 1000, ..BankSpec::default() };
        assert!(matches!(design_bank(&s), Err(ResampleError::BadSpec(_))));
        let s = BankSpec { taps: 8, coeff_bits: Some(10), ..BankSpec::default() };
        assert!(matches!(design_bank(&s), Err(ResampleError::DesignInfeasible(_))));
    }

    #[test]
    fn text_round_trip() {
        let bank = design_bank(&BankSpec { taps: 12, phases: 16, max_ripple_db: None, ..BankSpec::default() }).unwrap();
        let back = CoefficientBank::from_text(&bank.to_text()).unwrap();
        for i in 0..16 {
            assert_eq!(bank.fixed_phase(i), back.fixed_phase(i));
            assert_eq!(bank.phase(i), back.phase(i));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn quantized_phases_sum_exactly(taps in 4usize..40, log_p in 1u32..7, bits in 8u32..24, beta in 2.0f64..9.0) {
            let spec = BankSpec { taps, phases: 1 << log_p, coeff_bits: Some(bits), window: Window::Kaiser { beta }, max_ripple_db: None, ..BankSpec::default() };
            let bank = design_bank(&spec).unwrap();
            for i in 0..bank.phases() {
                let s: f64 = bank.phase(i).iter().sum();
                prop_assert!((s - 1.0).abs() <= (2.0f64).powi(-(bits as i32 - 3)));
                let p: f64 = bank.prototype_phase(i).iter().sum();
                prop_assert!((p - 1.0).abs() < 1e-12);
            }
        }
    }
}
