//! Array-wide offset assignment with a minimum pairwise separation.

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

use super::ScenarioError;

/// Largest grid, in resolution units, for which a prime ladder is sieved.
const MAX_PRIME_GRID: i128 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderKind {
    /// Evenly spaced offsets centered on zero.
    #[default]
    Uniform,
    /// Offsets at `+-p * resolution` for primes `p`, mirrored about zero.
    Prime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetPlan {
    pub n_antennas: usize,
    pub min_pairwise_hz: f64,
    pub kind: LadderKind,
    /// Ascending.
    pub assignments: Vec<Rational>,
}

impl OffsetPlan {
    /// Smallest difference between any two assignments.
    pub fn min_separation(&self) -> Option<Rational> {
        self.assignments.windows(2).filter_map(|w| w[1].checked_sub(&w[0]).ok()).min()
    }

    pub fn max_abs(&self) -> Rational {
        self.assignments.iter().map(|o| o.abs()).max().unwrap_or(Rational::ZERO)
    }

    pub fn span(&self) -> Rational {
        match (self.assignments.first(), self.assignments.last()) {
            (Some(a), Some(b)) => b.checked_sub(a).unwrap_or(Rational::ZERO),
            _ => Rational::ZERO,
        }
    }
}

fn exact(x: f64, what: &str) -> Result<Rational, ScenarioError> {
    if !(x.is_finite() && x > 0.0) {
        return Err(ScenarioError::Infeasible(format!("{what} must be positive, got {x}")));
    }
    // Shortest round-trip decimal, parsed exactly.
    Ok(format!("{x}").parse::<Rational>()?)
}

/// Uniform ladder; see [`plan_offsets_with`].
pub fn plan_offsets(n: usize, min_pairwise: f64, max_abs: f64, resolution: f64) -> Result<OffsetPlan, ScenarioError> {
    plan_offsets_with(n, min_pairwise, max_abs, resolution, LadderKind::Uniform)
}

/// Assign `n` offsets on the `resolution` grid within `+-max_abs`, every
/// pair at least `min_pairwise` apart. Feasible only when
/// `n * min_pairwise <= 2 * max_abs + resolution`, each antenna taking a
/// slot of width `min_pairwise` out of the total range. A single antenna
/// has no pairs and always gets offset zero.
pub fn plan_offsets_with(
    n: usize,
    min_pairwise: f64,
    max_abs: f64,
    resolution: f64,
    kind: LadderKind,
) -> Result<OffsetPlan, ScenarioError> {
    let res = exact(resolution, "resolution")?;
    let min = exact(min_pairwise, "min_pairwise")?;
    let max = exact(max_abs, "max_abs")?;
    if n == 0 {
        return Err(ScenarioError::Infeasible("no antennas to plan".into()));
    }
    let need = min.mul_int(n as i128)?;
    let have = max.mul_int(2)?.checked_add(&res)?;
    if n > 1 && need > have {
        return Err(ScenarioError::Infeasible(format!(
            "n * min_pairwise = {need} Hz exceeds 2 * max_abs + resolution = {have} Hz"
        )));
    }
    // Work in grid units.
    let m = min.checked_div(&res)?.ceil();
    let lim = max.checked_div(&res)?.floor();
    let units: Vec<i128> = match kind {
        LadderKind::Uniform => {
            let half = (n as i128 - 1) * m / 2;
            (0..n as i128).map(|i| i * m - half).collect()
        }
        LadderKind::Prime => prime_ladder(n, m, lim)?,
    };
    let reach = units.iter().map(|u| u.abs()).max().unwrap_or(0);
    if reach > lim {
        return Err(ScenarioError::Infeasible(format!(
            "ladder needs +-{} Hz, beyond max_abs = {max} Hz",
            res.mul_int(reach)?
        )));
    }
    let assignments = units.iter().map(|&u| res.mul_int(u)).collect::<Result<Vec<_>, _>>()?;
    Ok(OffsetPlan { n_antennas: n, min_pairwise_hz: min_pairwise, kind, assignments })
}

fn prime_ladder(n: usize, m: i128, lim: i128) -> Result<Vec<i128>, ScenarioError> {
    if lim > MAX_PRIME_GRID {
        return Err(ScenarioError::Infeasible(format!("prime ladder grid of {lim} units is too fine to sieve")));
    }
    let sieve = primes_upto(lim as usize);
    let positive = n.div_ceil(2);
    let mut picked = Vec::with_capacity(positive);
    let mut floor = (m + 1) / 2;
    let mut it = sieve.iter();
    while picked.len() < positive {
        match it.find(|&&p| p as i128 >= floor) {
            Some(&p) => {
                picked.push(p as i128);
                floor = p as i128 + m;
            }
            None => {
                return Err(ScenarioError::Infeasible(format!(
                    "only {} primes spaced {m} units fit below {lim} units",
                    picked.len()
                )))
            }
        }
    }
    let mut units: Vec<i128> = picked[..n / 2].iter().map(|p| -p).collect();
    units.extend(&picked);
    units.sort_unstable();
    Ok(units)
}

fn primes_upto(n: usize) -> Vec<usize> {
    if n < 2 {
        return Vec::new();
    }
    let mut is = vec![true; n + 1];
    is[0] = false;
    is[1] = false;
    let mut i = 2;
    while i * i <= n {
        if is[i] {
            for j in (i * i..=n).step_by(i) {
                is[j] = false;
            }
        }
        i += 1;
    }
    is.iter().enumerate().filter(|(_, &p)| p).map(|(i, _)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn array_scale_ladders() {
        let p = plan_offsets(2000, 10e3, 10e6, 100.0).unwrap();
        assert_eq!(p.assignments.len(), 2000);
        assert_eq!(p.min_separation(), Some(Rational::integer(10_000)));
        assert_eq!(p.max_abs(), Rational::integer(9_995_000));
        assert_eq!(p.span(), Rational::integer(19_990_000));

        let p = plan_offsets(200, 10e3, 1e6, 100.0).unwrap();
        assert_eq!(p.max_abs(), Rational::integer(995_000));
        assert_eq!(p.assignments[0], -p.assignments[199]);
    }

    #[test]
    fn pigeonhole() {
        let e = plan_offsets(3, 10e3, 10e3, 100.0).unwrap_err();
        assert!(e.to_string().contains("min_pairwise"), "{e}");
        assert!(plan_offsets(0, 10e3, 10e3, 100.0).is_err());
        assert_eq!(plan_offsets(1, 10e3, 1.0, 1.0).unwrap().assignments, vec![Rational::ZERO]);
    }

    #[test]
    fn odd_step_stays_on_grid() {
        // 250 Hz on a 100 Hz grid rounds up to 300 Hz.
        let p = plan_offsets(4, 250.0, 1000.0, 100.0).unwrap();
        let hz: Vec<i128> = p.assignments.iter().map(|r| r.numer()).collect();
        assert_eq!(hz, vec![-400, -100, 200, 500]);
    }

    #[test]
    fn prime_ladder() {
        let p = plan_offsets_with(5, 1000.0, 1e6, 100.0, LadderKind::Prime).unwrap();
        let u: Vec<i128> = p.assignments.iter().map(|r| r.numer() / 100).collect();
        assert_eq!(u, vec![-17, -5, 5, 17, 29]);
        assert!(plan_offsets_with(3, 10e3, 10e3, 1.0, LadderKind::Prime).is_err());
    }

    proptest! {
        #[test]
        fn pairwise_bound_holds(n in 1usize..300, min_units in 1u32..200, res in prop::sample::select(vec![1.0, 100.0, 1000.0]), slack in 0u32..50, prime in any::<bool>()) {
            let min = min_units as f64 * res * 0.97;
            let max = (n as f64 * min_units as f64 * res) / 2.0 + slack as f64 * res;
            let kind = if prime { LadderKind::Prime } else { LadderKind::Uniform };
            if let Ok(p) = plan_offsets_with(n, min, max, res, kind) {
                prop_assert_eq!(p.assignments.len(), n);
                if let Some(s) = p.min_separation() {
                    prop_assert!(s.to_f64() >= min);
                }
                prop_assert!(p.max_abs().to_f64() <= max);
                let r = format!("{res}").parse::<Rational>().unwrap();
                prop_assert!(p.assignments.iter().all(|a| a.checked_div(&r).unwrap().denom() == 1));
            }
        }

        #[test]
        fn uniform_feasible_when_slots_fit(n in 1usize..500, min_units in 1i64..100) {
            // Even steps always center symmetrically within the bound.
            let min = 200.0 * min_units as f64;
            let max = n as f64 * min / 2.0;
            let p = plan_offsets(n, min, max, 100.0).unwrap();
            prop_assert!(p.max_abs().to_f64() <= max);
        }
    }
}
