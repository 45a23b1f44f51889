//! Scenarios built from float antenna chains: washing of clock-derived
//! tones, zone-dependent aliasing, relaxed anti-alias filtering, the
//! frequency shift, and the zero-offset control.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::correlator::{washing_magnitude, washing_suppression_db};
use crate::frontend::{ComplexSampleStream, Zone};
use crate::rational::Rational;
use crate::spectrum::CrossSpectrum;

use super::chain::{aligned, landed_components, tone_amplitude, landing_freq, washing_envelope, Component, mean_power, run_antennas, sum_streams, tone_freq, window_rho, window_starts, AntennaOutputs, Chain};
use super::config::{invalid, QuantName, ScenarioConfig, SweepPoint};
use super::{csv_table, Tolerances};
use super::{ScenarioError, ScenarioReport};

pub(crate) const WASHOUT_TOL: Tolerances = &[("sky_rho_min", 0.99), ("envelope_db", 3.0)];
pub(crate) const ALIAS_TOL: Tolerances = &[("sky_rho_min", 0.99), ("correlated_rho_min", 0.99), ("envelope_db", 3.0)];
pub(crate) const RELAXED_TOL: Tolerances =
    &[("sky_rho_min", 0.99), ("envelope_db", 3.0), ("combined_abs", 2e-3), ("off_leak_rho_min", 0.99)];
pub(crate) const SHIFT_TOL: Tolerances = &[("delay_samples_max", 1e-3), ("coherence_min", 0.99), ("tone_hz", 0.5)];
pub(crate) const SCFO_OFF_TOL: Tolerances = &[("relative", 0.01), ("on_off_ratio_max", 0.05)];

/// Cross-spectrum block for the phase-slope fit.
const SHIFT_BLOCK: usize = 1024;

fn num(x: f64) -> String {
    format!("{x}")
}

fn require_float(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    for (i, a) in cfg.antennas.iter().enumerate() {
        if a.quant != QuantName::Float {
            return Err(invalid(
                &format!("antennas[{i}].quant"),
                "this scenario separates input components, which needs a linear (float) sampler".into(),
            ));
        }
    }
    Ok(())
}

fn require_count(cfg: &ScenarioConfig, n: usize) -> Result<(), ScenarioError> {
    if cfg.antennas.len() != n {
        return Err(invalid("antennas", format!("needs exactly {n} antennas, got {}", cfg.antennas.len())));
    }
    Ok(())
}

fn require_interference(cfg: &ScenarioConfig, exactly: Option<usize>) -> Result<(), ScenarioError> {
    let first = cfg.antennas.first().map(|a| a.interference.len()).unwrap_or(0);
    for (i, a) in cfg.antennas.iter().enumerate() {
        let k = a.interference.len();
        let ok = match exactly {
            Some(e) => k == e,
            None => k >= 1 && k == first,
        };
        if !ok {
            let want = exactly.map(|e| e.to_string()).unwrap_or_else(|| format!("the same number (>= 1) as antennas[0], {first}"));
            return Err(invalid(&format!("antennas[{i}].interference"), format!("needs {want} entries, got {k}")));
        }
    }
    Ok(())
}

fn require_windows(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    if cfg.windows == 0 || cfg.samples == 0 {
        return Err(invalid("windows", "windows and samples must be positive".into()));
    }
    Ok(())
}

fn configured_offsets(cfg: &ScenarioConfig) -> Vec<Rational> {
    cfg.antennas.iter().map(|a| a.offset).collect()
}

fn sweep_points(cfg: &ScenarioConfig) -> Vec<SweepPoint> {
    if cfg.sweep.is_empty() {
        vec![SweepPoint { label: "config".into(), offsets: configured_offsets(cfg), samples: cfg.samples }]
    } else {
        cfg.sweep.clone()
    }
}

fn sky_pair<'a>(a: &'a AntennaOutputs, b: &'a AntennaOutputs) -> Result<(&'a ComplexSampleStream, &'a ComplexSampleStream), ScenarioError> {
    match (&a.sky, &b.sky) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(invalid("signal.tones", "this scenario needs a sky signal".into())),
    }
}

pub(crate) fn validate_washout(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    require_count(cfg, 2)?;
    require_float(cfg)?;
    require_interference(cfg, Some(1))?;
    require_windows(cfg)?;
    if cfg.signal.tones == 0 {
        return Err(invalid("signal.tones", "needs a sky signal".into()));
    }
    Ok(())
}

/// Sweep of offset pairs. At each point the clock-derived tone pair is
/// correlated over randomized windows; the largest `|rho|` is compared
/// with the `1 / (delta_omega T)` envelope while the sky stays coherent.
pub(crate) fn selfclock_washout(cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let chain = Chain::new(&cfg.chain, cfg.f_c)?;
    let fc = cfg.f_c.to_f64();
    let sky_min = cfg.tol("sky_rho_min", WASHOUT_TOL);
    let env_db = cfg.tol("envelope_db", WASHOUT_TOL);
    let mut rep = ScenarioReport::new("selfclock-washout");
    let mut rows = Vec::new();
    let mut wrows = Vec::new();
    for (pi, p) in sweep_points(cfg).iter().enumerate() {
        let n = p.samples;
        let span = n / 4;
        let outs = run_antennas(cfg, &chain, &p.offsets, n + span, true)?;
        let (a, b) = (&outs[0], &outs[1]);
        let (ta, tb) = (a.interference_sum().expect("validated"), b.interference_sum().expect("validated"));
        let (sa, sb) = sky_pair(a, b)?;
        let starts = window_starts(cfg.seed.wrapping_add(pi as u64), cfg.windows, span);
        let mut env = 0.0f64;
        let mut sky_worst = f64::INFINITY;
        for (w, &s) in starts.iter().enumerate() {
            let t = window_rho(&ta, &tb, s, n)?.norm();
            let sky = window_rho(sa, sb, s, n)?.norm();
            env = env.max(t);
            sky_worst = sky_worst.min(sky);
            wrows.push(vec![p.label.clone(), w.to_string(), s.to_string(), num(t), num(sky)]);
        }
        let combined = window_rho(&a.combined(), &b.combined(), starts[0], n)?.norm();

        let land_a = landing_freq(a.inputs.interference_freqs()[0], a.f_a.to_f64(), fc, a.zone);
        let land_b = landing_freq(b.inputs.interference_freqs()[0], b.f_a.to_f64(), fc, b.zone);
        let df = (land_a - land_b).abs();
        let t_s = n as f64 / fc;
        let x = TAU * df * t_s;
        let predicted_db = washing_suppression_db(df, t_s).ok();
        let measured_db = -10.0 * env.log10();
        let rel_db = 10.0 * (env * x).log10();
        // Near a sinc null the exact response sits far below the envelope;
        // there only the upper side of the band is meaningful.
        let exact_db = 10.0 * (washing_magnitude(x) * x).log10();
        let two_sided = exact_db >= -env_db;
        let pass = predicted_db.is_some() && if two_sided { rel_db.abs() <= env_db } else { rel_db <= env_db };
        rep.check(format!("{}: sky |rho| min over {} windows", p.label, starts.len()), sky_worst > sky_min, sky_worst, format!("> {sky_min}"));
        rep.check(
            format!("{}: tone |rho| envelope relative to 1/(dwT), dwT = {x:.1}", p.label),
            pass,
            rel_db,
            if two_sided { format!("within +-{env_db} dB") } else { format!("<= +{env_db} dB (sinc null at {exact_db:.1} dB)") },
        );
        if predicted_db.is_none() {
            rep.note(format!("{}: df*T = {:.3} is outside the envelope regime (needs > 1/pi)", p.label, df * t_s));
        }
        rows.push(vec![
            p.label.clone(),
            p.offsets[0].to_string(),
            p.offsets[1].to_string(),
            num(df),
            n.to_string(),
            num(t_s),
            num(x),
            predicted_db.map(num).unwrap_or_default(),
            num(measured_db),
            num(rel_db),
            num(exact_db),
            num(sky_worst),
            num(combined),
            if two_sided { "two-sided" } else { "upper" }.to_string(),
            pass.to_string(),
        ]);
    }
    rep.file(
        "washing.csv",
        csv_table(
            &[
                "point",
                "offset_a_hz",
                "offset_b_hz",
                "tone_delta_hz",
                "samples",
                "t_s",
                "dwt",
                "predicted_suppression_db",
                "measured_suppression_db",
                "envelope_rel_db",
                "exact_rel_db",
                "sky_rho_min",
                "combined_rho",
                "mode",
                "pass",
            ],
            &rows,
        )?,
    );
    rep.file("washing_windows.csv", csv_table(&["point", "window", "start", "tone_rho", "sky_rho"], &wrows)?);
    Ok(rep)
}

pub(crate) fn validate_alias(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    require_float(cfg)?;
    require_interference(cfg, None)?;
    require_windows(cfg)?;
    let pairs = zone_pairs(cfg);
    if pairs.is_empty() {
        return Err(invalid("antennas", "needs at least two antennas in the same zone".into()));
    }
    if cfg.signal.tones == 0 {
        return Err(invalid("signal.tones", "needs a sky signal".into()));
    }
    Ok(())
}

fn zone_pairs(cfg: &ScenarioConfig) -> Vec<(usize, usize)> {
    let n = cfg.antennas.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if cfg.antennas[i].zone == cfg.antennas[j].zone {
                out.push((i, j));
            }
        }
    }
    out
}

/// Probe tones common to every antenna, classified by where each chain
/// lands them: the same frequency on both antennas correlates, different
/// frequencies wash out down to the envelope of all landed pairs,
/// Hilbert images and each chain's own content at the other's landing
/// included.
pub(crate) fn zone_alias(cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let chain = Chain::new(&cfg.chain, cfg.f_c)?;
    let fc = cfg.f_c.to_f64();
    let n = cfg.samples;
    let t_s = n as f64 / fc;
    let sky_min = cfg.tol("sky_rho_min", ALIAS_TOL);
    let corr_min = cfg.tol("correlated_rho_min", ALIAS_TOL);
    let env_db = cfg.tol("envelope_db", ALIAS_TOL);
    let outs = run_antennas(cfg, &chain, &configured_offsets(cfg), n, true)?;
    let mut rep = ScenarioReport::new("zone1-vs-zone2-alias");
    let mut rows = Vec::new();
    for (i, j) in zone_pairs(cfg) {
        let (a, b) = (&outs[i], &outs[j]);
        let pair = format!("{}-{}", cfg.antennas[i].id, cfg.antennas[j].id);
        let zone = a.zone.number();
        let (sa, sb) = sky_pair(a, b)?;
        let sky = window_rho(sa, sb, 0, n)?.norm();
        rep.check(format!("zone {zone} {pair}: sky |rho|"), sky > sky_min, sky, format!("> {sky_min}"));
        let (fa_list, fb_list) = (a.inputs.interference_freqs(), b.inputs.interference_freqs());
        for k in 0..fa_list.len() {
            let amp = |o: &AntennaOutputs| o.inputs.interference[k].tones[0].amplitude;
            let ca = landed_components(fa_list[k], amp(a), a.f_a.to_f64(), fc, a.zone, &chain.hilbert);
            let cb = landed_components(fb_list[k], amp(b), b.f_a.to_f64(), fc, b.zone, &chain.hilbert);
            let (la, lb) = (ca[0].0, cb[0].0);
            let d = (la - lb).abs();
            let rho = window_rho(&a.interference[k], &b.interference[k], 0, n)?.norm();
            // Resampler phase modulation puts sidebands at multiples of each
            // antenna's offset; measure what each chain alone puts at the
            // other's landing so coincident sidebands enter the bound.
            let (xa, xb) = aligned(&a.interference[k], &b.interference[k], 0, n)?;
            let (sa, sb) = (tone_amplitude(xa, lb, fc), tone_amplitude(xb, la, fc));
            let mut ca = ca.to_vec();
            let mut cb = cb.to_vec();
            if d >= 1e-6 {
                ca.push((lb, sa));
                cb.push((la, sb));
            }
            let envelope = washing_envelope(&ca, &cb, t_s);
            let (predicted, bound, pass) = if d < 1e-6 {
                ("correlates", corr_min, rho > corr_min)
            } else {
                let bound = 10f64.powf(env_db / 10.0) * envelope;
                ("decorrelates", bound, rho <= bound)
            };
            let target = if d < 1e-6 { format!("> {corr_min}") } else { format!("<= {bound:.3e}") };
            rep.check(format!("zone {zone} {pair}: {} Hz probe {predicted}", fa_list[k]), pass, rho, target);
            rows.push(vec![
                zone.to_string(),
                pair.clone(),
                num(fa_list[k]),
                num(la),
                num(lb),
                num(d),
                num(ca[1].0),
                num(cb[1].0),
                num(ca[1].1 / ca[0].1),
                num(sa / ca[0].1),
                num(sb / cb[0].1),
                predicted.to_string(),
                num(envelope),
                num(bound),
                num(rho),
                pass.to_string(),
            ]);
        }
    }
    rep.file(
        "alias.csv",
        csv_table(
            &[
                "zone",
                "pair",
                "probe_hz",
                "landing_a_hz",
                "landing_b_hz",
                "delta_hz",
                "image_a_hz",
                "image_b_hz",
                "image_ratio",
                "a_at_landing_b",
                "b_at_landing_a",
                "predicted",
                "envelope",
                "bound",
                "measured_rho",
                "pass",
            ],
            &rows,
        )?,
    );
    Ok(rep)
}

pub(crate) fn validate_relaxed(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    require_count(cfg, 2)?;
    require_float(cfg)?;
    require_windows(cfg)?;
    if cfg.signal.leak.is_none() {
        return Err(invalid("signal.leak", "needs out-of-band sky content".into()));
    }
    if cfg.signal.tones == 0 {
        return Err(invalid("signal.tones", "needs a sky signal".into()));
    }
    Ok(())
}

fn pair_power(a: &ComplexSampleStream, b: &ComplexSampleStream, n: usize) -> Result<(f64, f64, Complex64), ScenarioError> {
    let (x, y) = aligned(a, b, 0, n)?;
    let c: Complex64 = x.iter().zip(y).map(|(p, q)| p * q.conj()).sum::<Complex64>() / n as f64;
    Ok((mean_power(x), mean_power(y), c))
}

/// Out-of-band sky passed by a relaxed anti-alias filter aliases into the
/// band. With offsets it lands at antenna-dependent frequencies and washes
/// out; with offsets off it correlates.
pub(crate) fn relaxed_antialias(cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let chain = Chain::new(&cfg.chain, cfg.f_c)?;
    let fc = cfg.f_c.to_f64();
    let n = cfg.samples;
    let t_s = n as f64 / fc;
    let sky_min = cfg.tol("sky_rho_min", RELAXED_TOL);
    let env_db = cfg.tol("envelope_db", RELAXED_TOL);
    let comb_abs = cfg.tol("combined_abs", RELAXED_TOL);
    let off_min = cfg.tol("off_leak_rho_min", RELAXED_TOL);
    let mut rep = ScenarioReport::new("relaxed-antialias");
    let mut rows = Vec::new();
    let zeros = vec![Rational::ZERO; cfg.antennas.len()];
    for (mode, offs) in [("scfo-on", configured_offsets(cfg)), ("scfo-off", zeros)] {
        let outs = run_antennas(cfg, &chain, &offs, n, true)?;
        let (a, b) = (&outs[0], &outs[1]);
        let (sa, sb) = sky_pair(a, b)?;
        let (la, lb) = (a.leak.as_ref().expect("validated"), b.leak.as_ref().expect("validated"));
        let sky = window_rho(sa, sb, 0, n)?.norm();
        let leak = window_rho(la, lb, 0, n)?.norm();
        let combined = window_rho(&a.combined(), &b.combined(), 0, n)?.norm();
        let (psa, psb, cs) = pair_power(sa, sb, n)?;
        let (pla, plb, _) = pair_power(la, lb, n)?;
        // Combined coefficient if the leak cross term vanished.
        let predicted = cs.norm() / ((psa + pla) * (psb + plb)).sqrt();
        let comps = |o: &AntennaOutputs| -> Vec<Component> {
            let l = o.inputs.leak.as_ref().expect("validated");
            l.tones.iter().flat_map(|t| landed_components(t.freq_hz, t.amplitude, o.f_a.to_f64(), fc, o.zone, &chain.hilbert)).collect()
        };
        let envelope = washing_envelope(&comps(a), &comps(b), t_s);
        let bound = (10f64.powf(env_db / 10.0) * envelope).min(1.0);
        if mode == "scfo-on" {
            rep.check("scfo-on: sky |rho|", sky > sky_min, sky, format!("> {sky_min}"));
            rep.check("scfo-on: aliased leak |rho| within washing bound", leak <= bound, leak, format!("<= {bound:.3e}"));
            rep.check(
                "scfo-on: combined |rho| matches sky-only prediction",
                (combined - predicted).abs() <= comb_abs,
                combined - predicted,
                format!("|diff| <= {comb_abs}"),
            );
        } else {
            rep.check("scfo-off: aliased leak |rho| correlates", leak > off_min, leak, format!("> {off_min}"));
        }
        rows.push(vec![
            mode.to_string(),
            num(sky),
            num(leak),
            num(envelope),
            num(bound),
            num(pla / (psa + pla)),
            num(combined),
            num(predicted),
        ]);
    }
    rep.file(
        "relaxed.csv",
        csv_table(&["mode", "sky_rho", "leak_rho", "leak_envelope", "leak_bound", "leak_power_fraction", "combined_rho", "predicted_combined_rho"], &rows)?,
    );
    Ok(rep)
}

pub(crate) fn validate_shift(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    require_count(cfg, 2)?;
    require_float(cfg)?;
    require_interference(cfg, Some(1))?;
    require_windows(cfg)?;
    for (i, a) in cfg.antennas.iter().enumerate() {
        if a.zone != Zone::Two {
            return Err(invalid(&format!("antennas[{i}].zone"), "frequency-shift runs Zone 2 chains".into()));
        }
    }
    if cfg.signal.tones == 0 || cfg.samples < 4 * SHIFT_BLOCK {
        return Err(invalid("signal.tones", format!("needs a sky signal and at least {} samples", 4 * SHIFT_BLOCK)));
    }
    Ok(())
}

struct PhaseFit {
    /// Equivalent delay of the phase slope, in samples.
    delay_samples: f64,
    /// `sum |Sab| / sqrt(sum Saa * sum Sbb)` over all bins.
    coherence: f64,
    /// `(bin, freq_hz, coherence, phase_rad)` of the fitted bins.
    bins: Vec<(usize, f64, f64, f64)>,
}

fn phase_fit(a: &[Complex64], b: &[Complex64], fc: f64) -> PhaseFit {
    let mut cs = CrossSpectrum::new(SHIFT_BLOCK);
    cs.add_complex(a, b, SHIFT_BLOCK / 4);
    let sum_ab: f64 = cs.sab.iter().map(|v| v.norm()).sum();
    let coherence = sum_ab / (cs.saa.iter().sum::<f64>() * cs.sbb.iter().sum::<f64>()).sqrt();
    let pmax = cs.saa.iter().chain(&cs.sbb).copied().fold(0.0, f64::max);
    let bins: Vec<(usize, f64, f64, f64)> = (0..SHIFT_BLOCK)
        .filter(|&k| cs.saa[k] > 1e-3 * pmax && cs.sbb[k] > 1e-3 * pmax)
        .map(|k| (k, cs.bin_freq(k) * fc, cs.sab[k].norm() / (cs.saa[k] * cs.sbb[k]).sqrt(), cs.sab[k].arg()))
        .filter(|b| b.2 > 0.9)
        .collect();
    let w: Vec<f64> = bins.iter().map(|b| cs.sab[b.0].norm()).collect();
    let sw: f64 = w.iter().sum();
    let fm = bins.iter().zip(&w).map(|(b, w)| w * b.1).sum::<f64>() / sw;
    let pm = bins.iter().zip(&w).map(|(b, w)| w * b.3).sum::<f64>() / sw;
    let sxy: f64 = bins.iter().zip(&w).map(|(b, w)| w * (b.1 - fm) * (b.3 - pm)).sum();
    let sxx: f64 = bins.iter().zip(&w).map(|(b, w)| w * (b.1 - fm) * (b.1 - fm)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    PhaseFit { delay_samples: slope * fc / TAU, coherence, bins }
}

/// Zone 2 chains shifted onto the common axis: the sky cross-spectrum has
/// no phase slope, while each antenna's clock tone lands at its own
/// frequency.
pub(crate) fn frequency_shift(cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let chain = Chain::new(&cfg.chain, cfg.f_c)?;
    let fc = cfg.f_c.to_f64();
    let n = cfg.samples;
    let delay_max = cfg.tol("delay_samples_max", SHIFT_TOL);
    let coh_min = cfg.tol("coherence_min", SHIFT_TOL);
    let tone_hz = cfg.tol("tone_hz", SHIFT_TOL);
    let outs = run_antennas(cfg, &chain, &configured_offsets(cfg), n, true)?;
    let (a, b) = (&outs[0], &outs[1]);
    let (sa, sb) = sky_pair(a, b)?;
    let (xa, xb) = aligned(sa, sb, 0, n)?;
    let fit = phase_fit(xa, xb, fc);

    // Same sky without the shift, for contrast.
    let unshifted: Vec<ComplexSampleStream> = outs
        .iter()
        .zip(&cfg.antennas)
        .map(|(o, spec)| chain.run_signal(o.inputs.sky.as_ref().expect("validated"), o.f_a, o.zone, spec.quantizer(), n, false))
        .collect::<Result<_, _>>()?;
    let (ua, ub) = aligned(&unshifted[0], &unshifted[1], 0, n)?;
    let raw = phase_fit(ua, ub, fc);

    let mut rep = ScenarioReport::new("frequency-shift");
    rep.check("sky cross-spectrum phase slope as delay (samples)", fit.delay_samples.abs() <= delay_max, fit.delay_samples, format!("|delay| <= {delay_max}"));
    rep.check("sky band-integrated coherence after shift", fit.coherence > coh_min, fit.coherence, format!("> {coh_min}"));
    rep.note(format!("without the shift the band-integrated coherence is {:.4}", raw.coherence));

    let (ta, tb) = (a.interference_sum().expect("validated"), b.interference_sum().expect("validated"));
    let (za, zb) = aligned(&ta, &tb, 0, n)?;
    let mut tone_rows = Vec::new();
    let mut measured = Vec::new();
    let mut predicted = Vec::new();
    for (o, z, spec) in [(a, za, &cfg.antennas[0]), (b, zb, &cfg.antennas[1])] {
        let f = o.inputs.interference_freqs()[0];
        let p = landing_freq(f, o.f_a.to_f64(), fc, o.zone);
        let m = tone_freq(z, fc);
        rep.check(format!("{}: clock tone landing (Hz)", spec.id), (m - p).abs() <= tone_hz, m, format!("{p} +- {tone_hz}"));
        tone_rows.push(vec![spec.id.clone(), o.f_a.to_string(), num(f), num(p), num(m)]);
        measured.push(m);
        predicted.push(p);
    }
    let sep = measured[0] - measured[1];
    let want = predicted[0] - predicted[1];
    rep.check("clock tone separation (Hz)", want.abs() > tone_hz && (sep - want).abs() <= tone_hz, sep, format!("{want} +- {tone_hz}"));

    let spec_rows: Vec<Vec<String>> = fit.bins.iter().map(|b| vec![b.0.to_string(), num(b.1), num(b.2), num(b.3)]).collect();
    rep.file("shift_spectrum.csv", csv_table(&["bin", "freq_hz", "coherence", "phase_rad"], &spec_rows)?);
    rep.file("shift_tones.csv", csv_table(&["antenna", "f_a_hz", "tone_hz", "predicted_hz", "measured_hz"], &tone_rows)?);
    rep.file(
        "shift_summary.csv",
        csv_table(
            &["case", "delay_samples", "coherence", "fitted_bins"],
            &[
                vec!["shifted".into(), num(fit.delay_samples), num(fit.coherence), fit.bins.len().to_string()],
                vec!["unshifted".into(), num(raw.delay_samples), num(raw.coherence), raw.bins.len().to_string()],
            ],
        )?,
    );
    Ok(rep)
}

pub(crate) fn validate_scfo_off(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    require_count(cfg, 2)?;
    require_float(cfg)?;
    require_interference(cfg, None)?;
    require_windows(cfg)?;
    if cfg.signal.leak.is_some() {
        return Err(invalid("signal.leak", "not used by scfo-off".into()));
    }
    Ok(())
}

/// Control experiment: offsets forced to zero, so the common clock tone
/// correlates at the level set by its power against the independent
/// noise. The configured offsets are then run for contrast.
pub(crate) fn scfo_off(cfg: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let chain = Chain::new(&cfg.chain, cfg.f_c)?;
    let n = cfg.samples;
    let rel = cfg.tol("relative", SCFO_OFF_TOL);
    let ratio_max = cfg.tol("on_off_ratio_max", SCFO_OFF_TOL);
    let mut rep = ScenarioReport::new("scfo-off");
    let mut rows = Vec::new();
    let mut off_rho = f64::NAN;
    let zeros = vec![Rational::ZERO; cfg.antennas.len()];
    for (mode, offs) in [("scfo-off", zeros), ("scfo-on", configured_offsets(cfg))] {
        let outs = run_antennas(cfg, &chain, &offs, n, true)?;
        let (a, b) = (&outs[0], &outs[1]);
        let corr_a = sum_streams(a.sky.iter().chain(&a.interference)).expect("validated");
        let corr_b = sum_streams(b.sky.iter().chain(&b.interference)).expect("validated");
        let (pca, pcb, _) = pair_power(&corr_a, &corr_b, n)?;
        let (pna, pnb) = match (&a.noise, &b.noise) {
            (Some(x), Some(y)) => {
                let (p, q, _) = pair_power(x, y, n)?;
                (p, q)
            }
            _ => (0.0, 0.0),
        };
        let predicted = (pca * pcb).sqrt() / ((pca + pna) * (pcb + pnb)).sqrt();
        let measured = window_rho(&a.combined(), &b.combined(), 0, n)?.norm();
        if mode == "scfo-off" {
            off_rho = measured;
            rep.check(
                "scfo-off: common tone |rho| relative to SNR prediction",
                (measured / predicted - 1.0).abs() <= rel,
                measured / predicted - 1.0,
                format!("|ratio - 1| <= {rel}"),
            );
        } else {
            rep.check("scfo-on: |rho| relative to scfo-off", measured / off_rho <= ratio_max, measured / off_rho, format!("<= {ratio_max}"));
        }
        rows.push(vec![
            mode.to_string(),
            offs[0].to_string(),
            offs[1].to_string(),
            num(pca),
            num(pna),
            num(pcb),
            num(pnb),
            num(predicted),
            num(measured),
        ]);
    }
    rep.file(
        "scfo_off.csv",
        csv_table(
            &[
                "mode",
                "offset_a_hz",
                "offset_b_hz",
                "correlated_power_a",
                "noise_power_a",
                "correlated_power_b",
                "noise_power_b",
                "predicted_rho",
                "measured_rho",
            ],
            &rows,
        )?,
    );
    Ok(rep)
}
