//! Built-in scenario configurations, scaled to run on a desktop.

use crate::frontend::Zone;
use crate::hwestimate::HwConfig;
use crate::rational::{Rational, RationalFreq};

use super::config::{
    AntennaChainSpec, Band, ChainOptions, GoldenOptions, InterferenceOptions, LeakOptions, QuantName, ResourceOptions, ScenarioConfig,
    SensitivityOptions, SignalOptions, SkipRepeatOptions, SweepPoint, TimingOptions,
};

fn r(s: &str) -> Rational {
    s.parse().expect("built-in rational")
}

fn hz(s: &str) -> RationalFreq {
    s.parse().expect("built-in frequency")
}

const MHZ: &str = "1000000";

fn base() -> ScenarioConfig {
    ScenarioConfig {
        scenario: None,
        seed: 20240917,
        f_c: hz(MHZ),
        samples: 1_000_000,
        windows: 8,
        chain: ChainOptions::default(),
        signal: SignalOptions {
            tones: 0,
            band_hz: [100e3, 400e3],
            amplitude_span_db: 0.0,
            noise_rms: 0.0,
            filter_db: Vec::new(),
            leak: None,
        },
        antennas: Vec::new(),
        sweep: Vec::new(),
        sensitivity: None,
        skip_repeat: None,
        timing: None,
        resources: None,
        golden: GoldenOptions::default(),
        tolerances: Default::default(),
    }
}

fn antenna(id: &str, band: Band, zone: Zone, offset: i128) -> AntennaChainSpec {
    AntennaChainSpec {
        id: id.into(),
        band,
        f_nominal: hz(MHZ),
        offset: Rational::integer(offset),
        zone,
        quant: QuantName::Float,
        loading: 1.0,
        extended: false,
        band_hz: None,
        interference: Vec::new(),
    }
}

fn self_clock(multiple: &str, amplitude: f64) -> InterferenceOptions {
    InterferenceOptions::SelfClock { multiple: r(multiple), amplitude, phase_rad: 0.0 }
}

fn sky(tones: usize, band: [f64; 2]) -> SignalOptions {
    SignalOptions { tones, band_hz: band, ..base().signal }
}

fn point(label: &str, a: i128, b: i128, samples: usize) -> SweepPoint {
    SweepPoint { label: label.into(), offsets: vec![Rational::integer(a), Rational::integer(b)], samples }
}

fn washout() -> ScenarioConfig {
    let mut c = base();
    c.windows = 16;
    c.signal = sky(64, [100e3, 400e3]);
    // The tone sits at f_a / 4, so each pair of offsets separates it by
    // (oa - ob) / 4; the window lengths put delta_omega T at the target.
    // At +-3200 Hz the 1024-phase quantization pattern repeats every
    // 1600 Hz, exactly the tone separation, so a spur of one antenna lands
    // on the other's tone; +-3400 Hz avoids that coincidence.
    c.antennas = ["a", "b"]
        .iter()
        .zip([2000, -2000])
        .map(|(id, o)| AntennaChainSpec { interference: vec![self_clock("1/4", 0.3)], ..antenna(id, Band::B1, Zone::One, o) })
        .collect();
    c.sweep = vec![
        point("dwT=1e2", 100, 0, 636_620),
        point("dwT=1e3", 300, -300, 1_061_033),
        point("dwT=2pi*1e3", 2000, -2000, 1_000_000),
        point("dwT=1e4", 3400, -3400, 936_206),
    ];
    c
}

fn alias() -> ScenarioConfig {
    let mut c = base();
    c.windows = 4;
    c.signal = sky(64, [100e3, 400e3]);
    let probes: Vec<InterferenceOptions> =
        [70e3, 930e3, 1.07e6].iter().map(|&f| InterferenceOptions::FixedRf { freq_hz: f, amplitude: 0.3, phase_rad: 0.0 }).collect();
    let zone2 = Some([600e3, 900e3]);
    c.antennas = vec![
        AntennaChainSpec { interference: probes.clone(), ..antenna("z1a", Band::B1, Zone::One, 2000) },
        AntennaChainSpec { interference: probes.clone(), ..antenna("z1b", Band::B1, Zone::One, -2000) },
        AntennaChainSpec { interference: probes.clone(), band_hz: zone2, ..antenna("z2a", Band::B1, Zone::Two, 2000) },
        AntennaChainSpec { interference: probes, band_hz: zone2, ..antenna("z2b", Band::B1, Zone::Two, -2000) },
    ];
    c
}

fn relaxed() -> ScenarioConfig {
    let mut c = base();
    c.windows = 4;
    c.signal = SignalOptions {
        filter_db: vec![[500e3, -20.0], [600e3, 0.0], [900e3, 0.0], [1080e3, -20.0], [1400e3, -30.0]],
        leak: Some(LeakOptions { band_hz: [1100e3, 1400e3], tones: 64, rms: 1.0 }),
        ..sky(64, [600e3, 900e3])
    };
    c.antennas = vec![antenna("a", Band::B1, Zone::Two, 2000), antenna("b", Band::B1, Zone::Two, -2000)];
    c
}

fn shift() -> ScenarioConfig {
    let mut c = base();
    c.windows = 4;
    c.signal = sky(64, [600e3, 900e3]);
    c.antennas = [("a", 2000), ("b", -2000)]
        .iter()
        .map(|&(id, o)| AntennaChainSpec { interference: vec![self_clock("3/4", 0.3)], ..antenna(id, Band::B5stream, Zone::Two, o) })
        .collect();
    c
}

fn scfo_off() -> ScenarioConfig {
    let mut c = base();
    c.windows = 4;
    c.signal = SignalOptions { noise_rms: 1.0, ..sky(0, [100e3, 400e3]) };
    c.antennas = [("a", 2000), ("b", -2000)]
        .iter()
        .map(|&(id, o)| AntennaChainSpec { interference: vec![self_clock("1/4", 1.0)], ..antenna(id, Band::B1, Zone::One, o) })
        .collect();
    c
}

fn requant() -> ScenarioConfig {
    let mut c = base();
    c.sensitivity = Some(SensitivityOptions {
        samples: 100_000_000,
        segment_len: 1 << 20,
        rho: 0.5,
        block: 1024,
        coeff_bits: 18,
        f_a: hz("1001000"),
    });
    c
}

fn skip() -> ScenarioConfig {
    let mut c = base();
    c.skip_repeat = Some(SkipRepeatOptions { ratio: r("1001/1000"), outputs: 1_000_000, effective_threshold: 0.1 });
    c
}

fn timing() -> ScenarioConfig {
    let mut c = base();
    c.timing = Some(TimingOptions {
        f_a: hz("3000000000.1"),
        kapb_hz: hz("100000000"),
        ticks: 1001,
        jitter_clock_hz: hz("4000000000"),
        jitter_ns: 5.0,
        sync_clock_hz: hz("1000"),
        sync_phases: 8,
        sync_width_cycles: Rational::ONE,
        sync_steps: 997,
        fifo_offset: 7,
        fifo_spread: 3,
        fifo_window: 256,
        commutator_f_c: hz("1000000.3"),
        demux: 8,
        commutator_ticks: 20,
    });
    c
}

fn resources() -> ScenarioConfig {
    let hw = HwConfig::default();
    let mut c = base();
    c.resources = Some(ResourceOptions {
        taps: hw.taps,
        demux: hw.demux,
        streams: hw.streams,
        complex_output: hw.complex_output,
        share_coeff_luts: hw.share_coeff_luts,
        sample_bits: hw.sample_bits,
        coeff_lut_entries: hw.coeff_lut_entries,
        sample_rate_hz: hw.sample_rate_hz,
        device: None,
    });
    c
}

pub(crate) fn config(name: &str) -> ScenarioConfig {
    match name {
        "selfclock-washout" => washout(),
        "zone1-vs-zone2-alias" => alias(),
        "relaxed-antialias" => relaxed(),
        "frequency-shift" => shift(),
        "scfo-off" => scfo_off(),
        "requant-loss" => requant(),
        "skip-repeat" => skip(),
        "timing" => timing(),
        "resources" => resources(),
        _ => base(),
    }
}
