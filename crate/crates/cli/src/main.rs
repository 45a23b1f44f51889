use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use scfo_core::frontend::{gaussian, quantize, QuantizerSpec, SampleStream, Zone};
use scfo_core::hwestimate::{estimate, DeviceTable, HwConfig};
use scfo_core::polyphase::verify_demux;
use scfo_core::rational::{Rational, RationalFreq};
use scfo_core::resampler::{
    bank_metrics, design_bank, response, Arithmetic, BankSpec, CoefficientBank, ResampleOptions, Window, DEFAULT_PASSBAND,
};
use scfo_core::scenarios::{self, golden, parse_config};
use scfo_core::timing::{inter_tick_counts, tick_trace, write_tick_csv, PpsModel};

const OUT_ENV: &str = "SCFO_OUT_DIR";

/// Sample clock frequency offset simulator.
#[derive(Parser)]
#[command(name = "scfo", version, about)]
struct Cli {
    /// Worker threads for parallel antenna processing [default: available
    /// parallelism].
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Design a polyphase coefficient bank and write it with its response.
    DesignFilter(DesignArgs),
    /// Passband magnitude and delay error of a bank file.
    AnalyzeResponse(AnalyzeArgs),
    /// Run a named scenario and write its CSVs and summary.
    RunScenario(RunArgs),
    /// Check that the demultiplexed resampler matches the direct one bit for bit.
    VerifyDemux(DemuxArgs),
    /// FPGA resource estimate for a demultiplexed resampler.
    EstimateResources(ResourceArgs),
    /// Sample indices of 1PPS ticks for a sample clock.
    TimingSim(TimingArgs),
    /// List the built-in scenarios.
    ListScenarios,
}

#[derive(Args)]
struct BankArgs {
    #[arg(long, default_value_t = 56)]
    taps: usize,
    #[arg(long, default_value_t = 1024)]
    phases: usize,
    /// Signed coefficient width; 0 keeps float taps.
    #[arg(long, default_value_t = 19)]
    bits: u32,
    /// Passband edges as fractions of the input Nyquist frequency.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [DEFAULT_PASSBAND.0, DEFAULT_PASSBAND.1])]
    passband: Vec<f64>,
    /// Fixed Kaiser beta; by default beta minimizes the passband delay error.
    #[arg(long)]
    beta: Option<f64>,
}

impl BankArgs {
    fn spec(&self) -> BankSpec {
        BankSpec {
            taps: self.taps,
            phases: self.phases,
            coeff_bits: (self.bits > 0).then_some(self.bits),
            passband: (self.passband[0], self.passband[1]),
            window: self.beta.map(|beta| Window::Kaiser { beta }).unwrap_or(Window::KaiserAuto),
            max_ripple_db: None,
        }
    }
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    bank: BankArgs,
    /// Bank file; the response goes next to it as `<stem>_response.csv`
    /// [default: $SCFO_OUT_DIR/bank.txt].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Bank text file written by design-filter.
    #[arg(long)]
    bank: PathBuf,
    /// Frequency points per phase over [0, 1] of Nyquist.
    #[arg(long, default_value_t = 65)]
    n_freq: usize,
    /// Band for the ripple and delay metrics [default: the bank's passband].
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    band: Option<Vec<f64>>,
    /// Response CSV [default: $SCFO_OUT_DIR/response.csv].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name; see list-scenarios.
    name: String,
    /// TOML config; defaults to the built-in one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of golden CSVs to compare against.
    #[arg(long)]
    golden: Option<PathBuf>,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    print_config: bool,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: $SCFO_OUT_DIR/<name>].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemuxArgs {
    #[command(flatten)]
    bank: BankArgs,
    /// Demultiplex factor.
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Input rate over output rate, e.g. 1001/1000.
    #[arg(long, default_value = "1001/1000")]
    ratio: Rational,
    /// Input samples.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Use the fixed-point datapath instead of f64.
    #[arg(long)]
    fixed: bool,
}

#[derive(Args)]
struct ResourceArgs {
    #[arg(long, default_value_t = 56)]
    taps: u64,
    /// Demultiplex factor.
    #[arg(long, default_value_t = 8)]
    k: u64,
    #[arg(long, default_value_t = 4)]
    streams: u64,
    /// Real output only (no second FIR per stream).
    #[arg(long)]
    real: bool,
    /// Give each FIR its own coefficient LUT.
    #[arg(long)]
    no_share: bool,
    #[arg(long, default_value_t = 8)]
    sample_bits: u64,
    #[arg(long, default_value_t = 1024)]
    lut_entries: u64,
    /// Adders per FIR [default: taps].
    #[arg(long)]
    adders_per_fir: Option<u64>,
    /// Device table TOML [default: built-in GX1650].
    #[arg(long)]
    device: Option<PathBuf>,
}

#[derive(Args)]
struct TimingArgs {
    /// Sample clock in Hz; decimals and fractions are exact.
    #[arg(long)]
    f_a: RationalFreq,
    #[arg(long, default_value_t = 11)]
    ticks: usize,
    /// RMS 1PPS jitter in ns.
    #[arg(long, default_value_t = 0.0)]
    jitter_ns: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Tick CSV [default: $SCFO_OUT_DIR/ticks.csv].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn out_dir() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("scfo-out"))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    create_parent(path)?;
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn response_csv(bank: &CoefficientBank, n_freq: usize) -> Result<String> {
    let p = bank.phases();
    let phases: BTreeSet<usize> = [0, p / 4, p / 2, 3 * p / 4, p - 1].into_iter().collect();
    let mut s = String::from("phase,freq_nyquist,mag_db,delay_err_samples\n");
    for ph in phases {
        let r = response(bank, ph, n_freq)?;
        for i in 0..r.freq.len() {
            s.push_str(&format!("{ph},{},{},{}\n", r.freq[i], r.mag_db[i], r.delay_err[i]));
        }
    }
    Ok(s)
}

fn print_metrics(bank: &CoefficientBank, band: (f64, f64)) {
    let m = bank_metrics(bank, band, 64, 1);
    println!(
        "taps {} phases {} bits {} beta {}: ripple {:.3e} dB, delay error pk-pk {:.3e} samples over [{}, {}]",
        bank.taps(),
        bank.phases(),
        bank.coeff_bits().map(|b| b.to_string()).unwrap_or_else(|| "float".into()),
        bank.beta().map(|b| format!("{b:.4}")).unwrap_or_else(|| "-".into()),
        m.ripple_db,
        m.delay_pp,
        band.0,
        band.1
    );
}

fn design_filter(a: &DesignArgs) -> Result<bool> {
    let bank = design_bank(&a.bank.spec())?;
    let out = a.out.clone().unwrap_or_else(|| out_dir().join("bank.txt"));
    write_file(&out, &bank.to_text())?;
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("bank");
    let resp = out.with_file_name(format!("{stem}_response.csv"));
    write_file(&resp, &response_csv(&bank, 65)?)?;
    print_metrics(&bank, bank.passband());
    println!("wrote {} and {}", out.display(), resp.display());
    Ok(true)
}

fn analyze_response(a: &AnalyzeArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&a.bank).with_context(|| format!("reading {}", a.bank.display()))?;
    let bank = CoefficientBank::from_text(&text)?;
    let band = a.band.as_ref().map(|b| (b[0], b[1])).unwrap_or_else(|| bank.passband());
    let out = a.out.clone().unwrap_or_else(|| out_dir().join("response.csv"));
    write_file(&out, &response_csv(&bank, a.n_freq)?)?;
    print_metrics(&bank, band);
    println!("wrote {}", out.display());
    Ok(true)
}

fn run_scenario(a: &RunArgs) -> Result<bool> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text)?
        }
        None => scenarios::default_config(&a.name)?,
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.print_config {
        scenarios::validate(&a.name, &cfg)?;
        print!("{}", cfg.to_toml());
        return Ok(true);
    }
    let mut rep = scenarios::run_scenario(&a.name, &cfg)?;
    if let Some(g) = &a.golden {
        if golden::check_against(&mut rep, g, &cfg.golden)? == 0 {
            bail!("no golden CSVs for {} in {}", a.name, g.display());
        }
    }
    let dir = a.out.clone().unwrap_or_else(|| out_dir().join(&a.name));
    scenarios::write_report(&rep, &dir)?;
    print!("{}", rep.summary());
    println!("wrote {}", dir.display());
    Ok(rep.passed())
}

fn verify(a: &DemuxArgs) -> Result<bool> {
    let bank = design_bank(&a.bank.spec())?;
    let f_c = RationalFreq::hz(1_000_000);
    let f_a = f_c.scale(&a.ratio)?;
    let raw = SampleStream::from_data(f_a, Rational::ZERO, gaussian(a.samples, a.seed), Zone::One);
    let input = quantize(&raw, QuantizerSpec::q4(1.0))?;
    let opts = if a.fixed {
        ResampleOptions { arithmetic: Arithmetic::Fixed { sample_frac_bits: 12 }, ..ResampleOptions::default() }
    } else {
        ResampleOptions::float()
    };
    let r = verify_demux(&input, f_c, &bank, a.k, &opts)?;
    let v = if r.identical { "PASS" } else { "FAIL" };
    let first = r.first_divergence.map(|i| i.to_string()).unwrap_or_else(|| "none".into());
    println!(
        "{v} k={} taps={} ratio={} {}: {} outputs, {} skips, {} repeats, first divergence {first}",
        a.k,
        bank.taps(),
        a.ratio,
        if a.fixed { "fixed" } else { "float" },
        r.outputs,
        r.skips,
        r.repeats
    );
    Ok(r.identical)
}

fn resources(a: &ResourceArgs) -> Result<bool> {
    let hw = HwConfig {
        taps: a.taps,
        demux: a.k,
        streams: a.streams,
        complex_output: !a.real,
        share_coeff_luts: !a.no_share,
        sample_bits: a.sample_bits,
        coeff_lut_entries: a.lut_entries,
        adders_per_fir: a.adders_per_fir,
        ..HwConfig::default()
    };
    hw.validate()?;
    let device = match &a.device {
        Some(p) => DeviceTable::load(p)?,
        None => DeviceTable::default(),
    };
    let e = estimate(&hw, &device);
    print!("{}", e.report(&device));
    Ok(true)
}

fn timing_sim(a: &TimingArgs) -> Result<bool> {
    let pps = PpsModel { jitter_ns: a.jitter_ns, seed: a.seed };
    let trace = tick_trace(a.f_a, &pps, a.ticks)?;
    let idx: Vec<i128> = trace.iter().map(|r| r.sample_index).collect();
    let counts: BTreeSet<i128> = inter_tick_counts(&idx).into_iter().collect();
    let out = a.out.clone().unwrap_or_else(|| out_dir().join("ticks.csv"));
    create_parent(&out)?;
    let f = std::fs::File::create(&out).with_context(|| format!("writing {}", out.display()))?;
    write_tick_csv(f, &trace)?;
    let span = idx[idx.len() - 1] - idx[0];
    println!("f_a {} Hz, {} ticks: inter-tick counts {:?}, total {span}", a.f_a, a.ticks, counts);
    println!("wrote {}", out.display());
    Ok(true)
}

fn list() -> Result<bool> {
    for s in scenarios::SCENARIOS {
        println!("{:<22} {}", s.name, s.summary);
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let res = match &cli.cmd {
        Cmd::DesignFilter(a) => design_filter(a),
        Cmd::AnalyzeResponse(a) => analyze_response(a),
        Cmd::RunScenario(a) => run_scenario(a),
        Cmd::VerifyDemux(a) => verify(a),
        Cmd::EstimateResources(a) => resources(a),
        Cmd::TimingSim(a) => timing_sim(a),
        Cmd::ListScenarios => list(),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
