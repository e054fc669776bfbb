use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ambient_detect::detectors::thresholds;
use ambient_detect::harness::checks::{self, CheckResult};
use ambient_detect::harness::config::parse_detectors;
use ambient_detect::harness::{estimate_ber_with, prepare_bank, write_csv, SweepConfig};
use ambient_detect::{Error, Result};

#[derive(Parser)]
#[command(name = "ambient-detect", version, about = "Non-coherent ambient backscatter detectors and BER sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER sweep and write the CSV.
    Sweep(Common),
    /// Build the per-point lookup tables of a sweep and save them.
    Table(Common),
    /// Check that the energy densities integrate to one and fit simulation.
    Pdfcheck(Common),
    /// Print the decision thresholds at every sweep point.
    Thresholds(Common),
    /// Run the whole invariant suite.
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    /// Sweep configuration file (key = value lines).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output path: the CSV for `sweep`, the table directory for `table`.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, value_name = "K")]
    workers: Option<usize>,
    /// Trials per point; sample count for `pdfcheck` and `selftest`.
    #[arg(long, value_name = "N")]
    trials: Option<u64>,
    /// Comma-separated detectors, e.g. `direct,energy`.
    #[arg(long, value_name = "LIST", value_parser = parse_detector_list)]
    detectors: Option<String>,
    /// Extra `key=value` settings, overriding the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn parse_detector_list(raw: &str) -> std::result::Result<String, String> {
    parse_detectors(raw).map(|_| raw.to_string())
}

impl Common {
    fn load(&self) -> Result<SweepConfig> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path).map_err(|e| with_path(e, path))?,
            None => String::new(),
        };
        let mut overrides = self.set.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("master_seed = {seed}"));
        }
        if let Some(w) = self.workers {
            overrides.push(format!("workers = {w}"));
        }
        if let Some(t) = self.trials {
            overrides.push(format!("trials = {t}"));
        }
        if let Some(d) = &self.detectors {
            overrides.push(format!("detectors = {d}"));
        }
        SweepConfig::parse_with_overrides(&text, &overrides)
    }
}

fn with_path(e: io::Error, path: &std::path::Path) -> io::Error {
    io::Error::new(e.kind(), format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sweep(c) => sweep(&c),
        Command::Table(c) => table(&c),
        Command::Pdfcheck(c) => pdfcheck(&c),
        Command::Thresholds(c) => print_thresholds(&c),
        Command::Selftest(c) => selftest(&c),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn sweep(c: &Common) -> Result<bool> {
    let cfg = c.load()?;
    let out_path = c.out.clone().or_else(|| cfg.output_path.clone());
    // Open the output before simulating so a bad path fails fast.
    let sink: Box<dyn Write> = match &out_path {
        Some(p) => Box::new(File::create(p).map_err(|e| with_path(e, p))?),
        None => Box::new(io::stdout()),
    };
    let mut flagged = false;
    let estimates = estimate_ber_with(&cfg, |point| {
        for e in point {
            eprintln!(
                "{}={} {:<10} ber={:.4e} se={:.2e} erased={}",
                e.sweep_variable, e.sweep_value, e.detector.name(), e.ber, e.std_err, e.erased
            );
            if e.flagged() {
                flagged = true;
                eprintln!(
                    "warning: {} erased {:.2e} of its trials at {}={}",
                    e.detector, e.erased_fraction(), e.sweep_variable, e.sweep_value
                );
            }
        }
    })?;
    let mut sink = BufWriter::new(sink);
    write_csv(&mut sink, &estimates)?;
    sink.flush()?;
    if flagged {
        eprintln!("warning: run flagged for excess erasures");
    }
    Ok(true)
}

fn table(c: &Common) -> Result<bool> {
    let mut cfg = c.load()?;
    let dir = c
        .out
        .clone()
        .or_else(|| cfg.lut.cache_dir.clone())
        .ok_or_else(|| Error::InvalidArgument("table needs --out DIR or lut_cache".into()))?;
    cfg.lut.enabled = true;
    cfg.lut.cache_dir = Some(dir.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for &v in &cfg.sweep_values {
        let params = cfg.params_at(v)?;
        pool.install(|| prepare_bank(params, &cfg.detectors, cfg.quad_tol, &cfg.lut))?;
        eprintln!("{}={v}: tables ready in {}", cfg.sweep_variable, dir.display());
    }
    Ok(true)
}

fn report(results: &[CheckResult]) -> bool {
    for r in results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {} failed", results.len(), failed);
    failed == 0
}

fn pdfcheck(c: &Common) -> Result<bool> {
    let cfg = c.load()?;
    let samples = c.trials.unwrap_or(100_000) as usize;
    let mut ok = true;
    for &v in &cfg.sweep_values {
        let params = cfg.params_at(v)?;
        println!("# {}={v}", cfg.sweep_variable);
        ok &= report(&checks::pdfcheck(&params, samples, cfg.master_seed));
    }
    Ok(ok)
}

fn print_thresholds(c: &Common) -> Result<bool> {
    let cfg = c.load()?;
    for &v in &cfg.sweep_values {
        let t = thresholds(&cfg.params_at(v)?)?;
        println!(
            "{}={v} theta1={} theta2={} theta3={}",
            cfg.sweep_variable, t.theta1, t.theta2, t.theta3
        );
    }
    Ok(true)
}

fn selftest(c: &Common) -> Result<bool> {
    let cfg = c.load()?;
    let trials = c.trials.unwrap_or(20_000);
    Ok(report(&checks::selftest(trials, cfg.master_seed)))
}
