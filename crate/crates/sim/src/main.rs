use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use blindmimo::experiments::{run_bound_compare, run_hardening, run_mse_vs_snr, run_throughput_cdf, run_validate};
use blindmimo::output::write_run;
use blindmimo::{ExperimentConfig, RecordSink, Runner};

/// Massive MIMO downlink simulator with blind effective-gain estimation.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Channel-hardening ratios and blind MSE over antennas and keyholes.
    Hardening(Common),
    /// Normalized MSE of the gain estimators versus downlink SNR.
    Mse(Common),
    /// Per-user net-throughput CDFs of every estimator.
    Throughput(Common),
    /// Side-information bound versus the use-and-forget bound.
    Bounds(Common),
    /// Oracle checks against closed forms. Exits non-zero on failure.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the CSV and manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Overrides the main trial budget of the subcommand.
    #[arg(long)]
    trials: Option<usize>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (name, common) = match &cli.command {
        Command::Hardening(c) => ("hardening", c),
        Command::Mse(c) => ("mse", c),
        Command::Throughput(c) => ("throughput", c),
        Command::Bounds(c) => ("bounds", c),
        Command::Validate(c) => ("validate", c),
    };
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(n) = common.trials {
        let slot = match cli.command {
            Command::Hardening(_) | Command::Validate(_) => &mut cfg.trials.hardening,
            Command::Mse(_) => &mut cfg.trials.small_scale,
            Command::Throughput(_) | Command::Bounds(_) => &mut cfg.trials.large_scale,
        };
        *slot = n;
    }
    cfg.validate()?;
    let workers = if common.workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        common.workers
    };
    let runner = Runner::new(workers)?;
    let sink: RecordSink = match cli.command {
        Command::Hardening(_) => run_hardening(&cfg, &runner)?,
        Command::Mse(_) => run_mse_vs_snr(&cfg, &runner)?,
        Command::Throughput(_) => run_throughput_cdf(&cfg, &runner)?,
        Command::Bounds(_) => run_bound_compare(&cfg, &runner)?,
        Command::Validate(_) => run_validate(&cfg, &runner)?,
    };
    for w in &sink.warnings {
        eprintln!("warning: {w}");
    }
    let (csv, manifest) = write_run(&common.out, name, &cfg, &sink, workers)?;
    println!("{} records -> {}", sink.records.len(), csv.display());
    println!("manifest -> {}", manifest.display());
    let failed = sink.records.iter().any(|r| r.metric == "pass" && r.value == 0.0);
    Ok(!failed)
}
