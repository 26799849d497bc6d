//! Command-line orchestrator: experiment presets, reproduction commands and
//! the consistency selfcheck, emitting machine-readable CSV/JSON tables.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CmdError;
use config::{parse_gain, ExperimentConfig, OutputFormat};

#[derive(Parser)]
#[command(
    name = "cvteleport",
    version,
    about = "Deterministic continuous-variable teleportation model: coefficients, fidelities, Monte Carlo runs",
    after_help = "Configuration is a flat `key = value` file (see README); flags override it."
)]
struct Cli {
    /// Path to a key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed for all Monte Carlo streams.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSV/JSON files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Which output files to write.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    /// Alphabet width (mean excitation number) override.
    #[arg(long, global = true)]
    nbar: Option<f64>,

    /// Gain override: a number or `optimal`.
    #[arg(long, global = true)]
    gain: Option<String>,

    /// Monte Carlo run count override.
    #[arg(long, global = true)]
    runs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Interaction coefficients for the readout and teleportation pulses.
    Coeffs,
    /// Barred coefficient set, variance and fidelity at one gain.
    Teleport,
    /// Average fidelity against the classical benchmark over the nbar grid.
    FidelitySweep,
    /// Optimal gain and fidelity over the nbar grid.
    GainOpt,
    /// Shaped-pulse QND fidelity optimization (requires gamma_extra = 0).
    QndOpt,
    /// Monte Carlo teleportation batch with analytic comparison.
    McRun {
        /// Also dump per-run records to mc-run-records.csv.
        #[arg(long)]
        records: bool,
    },
    /// Teleported variance over the gain grid for several input states.
    VarianceVsGain,
    /// Stroboscopic teleportation of a time-varying input.
    Sequence,
    /// Dual-path consistency suite; nonzero exit on any failure.
    Selfcheck,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CmdError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    output::apply_format_override(&mut cfg, cli.format);
    if let Some(nbar) = cli.nbar {
        cfg.nbar = nbar;
    }
    if let Some(gain) = &cli.gain {
        cfg.gain = parse_gain("gain", gain)?;
    }
    if let Some(runs) = cli.runs {
        cfg.n_runs = runs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CmdError> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Coeffs => commands::coeffs(&cfg),
        Command::Teleport => commands::teleport(&cfg),
        Command::FidelitySweep => commands::fidelity_sweep(&cfg),
        Command::GainOpt => commands::gain_opt(&cfg),
        Command::QndOpt => commands::qnd_opt(&cfg),
        Command::McRun { records } => commands::mc_run(&cfg, *records),
        Command::VarianceVsGain => commands::variance_vs_gain_cmd(&cfg),
        Command::Sequence => commands::sequence(&cfg),
        Command::Selfcheck => commands::selfcheck(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(CmdError::Selfcheck(n)) => {
            eprintln!("error: {n} selfcheck(s) failed");
            ExitCode::from(1)
        }
        Err(CmdError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
