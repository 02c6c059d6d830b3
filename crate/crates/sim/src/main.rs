use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use nanopulse::config::{Config, Verb};
use nanopulse::plot;
use nanopulse::scenarios;
use nanopulse::AppError;

#[derive(Parser)]
#[command(
    name = "nanopulse",
    version,
    about = "1D electron dynamics under localized time-dependent fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Static transmission curve T(E) of the barrier.
    StaticScan(RunArgs),
    /// Barrier heights giving the target transmission at each energy.
    Calibrate(RunArgs),
    /// Switched barrier: density raster, D(t), T(x,t).
    Switch(RunArgs),
    /// Localized laser pulse: traces, spectra, density raster.
    Pulse(RunArgs),
    /// Weighted sum of pulse-induced currents over the incident scan.
    Superpose(RunArgs),
    /// Re-render SVG plots from the CSV files in a directory.
    Plot { dir: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; built-in defaults when omitted.
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set incident.energy_meV=[27,54]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Validate and print the resolved configuration without running.
    #[arg(long)]
    check: bool,
    /// Output directory (same as `--set output.dir=...`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(verb: Verb, args: RunArgs) -> Result<(), AppError> {
    let mut sets = args.set;
    if let Some(out) = args.out {
        sets.push(format!("output.dir={:?}", out.display().to_string()));
    }
    let cfg = Config::load(args.config.as_deref(), &sets)?.resolve(verb)?;
    if args.check {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    info!("{verb} -> {}", cfg.output.dir.display());
    scenarios::run(verb, &cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::StaticScan(a) => run(Verb::StaticScan, a),
        Command::Calibrate(a) => run(Verb::Calibrate, a),
        Command::Switch(a) => run(Verb::Switch, a),
        Command::Pulse(a) => run(Verb::Pulse, a),
        Command::Superpose(a) => run(Verb::Superpose, a),
        Command::Plot { dir } => plot::render_dir(&dir).map(|files| info!("{} plots", files.len())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
