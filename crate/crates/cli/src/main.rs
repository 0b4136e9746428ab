use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod plot;
mod table;

use commands::{Options, OracleFailed};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "levloop", version, about = "Loop-protocol simulations for a levitated particle")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output prefix; files are written as PREFIX_<table>.csv
    #[arg(long, global = true, default_value = "levloop")]
    out: String,

    /// Worker threads for sweeps (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Trajectory samples for `loop`
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Also write a matplotlib script beside each CSV
    #[arg(long, global = true)]
    emit_plot: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Moments and purity along one loop
    Loop,
    /// Final purity over total time and a noise rate
    SweepPurity,
    /// Minimal detectable force over total time per strategy
    Force,
    /// Two-body reduced purity and coupling tables
    Entangle,
    /// Cross-check the moment equations against a Fock-space master equation
    Oracle,
    /// Convert between dimensionless and laboratory units
    Convert,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_ORACLE: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<OracleFailed>().is_some() {
        return EXIT_ORACLE;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<levloop::Error>() {
            return match e {
                levloop::Error::InvalidState(_) => EXIT_NUMERICAL,
                e if e.is_numerical() => EXIT_NUMERICAL,
                _ => EXIT_CONFIG,
            };
        }
    }
    EXIT_CONFIG
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.jobs {
        anyhow::ensure!(n >= 1, "--jobs must be ≥ 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    if let Some(n) = cli.samples {
        anyhow::ensure!(n >= 2, "--samples must be ≥ 2");
    }
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let opts = Options {
        out: cli.out.clone(),
        samples: cli.samples,
        emit_plot: cli.emit_plot,
    };
    let written = match cli.command {
        Command::Loop => commands::cmd_loop(&cfg, &opts)?,
        Command::SweepPurity => commands::cmd_sweep_purity(&cfg, &opts)?,
        Command::Force => commands::cmd_force(&cfg, &opts)?,
        Command::Entangle => commands::cmd_entangle(&cfg, &opts)?,
        Command::Oracle => commands::cmd_oracle(&cfg, &opts)?,
        Command::Convert => commands::cmd_convert(&cfg, &opts)?,
    };
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
