use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prbox_cli::{run, CliError, CliResult, Command, Format, RunConfig};

/// Environment variable holding the worker-thread count.
const WORKERS_ENV: &str = "PRBOX_SIM_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "prbox-sim", version)]
#[command(about = "Simulate post-selected Bell tests on two-mode Gaussian photon pairs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// E(alpha, beta) curves over a beta grid, one file per (alpha, r)
    Sweep(Common),
    /// CHSH report: correlations, S, AND-gate success, kept fraction, marginals
    Chsh(Common),
    /// Monte Carlo coincidence tables with standard errors
    Mc(Common),
    /// Lens cascade for a target rotation, or distances for explicit stages
    PlanFrft(Common),
    /// Maximize S over the measurement angles
    Optimize(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (key = value lines)
    #[arg(long)]
    config: PathBuf,

    /// Output file (directory for sweep). Overrides `path` in the config.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Overrides `format` in the config
    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Overrides `seed` in the config
    #[arg(long)]
    seed: Option<u64>,
}

fn configure_workers() -> CliResult<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV}={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Config(format!("{WORKERS_ENV}: {e}")))
}

fn shell_quote(arg: &str) -> String {
    if !arg.is_empty() && arg.chars().all(|c| c.is_ascii_alphanumeric() || "-_./=:@,+".contains(c)) {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    configure_workers()?;
    let (command, common) = match cli.command {
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Chsh(c) => (Command::Chsh, c),
        Cmd::Mc(c) => (Command::Mc, c),
        Cmd::PlanFrft(c) => (Command::PlanFrft, c),
        Cmd::Optimize(c) => (Command::Optimize, c),
    };
    let mut config = RunConfig::load(&common.config)?;
    if let Some(out) = common.out {
        config.output.path = Some(out);
    }
    if let Some(format) = common.format {
        config.output.format = format;
    }
    if let Some(seed) = common.seed {
        config.mc.seed = seed;
    }
    let invocation = std::iter::once("prbox-sim".to_string())
        .chain(std::env::args().skip(1).map(|a| shell_quote(&a)))
        .collect::<Vec<_>>()
        .join(" ");
    run(command, &config, &invocation)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("prbox-sim: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
