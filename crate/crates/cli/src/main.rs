//! `modgrad`: stability analysis of `x' = P(t)∇f(x)` from a JSON config.
//!
//! Exit codes: 0 on completion, 2 on a configuration error (including a
//! failed PSD check of `P` and a level `c ≥ f(anchor)`), 3 on a numerical or
//! output failure.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod json;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modgrad::gallery::GalleryId;

use commands::{BasinArgs, Run, SimulateArgs};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "modgrad",
    version,
    about = "Stability analysis of modified-gradient systems x' = P(t)∇f(x)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Analysis config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Args)]
struct OutputFlags {
    /// Output directory; overrides the config's "output" key. Default: modgrad-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for sampled basin verification.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Suppress progress and summary lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Find equilibria and certify each one.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Integrate one trajectory and its Lyapunov trace.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        /// Equilibrium defining V = f(anchor) − f; defaults to the critical
        /// point reached, or the nearest one.
        #[arg(long, value_delimiter = ',')]
        anchor: Option<Vec<f64>>,
    },
    /// Extract a sublevel component, check H4–H6 and verify by simulation.
    #[command(allow_negative_numbers = true)]
    Basin {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        anchor: Vec<f64>,
        /// Level c < f(anchor); suggested from the highest saddle below f(anchor) if omitted.
        #[arg(long)]
        c: Option<f64>,
        /// Cells per axis.
        #[arg(long)]
        resolution: Option<usize>,
        /// Number of verification starts.
        #[arg(long)]
        samples: Option<usize>,
        /// Integration horizon for verification runs.
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Numerical verdict on the eigenvalue condition ∫ λ₁(P(t)) dt = ∞.
    Ec {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Built-in worked examples.
    Gallery {
        #[command(subcommand)]
        command: GalleryCommand,
    },
}

#[derive(Subcommand)]
enum GalleryCommand {
    /// List the example ids.
    List,
    /// Run the analyze pipeline on an example with default options.
    Run {
        id: GalleryId,
        /// Spline depth (ex22 only).
        #[arg(long)]
        depth: Option<usize>,
        #[command(flatten)]
        output: OutputFlags,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("MODGRAD_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("MODGRAD_THREADS must be a non-negative integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))
}

fn run_for(flags: &OutputFlags, cfg: Option<&config::AnalysisConfig>) -> Run {
    let out_dir = flags
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from("modgrad-out"));
    Run {
        out_dir,
        seed: flags.seed,
        quiet: flags.quiet,
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    configure_threads()?;
    match command {
        Command::Analyze { common } => {
            let cfg = config::load(&common.config)?;
            commands::analyze(&cfg, &run_for(&common.output, Some(&cfg)))
        }
        Command::Simulate {
            common,
            x0,
            t0,
            t_end,
            anchor,
        } => {
            let cfg = config::load(&common.config)?;
            let args = SimulateArgs { x0, t0, t_end, anchor };
            commands::simulate_cmd(&cfg, &args, &run_for(&common.output, Some(&cfg)))
        }
        Command::Basin {
            common,
            anchor,
            c,
            resolution,
            samples,
            t_end,
        } => {
            let cfg = config::load(&common.config)?;
            let args = BasinArgs {
                anchor,
                c,
                resolution,
                samples,
                t_end,
            };
            commands::basin(&cfg, &args, &run_for(&common.output, Some(&cfg)))
        }
        Command::Ec { common, horizon } => {
            let cfg = config::load(&common.config)?;
            commands::ec(&cfg, horizon, &run_for(&common.output, Some(&cfg)))
        }
        Command::Gallery { command } => match command {
            GalleryCommand::List => {
                commands::gallery_list();
                Ok(())
            }
            GalleryCommand::Run { id, depth, output } => {
                let cfg = config::gallery(id, depth)?;
                commands::analyze(&cfg, &run_for(&output, None))
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("modgrad: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
