//! `lbp`: simulations, lineage counting and verification experiments for the
//! two-type logistic branching process.

mod commands;
mod config;
mod selftest;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Failure;

#[derive(Debug, Parser)]
#[command(name = "lbp", version, about, arg_required_else_help = true)]
struct Cli {
    /// Run the exact small-instance oracles and report pass/fail.
    #[arg(long, global = true)]
    selftest: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact forward simulation of the population counts (natural time).
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Initial plus count; defaults to half of K.
        #[arg(long)]
        n_plus: Option<u64>,
        /// Initial minus count; defaults to the other half of K.
        #[arg(long)]
        n_minus: Option<u64>,
    },
    /// Graphical construction on [0, T] (rescaled time) and one backward
    /// lineage-counting pass.
    Asg {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of sampled lineages.
        #[arg(long)]
        sample_size: Option<u64>,
    },
    /// One path of the branching-coalescing dual chain.
    Dual {
        #[command(flatten)]
        common: CommonArgs,
        /// Initial number of lineages.
        #[arg(long, default_value_t = 3)]
        n0: u64,
    },
    /// One Euler-Maruyama path of the frequency diffusion.
    Sde {
        #[command(flatten)]
        common: CommonArgs,
        /// Initial minus frequency.
        #[arg(long)]
        w0: Option<f64>,
        /// Euler step.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Growth-phase experiment.
    Growth(CommonArgs),
    /// Monte Carlo moment-duality experiment.
    Duality(CommonArgs),
    /// Exact scaled lineage transition sums against their limits.
    Limits(CommonArgs),
    /// Any experiment described by `--experiment`.
    Run(CommonArgs),
}

/// Flags shared by every command. Flags override the experiment file, which
/// overrides the model file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Law family JSON.
    #[arg(long)]
    pub model: Option<std::path::PathBuf>,
    /// Experiment JSON.
    #[arg(long)]
    pub experiment: Option<std::path::PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; falls back to the experiment file, then to
    /// `LBP_OUT_DIR`, then to `lbp-out`.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Carrying capacity; repeat or comma-separate for a grid.
    #[arg(short = 'K', long = "K", value_delimiter = ',')]
    pub ks: Vec<u64>,
    /// Horizon.
    #[arg(short = 'T', long = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub replicates: Option<u64>,
    /// Observation times, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<f64>,
    #[arg(long)]
    pub theta_plus: Option<f64>,
    #[arg(long)]
    pub theta_minus: Option<f64>,
}

fn dispatch(command: Command) -> Result<String, Failure> {
    use lbp_core::harness::ExperimentKind;
    match command {
        Command::Simulate { common, n_plus, n_minus } => commands::simulate(&common, n_plus, n_minus),
        Command::Asg { common, sample_size } => commands::asg(&common, sample_size),
        Command::Dual { common, n0 } => commands::dual(&common, n0),
        Command::Sde { common, w0, dt } => commands::sde(&common, w0, dt),
        Command::Growth(common) => commands::experiment(&common, Some(ExperimentKind::Growth)),
        Command::Duality(common) => commands::experiment(&common, Some(ExperimentKind::Duality)),
        Command::Limits(common) => commands::experiment(&common, Some(ExperimentKind::LimitsProbe)),
        Command::Run(common) => commands::experiment(&common, None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.selftest {
        return if selftest::run() { ExitCode::SUCCESS } else { ExitCode::from(3) };
    }
    let Some(command) = cli.command else {
        eprintln!("error: no command given; see `lbp --help`");
        return ExitCode::from(2);
    };
    match dispatch(command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.code())
        }
    }
}
