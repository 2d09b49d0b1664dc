//! `rankdesign`: sample sizes, effect conversions, design effects,
//! simulations and sweep tables from the command line.
//!
//! Exit codes: 0 success, 2 infeasible design, 64 usage error, 65 bad
//! configuration document.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;
use output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "rankdesign",
    version,
    about = "Rank-based trial design calculations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutcomeArg {
    Continuous,
    Ordinal,
    Binary,
}

/// Inputs shared by `design` and `sweep`.
#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long, value_enum, default_value = "continuous")]
    pub outcome: OutcomeArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// 1 or 2.
    #[arg(long, default_value = "2")]
    pub sided: String,
    #[arg(long)]
    pub power: f64,
    /// Control to experiment size ratio.
    #[arg(long, default_value_t = 1.0)]
    pub allocation: f64,
    /// Mean category proportions, comma separated.
    #[arg(long, conflicts_with = "props_file")]
    pub props: Option<String>,
    /// One proportion per line.
    #[arg(long)]
    pub props_file: Option<PathBuf>,
    /// Control arm event rate for binary outcomes.
    #[arg(long)]
    pub control_rate: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample size, clusters per arm, or cluster size for a total cluster count.
    Design {
        #[command(flatten)]
        common: DesignArgs,
        /// Effect as kind=value with kind in or, logodds, theta, sd.
        #[arg(long)]
        effect: String,
        /// Cluster size.
        #[arg(long, conflicts_with = "m")]
        k: Option<u64>,
        /// Total number of clusters; solves for the cluster size.
        #[arg(long)]
        m: Option<u64>,
    },
    /// Converts an effect size between scales.
    Convert {
        #[arg(long)]
        from: String,
        /// Target kinds, comma separated; all kinds when omitted.
        #[arg(long)]
        to: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Design effect 1+γ(k−1), and the exact design effect when a latent
    /// ICC and cluster count are given.
    Deff {
        #[arg(long)]
        k: u64,
        /// Rank ICC; derived from --rho when omitted.
        #[arg(long)]
        gamma: Option<f64>,
        /// Latent ICC.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// Clusters per arm for the exact design effect.
        #[arg(long, requires = "rho")]
        clusters: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Runs a simulation scenario from a JSON document.
    Simulate {
        config: PathBuf,
        /// Overrides the document's seed and RANKDESIGN_SEED.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Evaluates a design over a grid of one parameter.
    Sweep {
        #[command(flatten)]
        common: DesignArgs,
        /// or, theta, gamma, k or m.
        #[arg(long)]
        vary: String,
        /// start:stop:step or a comma-separated list.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        effect: Option<String>,
        #[arg(long, conflicts_with = "m")]
        k: Option<u64>,
        #[arg(long)]
        m: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Design {
            common,
            effect,
            k,
            m,
        } => commands::design(&common, &effect, k, m).map(|o| o.render(common.format)),
        Command::Convert { from, to, format } => {
            commands::convert(&from, to.as_deref()).map(|o| o.render(format))
        }
        Command::Deff {
            k,
            gamma,
            rho,
            theta,
            clusters,
            format,
        } => commands::deff(k, gamma, rho, theta, clusters).map(|o| o.render(format)),
        Command::Simulate {
            config,
            seed,
            workers,
            format,
        } => {
            let env_seed = std::env::var(commands::SEED_ENV).ok();
            commands::simulate(&config, seed, env_seed.as_deref(), workers)
                .map(|o| o.render(format))
        }
        Command::Sweep {
            common,
            vary,
            grid,
            effect,
            k,
            m,
        } => commands::sweep(&common, &vary, &grid, effect.as_deref(), k, m)
            .map(|o| o.render(common.format)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rankdesign: {e}");
            e.exit_code()
        }
    }
}
