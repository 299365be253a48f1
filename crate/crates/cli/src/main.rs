//! `monoapprox`: batch front end for the order-preserving approximation toolkit.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use monoapprox::phi::DEFAULT_MAX_ITER;

#[derive(Debug, Parser)]
#[command(name = "monoapprox", version, about = "Monotone approximation on finite preordered spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output format; each command has its own default.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on φ iterations per search.
    #[arg(long, global = true, env = "MONOAPPROX_MAX_ITER", default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a space and summarize the order a family generates.
    Order {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        family: Option<PathBuf>,
    },
    /// Build an isotone approximant of a target from the family.
    Approximate {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        phi: PhiArgs,
    },
    /// Convergence table of the Bernstein-type rational operator.
    Bernstein {
        /// identity | sqrt | step-smoothed | const:<c> | pwl:x:y,... | data:<csv>
        #[arg(long = "fn")]
        function: String,
        /// Comma-separated degrees.
        #[arg(long, default_value = "25,50,100,200")]
        n: String,
        /// Right end of the interval; defaults to 1, or the last data x.
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, default_value_t = monoapprox::bernstein::DEFAULT_GRID)]
        grid: usize,
        /// Target accuracy for the error-bound column.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Continuity radius for ε/2; derived from a Lipschitz constant when omitted.
        #[arg(long)]
        delta: Option<f64>,
        /// Emit one row per grid point and degree instead of the summary table.
        #[arg(long)]
        per_x: bool,
    },
    /// Seeded closure checks for degree-matched rational functions.
    Closure {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 4)]
        maxdeg: u32,
    },
    /// Tabulate φ and probe its convergence to 0 and 1.
    Phi {
        #[command(flatten)]
        phi: PhiArgs,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Right end of the tabulated range.
        #[arg(long, default_value_t = 2.0)]
        b: f64,
    },
}

#[derive(Debug, Args)]
pub struct PhiArgs {
    /// alpha | beta | gamma | chi | pwl:x:y,... | inline JSON | JSON file
    #[arg(long, default_value = "gamma")]
    phi: String,
    /// Parameter of alpha, in (0, 1].
    #[arg(long)]
    a: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Order { space, family } => commands::order(&cli.common, &space, family.as_deref()),
        Command::Approximate {
            space,
            family,
            target,
            n,
            phi,
        } => commands::approximate(&cli.common, &space, &family, &target, n, &phi),
        Command::Bernstein {
            function,
            n,
            b,
            grid,
            epsilon,
            delta,
            per_x,
        } => commands::bernstein(
            &cli.common,
            &commands::BernsteinConfig {
                function,
                n,
                b,
                grid,
                epsilon,
                delta,
                per_x,
            },
        ),
        Command::Closure {
            seed,
            trials,
            dim,
            maxdeg,
        } => commands::closure(&cli.common, seed, trials, dim, maxdeg),
        Command::Phi { phi, grid, b } => commands::phi(&cli.common, &phi, grid, b),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
