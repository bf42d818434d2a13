//! `cmcgraph` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Overrides;

#[derive(Parser)]
#[command(name = "cmcgraph", version, about = "Constant mean curvature graphs with prescribed contact angle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Override the mesh size `domain.h`.
    #[arg(long)]
    h: Option<f64>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn overrides(&self, eps_schedule: Option<Vec<f64>>) -> Overrides {
        Overrides { h: self.h, output: self.output.clone(), seed: self.seed, workers: self.workers, eps_schedule }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the mesh and print its summary.
    Mesh {
        #[command(flatten)]
        common: Common,
    },
    /// Solve one penalized problem.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        upsilon: f64,
        /// Start from seeded uniform noise of this amplitude instead of u0.
        #[arg(long)]
        init_noise: Option<f64>,
        #[arg(long)]
        vtk: bool,
        /// Write the Jacobian at the solution as a coordinate listing.
        #[arg(long)]
        dump_jacobian: bool,
    },
    /// Run the eps -> 0 continuation.
    Continuation {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly decreasing.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        eps_schedule: Option<Vec<f64>>,
        /// Include the final fields in the JSON report.
        #[arg(long)]
        dump_fields: bool,
        #[arg(long)]
        vtk: bool,
    },
    /// Run a built-in verification suite or a case file.
    Verify {
        /// flat, curved, negative-controls or all.
        #[arg(long, default_value = "all", conflicts_with = "case")]
        suite: String,
        /// JSON case file: one case or a list of suite items.
        #[arg(long)]
        case: Option<PathBuf>,
        #[arg(long, short, default_value = "out")]
        output: PathBuf,
        /// Override the perturbation seed of every case.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mesh { common } => commands::mesh(&common.config, &common.overrides(None)),
        Command::Solve { common, eps, upsilon, init_noise, vtk, dump_jacobian } => commands::solve(
            &common.config,
            &common.overrides(None),
            commands::SolveArgs { eps, upsilon, init_noise, vtk, dump_jacobian },
        ),
        Command::Continuation { common, eps_schedule, dump_fields, vtk } => {
            commands::continuation(&common.config, &common.overrides(eps_schedule), dump_fields, vtk)
        }
        Command::Verify { suite, case, output, seed, workers } => {
            commands::verify(&suite, case.as_deref(), &output, seed, workers)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
