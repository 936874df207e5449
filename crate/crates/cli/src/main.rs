use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spde_bridge::{run, Command, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "spde-bridge", version, about = "Guided diffusion bridges for semilinear SPDEs")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Forward-simulate the SPDE.
    Forward(Args),
    /// Simulate the guided process towards `observation.y`.
    Guided(Args),
    /// Sample the bridge with the pCN Metropolis-Hastings chain.
    BridgeMh(Args),
    /// Sample the density of `L X_T` with the correlated pseudo-marginal chain.
    DensityCpm(Args),
    /// Run the analytic oracle suite and write `report.json`.
    Validate(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the top-level `seed` of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Sub::Forward(a) => (Command::Forward, a),
        Sub::Guided(a) => (Command::Guided, a),
        Sub::BridgeMh(a) => (Command::BridgeMh, a),
        Sub::DensityCpm(a) => (Command::DensityCpm, a),
        Sub::Validate(a) => (Command::Validate, a),
    };
    let opts = RunOptions {
        config: args.config,
        seed: args.seed,
        out: args.out,
        quiet: args.quiet,
    };
    match run(cmd, &opts) {
        Ok(summary) => {
            if !opts.quiet {
                for w in &summary.warnings {
                    eprintln!("warning: {w}");
                }
                eprintln!("wrote {} files to {}", summary.files.len(), summary.out.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
