//! `sure-amp`: compressive-sensing reconstruction with per-pixel risk
//! heatmaps.

mod commands;
mod config;
mod error;
mod output;
mod selftest;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunArgs;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sure-amp", version, about = "AMP reconstruction with SURE/GSURE risk heatmaps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    args: RunArgs,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Draw a variable-density k-space mask
    Mask,
    /// Simulate measurements and reconstruct
    Recon,
    /// Estimate a per-pixel risk heatmap for a reconstruction
    Heatmap,
    /// Sweep heatmap accuracy over patch sizes and probe counts
    Eval,
    /// Run built-in invariant checks
    Selftest,
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = cli.args.resolve()?;
    if cli.args.print_config {
        return Ok(cfg.to_json() + "\n");
    }
    match cli.command {
        Command::Mask => commands::cmd_mask(&cfg),
        Command::Recon => commands::cmd_recon(&cfg),
        Command::Heatmap => commands::cmd_heatmap(&cfg),
        Command::Eval => commands::cmd_eval(&cfg),
        Command::Selftest => {
            let (text, failed) = selftest::run();
            print!("{text}");
            if failed > 0 {
                Err(CliError::Selftest(failed))
            } else {
                Ok(String::new())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
