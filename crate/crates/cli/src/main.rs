use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tradeoff_lab::{parse_config, run, RunError, RunOptions, Subcommand};

/// Seeded Monte-Carlo experiments on penalized least squares.
///
/// Exit codes: 0 success, 1 output error, 2 invalid input, 3 numerical
/// failure, 4 failed acceptance gate.
#[derive(Debug, Parser)]
#[command(name = "tradeoff-lab", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the configuration.
    #[arg(long, env = "TRADEOFF_SEED")]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, env = "TRADEOFF_OUT_DIR")]
    out: Option<PathBuf>,
    /// Worker threads for the Monte-Carlo loops.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = parse_config(&args.config).map_err(RunError::from).and_then(|cfg| {
        let opts = RunOptions {
            seed: args.seed,
            out_dir: args.out.clone(),
            threads: args.threads,
        };
        run(args.subcommand, &cfg, &opts)
    });
    match result {
        Ok(outcome) => {
            for path in &outcome.manifest.outputs {
                println!("{}", path.display());
            }
            if !outcome.passed {
                eprintln!("tradeoff-lab: an acceptance gate failed; see the summary");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("tradeoff-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
