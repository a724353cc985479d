use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dcflow::analysis::CheckMode;
use dcflow_cli::{run_experiment, CliError, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "dcflow", version, about = "Damped DCA and continuous DCA flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides output_dir in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail (exit 4) when a flag fails or constants are only empirical. Default.
        #[arg(long, conflicts_with = "report_only")]
        certify: bool,
        /// Evaluate everything, including empirical constants, and always exit 0 on completion.
        #[arg(long)]
        report_only: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Treat leaving the problem region as a failed flag instead of a warning.
        #[arg(long)]
        strict_invariance: bool,
        /// Worker threads (default: DCFLOW_THREADS or all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let Command::Run { config, out, certify: _, report_only, seed, strict_invariance, threads } = Cli::parse().command;
    let result = std::fs::read_to_string(&config)
        .map_err(|source| CliError::Io { path: config.display().to_string(), source })
        .and_then(|text| ExperimentConfig::parse(&text))
        .and_then(|cfg| {
            let mode = if report_only { CheckMode::ReportOnly } else { CheckMode::Certify };
            run_experiment(&cfg, &RunOptions { mode, seed, out, strict_invariance, threads })
        });
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for w in outcome.report["warnings"].as_array().into_iter().flatten() {
                eprintln!("warning: {}", w.as_str().unwrap_or_default());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("dcflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
