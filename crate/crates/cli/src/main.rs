use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gitfl_cli::{load_config, partition_stats, run_experiment, summarize_dir, write_summary, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "gitfl", version, about = "Simulate version-controlled asynchronous federated learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configuration of an experiment file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the file and $GITFL_OUTPUT_DIR).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Summarize the metrics files in a directory.
    Summarize {
        dir: PathBuf,
        /// Accuracy for the time/communication-to-target columns.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Print per-client label histograms of the data partition.
    PartitionStats { config: PathBuf },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> gitfl_cli::Result<ExitCode> {
    match command {
        Command::Run { config, output } => {
            let mut spec = load_config(&config)?;
            if let Some(dir) = output.or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from)) {
                spec.output_dir = dir;
            }
            eprintln!("{} runs -> {}", spec.runs.len(), spec.output_dir.display());
            let outcome = run_experiment(&spec)?;
            for (file, err) in &outcome.failures {
                eprintln!("run {file} failed: {err}");
            }
            eprintln!(
                "{} of {} runs completed; summary in {}",
                outcome.metrics_files.len(),
                spec.runs.len(),
                outcome.summary_file.display()
            );
            Ok(ExitCode::from(outcome.exit_code() as u8))
        }
        Command::Summarize { dir, target } => {
            if let Some(t) = target {
                if !(t > 0.0 && t < 1.0) {
                    return Err(gitfl_cli::CliError::Key {
                        key: "--target".into(),
                        message: format!("must lie in (0, 1), got {t}"),
                    });
                }
            }
            let lines = summarize_dir(&dir, target)?;
            write_summary(&lines, std::io::stdout().lock())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::PartitionStats { config } => {
            let spec = load_config(&config)?;
            partition_stats(&spec, std::io::stdout().lock())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
