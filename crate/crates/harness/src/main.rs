use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sharedrep::{output, run_experiment, summarize, ExperimentConfig, HarnessError, RunOptions};

#[derive(Parser)]
#[command(version, about = "Shared-representation multi-task regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write trials.csv and summary.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory; overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fill the wall_millis column (output is then no longer reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Recompute summary.csv from a trials.csv.
    Summarize {
        #[arg(long)]
        trials: PathBuf,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            config,
            workers,
            out,
            timing,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let workers = workers
                .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
                .unwrap_or(1);
            let (trials, summary) = run_experiment(&cfg, RunOptions { workers, timing })?;
            let out_dir = out.unwrap_or_else(|| cfg.out_dir.clone());
            let failed = trials.iter().filter(|t| !t.succeeded()).count();
            let (tp, sp) = output::write_results(&trials, &summary, &out_dir)?;
            eprintln!("wrote {} and {}", tp.display(), sp.display());
            if failed > 0 {
                eprintln!("{failed} of {} trials failed", trials.len());
            }
            Ok(())
        }
        Command::Summarize { trials, out } => {
            let rows = summarize(&output::read_trials(&trials)?);
            let bytes = output::summary_csv(&rows);
            match out {
                Some(path) => output::write_atomic(&path, &bytes),
                None => std::io::stdout().write_all(&bytes).map_err(|source| HarnessError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                }),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
