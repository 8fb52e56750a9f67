use clap::{Parser, Subcommand};
use sqdist::cli::{run_file, RunOptions, EXIT_OK};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sqdist", version, about = "Squared Riemannian distance approximation studies")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a JSON config.
    Run {
        config: PathBuf,
        /// Also write the construction trace.
        #[arg(long)]
        trace: bool,
        /// Report directory (overrides the config).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let Args {
        command: Command::Run {
            config,
            trace,
            out_dir,
        },
    } = Args::parse();
    match run_file(&config, &RunOptions { out_dir, trace }) {
        Ok(outcome) => {
            // a closed pipe (e.g. `| head`) is not a failure of the run
            let mut out = std::io::stdout().lock();
            for f in &outcome.files {
                let _ = writeln!(out, "{}", f.display());
            }
            ExitCode::from(EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
