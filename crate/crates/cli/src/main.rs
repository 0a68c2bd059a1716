use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use traplab::{catalog, runner, suite, RunError};

#[derive(Parser)]
#[command(name = "traplab", version, about = "Experiments on the scarcity, cost and fragility of provably safe policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run { config: PathBuf },
    /// List the experiments and their parameters.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Run the acceptance suite with pinned configs.
    ReproduceAll {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = runner::DEFAULT_OUTPUT_DIR)]
        out: PathBuf,
        /// Run the untimed criteria concurrently.
        #[arg(long)]
        parallel: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, RunError> {
    match command {
        Command::Run { config } => {
            let config = runner::ExperimentConfig::load(&config)?;
            let report = runner::run_experiment(&config)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(0)
        }
        Command::List { json } => {
            let entries = catalog::list_experiments();
            if json {
                println!("{}", serde_json::to_string_pretty(&entries).expect("catalog serializes"));
            } else {
                for e in &entries {
                    println!("{:<32} {}", e.name, e.claim);
                }
            }
            Ok(0)
        }
        Command::ReproduceAll { seed, out, parallel } => {
            let report = suite::reproduce_all(&out, seed, parallel)?;
            print!("{}", suite::format_summary(&report));
            println!("summary: {}", out.join("summary.csv").display());
            Ok(report.exit_code() as u8)
        }
    }
}
