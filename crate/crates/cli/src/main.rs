mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_config, schema, COMMANDS};
use run::{run_command, RunOutcome};

const EXIT_DOMAIN: u8 = 1;
const EXIT_SCHEMA: u8 = 2;

#[derive(Parser)]
#[command(name = "holofact", version, about = "Composition factorization laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the JSON schema of a command's configuration.
    Schema {
        #[arg(value_parser = COMMANDS)]
        command: String,
    },
}

/// Caps the worker pool from `HOLOFACT_THREADS`.
fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("HOLOFACT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or(format!("HOLOFACT_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_SCHEMA);
    }
    match cli.command {
        Command::Schema { command } => {
            let doc = schema(&command).expect("command names are validated by clap");
            println!("{}", serde_json::to_string_pretty(&doc).expect("schemas serialize"));
            ExitCode::SUCCESS
        }
        Command::Run { config, out } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(EXIT_SCHEMA);
                }
            };
            let cfg = match parse_config(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_SCHEMA);
                }
            };
            match run_command(&cfg, &out) {
                Ok(RunOutcome::Success(paths)) => {
                    for p in paths {
                        println!("{}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Ok(RunOutcome::Failed(e, path)) => {
                    eprintln!("error [{}]: {} (record in {})", e.code, e.message, path.display());
                    ExitCode::from(EXIT_DOMAIN)
                }
                Err(e) => {
                    eprintln!("error: cannot write results: {e}");
                    ExitCode::from(EXIT_DOMAIN)
                }
            }
        }
    }
}
