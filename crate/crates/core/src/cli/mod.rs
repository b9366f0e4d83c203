//! Batch front end: `pdmp run <config.json> <subcommand> [--key value]...`.

pub mod config;
pub mod output;
pub mod tasks;

pub use config::Config;
pub use tasks::{run, Outcome, Subcommand};

use clap::{Parser, Subcommand as ClapSubcommand};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "pdmp", version, about = "Simulation and numerical analysis of piecewise deterministic Markov processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, ClapSubcommand)]
enum Command {
    /// Run a task from a JSON config.
    Run {
        config: PathBuf,
        #[arg(value_enum)]
        task: Subcommand,
        /// Config overrides as `--key value` pairs; dotted keys address nested fields.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
}

/// Exit status: 0 success, 1 usage or configuration error, 2 tolerance failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let Command::Run { config, task, overrides } = cli.command;
    let result = Config::load(&config).and_then(|mut cfg| {
        cfg.apply_overrides(&overrides)?;
        run(&cfg, task)
    });
    match result {
        Ok(outcome) => {
            for c in &outcome.summary.checks {
                println!(
                    "{:<6} {:<20} {:<22} {:.3e} (tol {:.1e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.model,
                    c.name,
                    c.value,
                    c.tolerance
                );
            }
            if outcome.passed {
                0
            } else {
                eprintln!("tolerance check failed");
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Sizes the global rayon pool from `PDMP_THREADS` (0 or unset: automatic).
pub fn configure_threads() -> Result<(), String> {
    let n = match std::env::var("PDMP_THREADS") {
        Err(_) => 0,
        Ok(v) => v.trim().parse::<usize>().map_err(|_| format!("PDMP_THREADS must be a nonnegative integer, got `{v}`"))?,
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}
