//! `distreg`: embed sampled distributions, fit and apply kernel ridge
//! regressors, and run the Monte Carlo studies, all from one TOML run file.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

impl From<distreg_core::Error> for CliError {
    fn from(e: distreg_core::Error) -> Self {
        let numerical = e.is_numerical() || matches!(e, distreg_core::Error::FingerprintMismatch { .. });
        CliError {
            code: if numerical { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "distreg", version, about = "Kernel distribution regression toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct Common {
    /// TOML run file holding exactly one payload table.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override a config value, e.g. `--set fit.lambda=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, value_name = "T")]
    threads: Option<usize>,
    /// Parent directory for run directories.
    #[arg(long, value_name = "DIR", default_value = "runs")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Embed every group of a samples file.
    Embed(Common),
    /// Fit a kernel ridge regressor on labelled groups.
    Fit(Common),
    /// Predict labels of new groups with a fitted model.
    Predict(Common),
    /// Run one of the experiment-* studies.
    Experiment(Common),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, common) = match &cli.command {
        Command::Embed(c) => ("embed", c),
        Command::Fit(c) => ("fit", c),
        Command::Predict(c) => ("predict", c),
        Command::Experiment(c) => ("experiment", c),
    };
    match run::execute(name, common.clone().into()) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

impl From<Common> for run::Options {
    fn from(c: Common) -> Self {
        run::Options {
            config: c.config,
            overrides: c.set,
            threads: c.threads,
            out: c.out,
        }
    }
}
