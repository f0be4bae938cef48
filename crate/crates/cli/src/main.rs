//! `ife`: fixed-effect estimation, bias correction and Monte Carlo
//! experiments for nonlinear panel models.
//!
//! Exit status: 0 on success, 2 for input errors, 3 for numerical failures.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ife_core::montecarlo::{DesignKind, Method};
use ife_core::Family;

use config::{CorrectMethod, Format, RunConfig, OUTPUT_DIR_ENV};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl From<ife_core::Error> for CliError {
    fn from(e: ife_core::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "ife", version, about = "Fixed-effect panel estimation with indirect and jackknife bias corrections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Fixed-effect maximum likelihood fit.
    Fit,
    /// Fixed-effect fit followed by a bias correction (--method).
    Correct,
    /// Monte Carlo experiment (--design).
    Mc,
    /// Neyman-Scott demonstration with closed-form estimators.
    NsDemo,
}

#[derive(clap::Args)]
struct Flags {
    /// JSON file with any of the keys below; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV panel (`id,t,y,...`); `synthetic` for the built-in panel in `mc`.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// JSON schema of the CSV panel.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    /// probit, poisson or neyman-scott (overrides the schema).
    #[arg(long, global = true)]
    family: Option<Family>,
    /// ife, hbc or bc_hn.
    #[arg(long, global = true)]
    method: Option<CorrectMethod>,
    /// Simulation paths for the indirect estimator.
    #[arg(long = "H", global = true)]
    h: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo replications.
    #[arg(long = "R", global = true)]
    r: Option<usize>,
    /// varying_T, calibrated_static or calibrated_dynamic.
    #[arg(long, global = true)]
    design: Option<DesignKind>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long = "T", global = true)]
    t: Option<usize>,
    /// Comma-separated estimators for `mc` (truth, fe, ife, hbc, bc_hn).
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Comma-separated true parameter.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    theta0: Option<Vec<f64>>,
    /// Output directory (default: the result goes to standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(short, long = "verbose", global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Flags {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            data: self.data.clone(),
            schema: self.schema.clone(),
            family: self.family,
            method: self.method,
            h: self.h,
            seed: self.seed,
            r: self.r,
            design: self.design,
            n: self.n,
            t: self.t,
            methods: self.methods.clone(),
            theta0: self.theta0.clone(),
            out: self.out.clone(),
            format: self.format,
            threads: self.threads,
            verbosity: (self.verbose > 0).then_some(self.verbose),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let env_out = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    let config = file.merge(&cli.flags.to_config(), env_out);
    if let Some(threads) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    match cli.command {
        Command::Fit => commands::fit(&config),
        Command::Correct => commands::correct(&config),
        Command::Mc => commands::mc(&config),
        Command::NsDemo => commands::ns_demo(&config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
