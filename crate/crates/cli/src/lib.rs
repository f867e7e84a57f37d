//! Command-line front end: asymptotic moments, Monte Carlo comparisons,
//! kernel convergence studies and large-window determinant scans.

pub mod commands;
pub mod config;
pub mod report;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::*;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] softedge::Error),
    #[error("output error: {0}")]
    Io(String),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    /// 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "softedge", version, about = "Soft-edge linear statistics of random matrix ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// gue, gse, goe, lue, lse or loe
    #[arg(long)]
    pub ensemble: Option<String>,
    /// Laguerre exponent
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// test function: gauss:a,c | polygauss:k,a | sech2:a | zero
    #[arg(long = "f", allow_hyphen_values = true)]
    pub f: Option<String>,
    /// absolute and relative quadrature tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// output file; stdout when absent or "-"
    #[arg(long, short)]
    pub output: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Asymptotic mean of the edge-scaled statistic
    Mean(#[command(flatten)] Common),
    /// Asymptotic variance of the edge-scaled statistic
    Variance(#[command(flatten)] Common),
    /// Asymptotic, Monte Carlo and (beta = 2) finite-N Fredholm moments side by side
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n")]
        n: Option<usize>,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sup-grid error of the scaled kernel against the Airy kernel per N, and the log-log slope
    KernelConverge {
        #[command(flatten)]
        common: Common,
        /// comma-separated N values
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
    },
    /// log det(I + K f(x / gamma)) over gamma against c1 gamma^{3/2} + c2
    BwScan {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        /// comma-separated gamma values
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
    },
}

impl Cmd {
    /// Fills every unset flag from the defaults block.
    pub fn resolve(&self) -> RunConfig {
        let (command, common) = match self {
            Cmd::Mean(c) => (Command::Mean, c),
            Cmd::Variance(c) => (Command::Variance, c),
            Cmd::Compare { common, .. } => (Command::Compare, common),
            Cmd::KernelConverge { common, .. } => (Command::KernelConverge, common),
            Cmd::BwScan { common, .. } => (Command::BwScan, common),
        };
        let default_f = if command == Command::BwScan { DEFAULT_BW_F } else { DEFAULT_F };
        let f_spec = common.f.clone().unwrap_or_else(|| default_f.to_string());
        let (f_family, f_params) = RunConfig::split_f(&f_spec);
        let mut cfg = RunConfig {
            command,
            ensemble: common.ensemble.clone().unwrap_or_else(|| DEFAULT_ENSEMBLE.to_string()),
            n: DEFAULT_N,
            ns: DEFAULT_NS.to_vec(),
            alpha: common.alpha.unwrap_or(DEFAULT_ALPHA),
            f_family,
            f_params,
            f_spec,
            lambda: DEFAULT_LAMBDA,
            gammas: DEFAULT_GAMMAS.to_vec(),
            n_samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            tol: common.tol.unwrap_or(DEFAULT_TOL),
            output_path: common.output.clone().filter(|p| p != "-"),
            format: common.format.unwrap_or(Format::Csv),
        };
        match self {
            Cmd::Compare { n, n_samples, seed, .. } => {
                cfg.n = n.unwrap_or(DEFAULT_N);
                cfg.n_samples = n_samples.unwrap_or(DEFAULT_SAMPLES);
                cfg.seed = seed.unwrap_or(DEFAULT_SEED);
            }
            Cmd::KernelConverge { ns: Some(ns), .. } => cfg.ns = ns.clone(),
            Cmd::BwScan { lambda, gammas, .. } => {
                cfg.lambda = lambda.unwrap_or(DEFAULT_LAMBDA);
                if let Some(g) = gammas {
                    cfg.gammas = g.clone();
                }
            }
            _ => {}
        }
        cfg
    }
}

/// Caps the global worker pool from the environment.
pub fn configure_threads(value: Option<String>) -> Result<(), CliError> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one command and writes its output; returns the rendered text.
pub fn run(cmd: &Cmd) -> Result<String, CliError> {
    let cfg = cmd.resolve();
    let text = commands::execute(&cfg)?;
    match &cfg.output_path {
        Some(path) => std::fs::write(path, &text)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(text)
}
