//! Defaults for every command, and the resolved per-run configuration.
//!
//! | setting            | default            | used by                  |
//! |--------------------|--------------------|--------------------------|
//! | ensemble           | gue                | mean, variance, compare, kernel-converge |
//! | alpha              | 0                  | Laguerre ensembles       |
//! | f                  | gauss:1,0          | mean, variance, compare  |
//! | f (bw-scan)        | gauss:1,-2         | bw-scan                  |
//! | lambda             | 0.05               | bw-scan                  |
//! | gammas             | 4,6,8              | bw-scan                  |
//! | N                  | 300                | compare                  |
//! | N list             | 50,100,200,400     | kernel-converge          |
//! | n_samples          | 4000               | compare                  |
//! | seed               | 1                  | compare                  |
//! | tol                | 1e-12              | all quadrature           |
//! | Nystrom window     | [-10, 6], 8 x 12   | compare (fredholm row)   |
//! | rate grid          | [-4, 2] step 1/2   | kernel-converge          |
//! | compare slack      | 0.05 N^{-1/3}      | compare                  |

use softedge::fredholm::{DEFAULT_NODES_PER_PANEL, DEFAULT_PANELS, DEFAULT_WINDOW};
use softedge::kernel::EnsembleKind;
use softedge::quad::QuadratureSpec;
use softedge::testfn::TestFunction;

use crate::CliError;

pub const DEFAULT_ENSEMBLE: &str = "gue";
pub const DEFAULT_ALPHA: f64 = 0.0;
pub const DEFAULT_F: &str = "gauss:1,0";
pub const DEFAULT_BW_F: &str = "gauss:1,-2";
pub const DEFAULT_LAMBDA: f64 = 0.05;
pub const DEFAULT_GAMMAS: [f64; 3] = [4.0, 6.0, 8.0];
pub const DEFAULT_N: usize = 300;
pub const DEFAULT_NS: [usize; 4] = [50, 100, 200, 400];
pub const DEFAULT_SAMPLES: usize = 4000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const NYSTROM_WINDOW: (f64, f64) = DEFAULT_WINDOW;
pub const NYSTROM_PANELS: usize = DEFAULT_PANELS;
pub const NYSTROM_NODES_PER_PANEL: usize = DEFAULT_NODES_PER_PANEL;
pub const SLACK_COEFFICIENT: f64 = 0.05;
pub const THREADS_ENV: &str = "EDGESTATS_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Mean,
    Variance,
    Compare,
    KernelConverge,
    BwScan,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Mean => "mean",
            Command::Variance => "variance",
            Command::Compare => "compare",
            Command::KernelConverge => "kernel-converge",
            Command::BwScan => "bw-scan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub ensemble: String,
    pub n: usize,
    pub ns: Vec<usize>,
    pub alpha: f64,
    pub f_family: String,
    pub f_params: Vec<f64>,
    pub f_spec: String,
    pub lambda: f64,
    pub gammas: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub output_path: Option<String>,
    pub format: Format,
}

impl RunConfig {
    pub fn kind(&self) -> Result<EnsembleKind, CliError> {
        Ok(EnsembleKind::parse(&self.ensemble, self.alpha)?)
    }

    pub fn test_function(&self) -> Result<TestFunction, CliError> {
        Ok(TestFunction::parse(&self.f_spec)?)
    }

    pub fn quadrature(&self) -> Result<QuadratureSpec, CliError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Validation(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(QuadratureSpec::default().with_tol(self.tol, self.tol))
    }

    /// Splits `family:p1,p2` for the config echo.
    pub fn split_f(spec: &str) -> (String, Vec<f64>) {
        let (family, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let params = rest.split(',').filter_map(|p| p.trim().parse().ok()).collect();
        (family.trim().to_ascii_lowercase(), params)
    }
}
