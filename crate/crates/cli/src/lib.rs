//! Command-line front end: reads spaces and octahedron instances, runs the
//! checks and searches of `quadmetric`, and writes one JSON report per run.
//!
//! Exit codes: 0 when every check passed, 1 when a violation or refusal was
//! found (its certificate is in the report), 2 on input errors.

pub mod commands;
pub mod input;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Epsilon;
pub use report::{Outcome, Report, Status};

#[derive(Debug, Parser)]
#[command(name = "quadmetric", version, about = "Quadratic metric inequality checks and violation search")]
pub struct Cli {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Validate a distance matrix and audit the triangle inequality.
    CheckMetric {
        space: PathBuf,
        /// Mirror the upper triangle onto the lower one.
        #[arg(long)]
        mirror_upper: bool,
    },
    /// Minimize every ⊠ gap exactly and report the worst quadruple.
    CheckBoxtimes {
        space: PathBuf,
        #[arg(long, default_value_t = commands::BOXTIMES_TOL)]
        tol: f64,
        #[arg(long)]
        mirror_upper: bool,
    },
    /// Multistart search for a negative ANN gap.
    SearchAnnViolation {
        space: PathBuf,
        #[arg(long, default_value_t = 100)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long)]
        mirror_upper: bool,
    },
    /// Compute the constants of an octahedron instance (default if omitted).
    BuildLebedeva {
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, conflicts_with = "gamma_grid")]
        gamma: Option<f64>,
        /// Try γ = 2^k for k = -6..=6 and keep the largest C.
        #[arg(long)]
        gamma_grid: bool,
    },
    /// Perturb an instance by ε and run the triangle, ⊠ and search checks.
    VerifyLebedeva {
        #[arg(long)]
        instance: Option<PathBuf>,
        /// ε as a fraction of the computed C, in (0, 1]. Default 1.
        #[arg(long, conflicts_with = "epsilon")]
        epsilon_fraction: Option<f64>,
        /// Absolute ε; may leave the certified range.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 200)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Certify or refuse CAT(0) embeddability of a space with at most five points.
    CertifyUpto5 {
        space: PathBuf,
        #[arg(long)]
        mirror_upper: bool,
    },
    /// Run the seeded random Euclidean suites.
    VerifyEuclidean {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

impl Command {
    pub fn run(&self) -> Outcome {
        match self {
            Command::CheckMetric { space, mirror_upper } => commands::check_metric(space, *mirror_upper),
            Command::CheckBoxtimes { space, tol, mirror_upper } => commands::check_boxtimes_cmd(space, *tol, *mirror_upper),
            Command::SearchAnnViolation { space, restarts, seed, tol, mirror_upper } => {
                commands::search_ann_violation(space, *restarts, *seed, *tol, *mirror_upper)
            }
            Command::BuildLebedeva { instance, gamma, gamma_grid } => {
                commands::build_lebedeva(instance.as_deref(), *gamma, *gamma_grid)
            }
            Command::VerifyLebedeva { instance, epsilon_fraction, epsilon, restarts, seed } => {
                let eps = match (epsilon_fraction, epsilon) {
                    (_, Some(e)) => Epsilon::Absolute(*e),
                    (Some(f), None) => Epsilon::Fraction(*f),
                    (None, None) => Epsilon::Fraction(1.0),
                };
                commands::verify_lebedeva(instance.as_deref(), eps, *restarts, *seed)
            }
            Command::CertifyUpto5 { space, mirror_upper } => commands::certify_upto5(space, *mirror_upper),
            Command::VerifyEuclidean { count, dim, seed } => commands::verify_euclidean(*count, *dim, *seed),
        }
    }
}
