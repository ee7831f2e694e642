//! Posterior summaries, run-to-run stability, u² selection and empirical
//! convergence checks.

mod stability;
mod summary;
mod theorems;
mod wasserstein;

use thiserror::Error;

use crate::filter::FilterError;
use crate::ode::OdeError;

pub use stability::{
    run_seeds, stability_check, stability_of_clouds, u2_ladder, LadderEntry, LadderReport,
    MarginalStability, StabilityReport, Threshold,
};
pub use summary::{
    parameter_names, quantile, quantile_sorted, summarize, weighted_quantile, ParameterSummary,
    PosteriorSummary, MIN_SUMMARY_SAMPLES,
};
pub use theorems::{
    cooling_exact, theorem1_convergence_curve, theorem3_delta, theorem3_error_rate,
    ConvergenceCurve, ExactSolution, Theorem3Report, Theorem3Setup,
};
pub use wasserstein::{wasserstein1, wasserstein1_sorted, wasserstein1_sorted_equal};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("{0}")]
    Invalid(String),
    #[error("summaries need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("error-rate fit is degenerate: Δ vanished or was non-finite at all but one n")]
    DegenerateFit,
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}
