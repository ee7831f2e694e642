//! Extended Liu–West auxiliary particle filter for the relaxed dynamic model
//!
//! ```text
//! y_i  ~ N(x_i, σ² I)
//! x_i  ~ N(g(x_{i−1}, t; θ_i), u² I)
//! θ_i  ~ N(a θ_{i−1} + (1 − a) θ̄_{i−1}, (1 − a²) V_i)
//! ```
//!
//! θ moves through the Liu–West kernel; the precision `γ = 1/σ²` is updated
//! through its conjugate Gamma statistic. Each particle's randomness comes from
//! its own counter-based stream, so results are bit-identical for any number of
//! rayon workers.

mod cloud;
mod config;
mod kernel;
mod predict;
mod run;
mod weights;

use thiserror::Error;

pub use cloud::{
    init_cloud, sample_gamma, update_suffstat, Particle, ParticleCloud, SufficientStat,
};
pub use config::{FilterConfig, Resampling};
pub use kernel::{
    covariance_factor, liu_west_moments, propose_theta, theta_moments, LiuWestKernel, Proposal,
};
pub use predict::{predict, PredictionBand};
pub use run::{filter_step, refine, run_filter, FilterRun, MarginalSnapshot, StepSummary};
pub use weights::{
    effective_sample_size, log_normal_iso, lookahead_from_prediction, lookahead_log_weight,
    normalize_log_weights, predict_state, propagate_state, propagation_moments, resample_indices,
    resample_normalized,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("invalid filter configuration: {0}")]
    Config(String),
    #[error("proposal set for initial particles is empty")]
    EmptyProposal,
    #[error("all particle weights are zero at step {step} (filter degeneracy)")]
    AllWeightsZero { step: usize },
    #[error("every predicted trajectory became non-finite")]
    AllPredictionsDropped,
}
