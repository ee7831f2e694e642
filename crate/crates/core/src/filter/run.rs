use log::debug;
use rayon::prelude::*;

use super::cloud::{init_cloud, sample_gamma, update_suffstat, Particle, ParticleCloud};
use super::kernel::LiuWestKernel;
use super::weights::{
    effective_sample_size, lookahead_from_prediction, normalize_log_weights, predict_state,
    propagate_state, resample_normalized,
};
use super::{FilterConfig, FilterError};
use crate::diagnostics::quantile_sorted;
use crate::ode::{OdeSystem, Rk4Workspace};
use crate::priors::PriorSpec;
use crate::series::ObservationSeries;
use crate::streams::{Stage, StreamKey};

/// Per-marginal 5 % / 50 % / 95 % quantiles and mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSnapshot {
    pub mean: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

impl MarginalSnapshot {
    fn of(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            q05: quantile_sorted(&values, 0.05),
            q50: quantile_sorted(&values, 0.5),
            q95: quantile_sorted(&values, 0.95),
        }
    }
}

/// What one filter step recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSummary {
    pub index: usize,
    pub time: f64,
    /// ESS of the lookahead weights before resampling.
    pub ess: f64,
    /// Proposals that hit the redraw cap and kept their previous θ.
    pub off_support: usize,
    /// Particles whose prediction was non-finite (weight zero).
    pub dropped: usize,
    /// `θ_1..θ_q, σ²` after the step.
    pub marginals: Vec<MarginalSnapshot>,
}

#[derive(Debug, Clone)]
pub struct FilterRun {
    pub cloud: ParticleCloud,
    pub steps: Vec<StepSummary>,
}

impl FilterRun {
    pub fn off_support_total(&self) -> usize {
        self.steps.iter().map(|s| s.off_support).sum()
    }
}

struct Staged {
    theta: Vec<f64>,
    exhausted: bool,
    prediction: Option<Vec<f64>>,
    log_weight: f64,
}

/// Assimilates `y_next` observed at `t_next`, starting from the cloud at `t_prev`.
///
/// Stages: propose θ, lookahead weight, resample the `(x, θ_new, γ, s)` tuples,
/// draw the next state, update the statistic, draw γ.
#[allow(clippy::too_many_arguments)]
pub fn filter_step(
    cloud: &ParticleCloud,
    y_next: &[f64],
    t_prev: f64,
    t_next: f64,
    sys: &dyn OdeSystem,
    prior: &PriorSpec,
    config: &FilterConfig,
    key: StreamKey,
) -> Result<(ParticleCloud, StepSummary), FilterError> {
    config.validate()?;
    if cloud.len() < 2 {
        return Err(FilterError::Config("a cloud needs at least 2 particles".into()));
    }
    let step = cloud.time_index + 1;
    let h = t_next - t_prev;
    let kernel = LiuWestKernel::from_cloud(cloud, config.a);
    let u2 = config.u2;

    let staged: Vec<Staged> = cloud
        .particles
        .par_iter()
        .enumerate()
        .map_init(
            || Rk4Workspace::new(sys.state_dim()),
            |ws, (j, particle)| {
                let mut rng = key.rng(Stage::Propose, step, j);
                let proposal = kernel.propose(&particle.theta, prior.theta.as_ref(), config.max_redraws, &mut rng);
                let prediction = predict_state(sys, &particle.x, t_prev, h, config.m, &proposal.theta, ws);
                let log_weight = prediction
                    .as_deref()
                    .map_or(f64::NEG_INFINITY, |g| lookahead_from_prediction(g, y_next, particle.gamma, u2));
                Staged {
                    theta: proposal.theta,
                    exhausted: proposal.exhausted,
                    prediction,
                    log_weight: if log_weight.is_nan() { f64::NEG_INFINITY } else { log_weight },
                }
            },
        )
        .collect();

    let log_weights: Vec<f64> = staged.iter().map(|s| s.log_weight).collect();
    let weights = normalize_log_weights(&log_weights).ok_or(FilterError::AllWeightsZero { step })?;
    let ess = effective_sample_size(&weights);
    let ancestors = resample_normalized(
        &weights,
        cloud.len(),
        config.resampling,
        &mut key.rng(Stage::Resample, step, 0),
    );

    let particles: Vec<Particle> = ancestors
        .par_iter()
        .enumerate()
        .map(|(k, &j)| {
            let parent = &cloud.particles[j];
            let st = &staged[j];
            let prediction = st.prediction.as_deref().expect("resampled particles have finite weight");
            let x = propagate_state(prediction, y_next, parent.gamma, u2, &mut key.rng(Stage::Propagate, step, k));
            let suff = update_suffstat(parent.suff, y_next, &x);
            let gamma = sample_gamma(&suff, &mut key.rng(Stage::Precision, step, k));
            Particle {
                x,
                theta: st.theta.clone(),
                gamma,
                suff,
            }
        })
        .collect();

    let next = ParticleCloud::uniform(particles, step);
    let summary = StepSummary {
        index: step,
        time: t_next,
        ess,
        off_support: staged.iter().filter(|s| s.exhausted).count(),
        dropped: staged.iter().filter(|s| s.prediction.is_none()).count(),
        marginals: next.marginals().into_iter().map(MarginalSnapshot::of).collect(),
    };
    debug!(
        "step {step}: ess {:.1}, off-support {}, dropped {}",
        summary.ess, summary.off_support, summary.dropped
    );
    Ok((next, summary))
}

fn run_pass(
    series: &ObservationSeries,
    sys: &dyn OdeSystem,
    prior: &PriorSpec,
    config: &FilterConfig,
    proposal: Option<&[(Vec<f64>, f64)]>,
    key: StreamKey,
) -> Result<FilterRun, FilterError> {
    if series.dim() != 0 && series.dim() != sys.state_dim() {
        return Err(FilterError::Config(format!(
            "observations have dimension {} but model {} has p = {}",
            series.dim(),
            sys.name(),
            sys.state_dim()
        )));
    }
    let mut cloud = init_cloud(sys, prior, config, proposal, key)?;
    let mut steps = Vec::with_capacity(series.len());
    for (i, (t, y)) in series.times().iter().zip(series.values()).enumerate() {
        let (next, summary) = filter_step(&cloud, y, series.previous_time(i), *t, sys, prior, config, key)?;
        cloud = next;
        steps.push(summary);
    }
    Ok(FilterRun { cloud, steps })
}

/// One filter pass over the whole series with particles initialised from the prior.
pub fn run_filter(
    series: &ObservationSeries,
    sys: &dyn OdeSystem,
    prior: &PriorSpec,
    config: &FilterConfig,
) -> Result<FilterRun, FilterError> {
    run_pass(series, sys, prior, config, None, StreamKey::new(config.seed))
}

/// `1 + refine_passes` passes; each later pass starts from the previous pass's
/// final `(θ, γ)` particles with `x0` redrawn from its prior.
pub fn refine(
    series: &ObservationSeries,
    sys: &dyn OdeSystem,
    prior: &PriorSpec,
    config: &FilterConfig,
) -> Result<FilterRun, FilterError> {
    let key = StreamKey::new(config.seed);
    let mut run = run_pass(series, sys, prior, config, None, key)?;
    for pass in 1..=config.refine_passes {
        let proposal = run.cloud.theta_gamma();
        run = run_pass(series, sys, prior, config, Some(&proposal), key.with_pass(pass as u32))?;
    }
    Ok(run)
}
