use rand::Rng;
use rayon::prelude::*;

use super::{FilterConfig, FilterError};
use crate::ode::OdeSystem;
use crate::priors::{gamma_draw, sample_lambda, sample_x0, PriorSpec};
use crate::streams::{Stage, StreamKey};

/// Running `(shape, rate)` of the Gamma posterior of the precision γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficientStat {
    pub shape: f64,
    pub rate: f64,
}

impl SufficientStat {
    /// `s_0 = (a_λ + p/2, b_λ + ‖x0 − μ‖² / (2c))`.
    pub fn initial(prior: &PriorSpec, x0: &[f64]) -> Self {
        let sq: f64 = x0.iter().zip(&prior.mu_x0).map(|(x, m)| (x - m) * (x - m)).sum();
        Self {
            shape: prior.a_lambda + 0.5 * x0.len() as f64,
            rate: prior.b_lambda + 0.5 * sq / prior.c,
        }
    }
}

/// Adds one observation: `shape += p/2`, `rate += ‖y − x‖² / 2`.
pub fn update_suffstat(suff: SufficientStat, y: &[f64], x: &[f64]) -> SufficientStat {
    let sq: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
    SufficientStat {
        shape: suff.shape + 0.5 * y.len() as f64,
        rate: suff.rate + 0.5 * sq,
    }
}

/// Draws `γ ~ Gamma(shape, rate)`.
pub fn sample_gamma<R: Rng>(suff: &SufficientStat, rng: &mut R) -> f64 {
    gamma_draw(suff.shape, suff.rate, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    /// Observation precision `γ = 1/σ²`.
    pub gamma: f64,
    pub suff: SufficientStat,
}

impl Particle {
    pub fn sigma2(&self) -> f64 {
        1.0 / self.gamma
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    pub particles: Vec<Particle>,
    pub weights: Vec<f64>,
    /// Number of observations assimilated so far.
    pub time_index: usize,
}

impl ParticleCloud {
    pub fn uniform(particles: Vec<Particle>, time_index: usize) -> Self {
        let n = particles.len();
        Self {
            particles,
            weights: vec![1.0 / n as f64; n],
            time_index,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// `(θ, γ)` pairs, the proposal set for a refinement pass.
    pub fn theta_gamma(&self) -> Vec<(Vec<f64>, f64)> {
        self.particles.iter().map(|p| (p.theta.clone(), p.gamma)).collect()
    }

    /// Column `k` of θ, or σ² when `k == q`.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        self.particles
            .iter()
            .map(|p| if k < p.theta.len() { p.theta[k] } else { p.sigma2() })
            .collect()
    }

    /// All marginals `θ_1..θ_q, σ²`.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let q = self.particles.first().map_or(0, |p| p.theta.len());
        (0..=q).map(|k| self.marginal(k)).collect()
    }

    /// Copies ancestors by index; weights become uniform.
    pub fn resampled(&self, ancestors: &[usize]) -> Self {
        Self::uniform(
            ancestors.iter().map(|&j| self.particles[j].clone()).collect(),
            self.time_index,
        )
    }
}

/// Draws the time-0 cloud.
///
/// Without a proposal, `(θ, γ)` come from the prior; with one, they are taken
/// from the supplied set (index `j` when sizes agree, a uniform draw otherwise).
/// `x0` is always drawn from `N(μ, c/γ · I)` and the statistic is initialised from it.
pub fn init_cloud(
    sys: &dyn OdeSystem,
    prior: &PriorSpec,
    config: &FilterConfig,
    proposal: Option<&[(Vec<f64>, f64)]>,
    key: StreamKey,
) -> Result<ParticleCloud, FilterError> {
    config.validate()?;
    if prior.state_dim() != sys.state_dim() || prior.theta.dim() != sys.param_dim() {
        return Err(FilterError::Config(format!(
            "prior dimensions (p = {}, q = {}) do not match model {} (p = {}, q = {})",
            prior.state_dim(),
            prior.theta.dim(),
            sys.name(),
            sys.state_dim(),
            sys.param_dim()
        )));
    }
    if let Some(set) = proposal {
        if set.is_empty() {
            return Err(FilterError::EmptyProposal);
        }
    }
    let n = config.particles;
    let particles: Vec<Particle> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = key.rng(Stage::Init, 0, j);
            let (theta, gamma) = match proposal {
                Some(set) if set.len() == n => set[j].clone(),
                Some(set) => set[rng.random_range(0..set.len())].clone(),
                None => {
                    let lambda = sample_lambda(prior, &mut rng);
                    (prior.theta.sample(&mut rng), lambda)
                }
            };
            let x = sample_x0(prior, gamma, &mut rng);
            let suff = SufficientStat::initial(prior, &x);
            Particle { x, theta, gamma, suff }
        })
        .collect();
    Ok(ParticleCloud::uniform(particles, 0))
}
