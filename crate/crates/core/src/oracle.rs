//! Exact posterior of Newton's cooling model, used as ground truth.
//!
//! With `x_i = θ2 + (x0 − θ2) e^{θ1 t_i}` the residuals are
//! `y_i − x_i = z_i − x0 e_i`, where `e_i = e^{θ1 t_i}` and
//! `z_i = y_i − θ2 + θ2 e_i`. The exponent of the joint density is then the
//! quadratic `Q(x0) = (x0 − μ)²/c + Σ (z_i − x0 e_i)² = A x0² − 2B x0 + C` and
//!
//! ```text
//! ũ(θ)          = min Q = C − B²/A
//! π(θ | y)      ∝ π(θ) (cA)^{−1/2} (ũ/2 + b)^{−(np/2 + a)}
//! λ | θ, y      ~ Gamma(np/2 + a, ũ/2 + b)
//! ```
//!
//! The `(cA)^{−1/2}` factor comes from integrating `x0` out and depends on θ1.
//! [`CoolingPosterior::log_marginal_without_jacobian`] keeps the form without it
//! for comparison.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::filter::{normalize_log_weights, resample_normalized, Resampling};
use crate::priors::{gamma_draw, PriorSpec, ThetaPrior};
use crate::series::ObservationSeries;
use crate::streams::{Stage, StreamKey};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("observation times are not equally spaced from t0 (interval {index} has length {length}, expected {expected})")]
    NonUniformGrid { index: usize, length: f64, expected: f64 },
    #[error("the exact posterior needs scalar cooling data with two parameters: {0}")]
    Dimension(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("every grid node has zero posterior mass; check the grid box")]
    AllMassZero,
}

/// Regular grid over a box in `(θ1, θ2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub points_per_axis: usize,
}

impl Default for GridSpec {
    /// `[−2, 0] × [70, 90]`, 51 points per axis.
    fn default() -> Self {
        Self {
            lo: [-2.0, 70.0],
            hi: [0.0, 90.0],
            points_per_axis: 51,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.points_per_axis < 2 {
            return Err(OracleError::InvalidGrid(format!(
                "points_per_axis = {} (need at least 2)",
                self.points_per_axis
            )));
        }
        for k in 0..2 {
            if !(self.lo[k].is_finite() && self.hi[k].is_finite() && self.lo[k] < self.hi[k]) {
                return Err(OracleError::InvalidGrid(format!(
                    "axis {}: [{}, {}]",
                    k + 1,
                    self.lo[k],
                    self.hi[k]
                )));
            }
        }
        Ok(())
    }

    pub fn axis(&self, k: usize) -> Vec<f64> {
        let step = (self.hi[k] - self.lo[k]) / (self.points_per_axis - 1) as f64;
        (0..self.points_per_axis)
            .map(|i| {
                if i + 1 == self.points_per_axis {
                    self.hi[k]
                } else {
                    self.lo[k] + i as f64 * step
                }
            })
            .collect()
    }

    /// Nodes in row-major order (θ1 outer).
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        let (a, b) = (self.axis(0), self.axis(1));
        a.iter().flat_map(|&t1| b.iter().map(move |&t2| [t1, t2])).collect()
    }
}

/// Exact marginal posterior machinery for one cooling data set.
#[derive(Debug, Clone)]
pub struct CoolingPosterior {
    mu: f64,
    c: f64,
    a: f64,
    b: f64,
    offsets: Vec<f64>,
    y: Vec<f64>,
    theta_prior: Arc<dyn ThetaPrior>,
}

/// Relative tolerance on the spacing of observation times.
pub const SPACING_TOLERANCE: f64 = 1e-9;

impl CoolingPosterior {
    pub fn new(series: &ObservationSeries, prior: &PriorSpec) -> Result<Self, OracleError> {
        if series.dim() != 1 || prior.state_dim() != 1 || prior.theta.dim() != 2 {
            return Err(OracleError::Dimension(format!(
                "data p = {}, prior p = {}, q = {}",
                series.dim(),
                prior.state_dim(),
                prior.theta.dim()
            )));
        }
        if series.is_empty() {
            return Err(OracleError::Dimension("no observations".into()));
        }
        let t0 = series.t0();
        let times = series.times();
        let h = times[0] - t0;
        for i in 1..times.len() {
            let length = times[i] - times[i - 1];
            if (length - h).abs() > SPACING_TOLERANCE * h.abs() {
                return Err(OracleError::NonUniformGrid { index: i + 1, length, expected: h });
            }
        }
        Ok(Self {
            mu: prior.mu_x0[0],
            c: prior.c,
            a: prior.a_lambda,
            b: prior.b_lambda,
            offsets: times.iter().map(|t| t - t0).collect(),
            y: series.values().iter().map(|v| v[0]).collect(),
            theta_prior: prior.theta.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// `(A, B, C)` of `Q(x0) = A x0² − 2B x0 + C`.
    pub fn quadratic(&self, theta: &[f64]) -> (f64, f64, f64) {
        let (t1, t2) = (theta[0], theta[1]);
        let mut a = 1.0 / self.c;
        let mut b = self.mu / self.c;
        let mut c = self.mu * self.mu / self.c;
        for (&s, &y) in self.offsets.iter().zip(&self.y) {
            let e = (t1 * s).exp();
            let z = y - t2 + t2 * e;
            a += e * e;
            b += z * e;
            c += z * z;
        }
        (a, b, c)
    }

    /// `ũ(θ)`, evaluated as `Q` at its minimiser to avoid cancellation.
    pub fn u_tilde(&self, theta: &[f64]) -> f64 {
        let (a, b, _) = self.quadratic(theta);
        let x0 = b / a;
        let (t1, t2) = (theta[0], theta[1]);
        let mut q = (x0 - self.mu).powi(2) / self.c;
        for (&s, &y) in self.offsets.iter().zip(&self.y) {
            let e = (t1 * s).exp();
            let r = y - t2 + t2 * e - x0 * e;
            q += r * r;
        }
        q
    }

    /// `ũ(θ)` as `C − B²/A`.
    pub fn u_tilde_expanded(&self, theta: &[f64]) -> f64 {
        let (a, b, c) = self.quadratic(theta);
        c - b * b / a
    }

    /// `np/2 + a_λ`.
    pub fn lambda_shape(&self) -> f64 {
        0.5 * self.n() as f64 + self.a
    }

    /// Log marginal posterior of θ up to a constant, `−∞` off the prior support.
    pub fn log_marginal(&self, theta: &[f64]) -> f64 {
        if !self.theta_prior.in_support(theta) {
            return f64::NEG_INFINITY;
        }
        let (a, _, _) = self.quadratic(theta);
        -0.5 * (self.c * a).ln() + self.log_marginal_without_jacobian(theta)
    }

    /// `−(np/2 + a) ln(ũ/2 + b)` on the support, without the `(cA)^{−1/2}` factor.
    pub fn log_marginal_without_jacobian(&self, theta: &[f64]) -> f64 {
        if !self.theta_prior.in_support(theta) {
            return f64::NEG_INFINITY;
        }
        -self.lambda_shape() * (0.5 * self.u_tilde(theta) + self.b).ln()
    }

    /// `λ | θ, y ~ Gamma(np/2 + a, ũ/2 + b)`.
    pub fn sample_lambda<R: Rng>(&self, theta: &[f64], rng: &mut R) -> f64 {
        gamma_draw(self.lambda_shape(), 0.5 * self.u_tilde(theta) + self.b, rng)
    }

    /// Normalised posterior over the grid nodes.
    pub fn grid_posterior(&self, grid: &GridSpec) -> Result<GridPosterior, OracleError> {
        grid.validate()?;
        let nodes = grid.nodes();
        let log_density: Vec<f64> = nodes.par_iter().map(|th| self.log_marginal(th)).collect();
        let probs = normalize_log_weights(&log_density).ok_or(OracleError::AllMassZero)?;
        Ok(GridPosterior { nodes, probs })
    }
}

/// Discrete posterior on grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPosterior {
    pub nodes: Vec<[f64; 2]>,
    pub probs: Vec<f64>,
}

impl GridPosterior {
    pub fn mean(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (node, p) in self.nodes.iter().zip(&self.probs) {
            m[0] += p * node[0];
            m[1] += p * node[1];
        }
        m
    }

    /// Node values drawn with replacement in proportion to their mass.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<[f64; 2]> {
        resample_normalized(&self.probs, n, Resampling::Multinomial, rng)
            .into_iter()
            .map(|k| self.nodes[k])
            .collect()
    }
}

pub fn cooling_u_tilde(theta: &[f64], series: &ObservationSeries, prior: &PriorSpec) -> Result<f64, OracleError> {
    Ok(CoolingPosterior::new(series, prior)?.u_tilde(theta))
}

pub fn cooling_log_marginal_theta(
    theta: &[f64],
    series: &ObservationSeries,
    prior: &PriorSpec,
) -> Result<f64, OracleError> {
    Ok(CoolingPosterior::new(series, prior)?.log_marginal(theta))
}

/// `n_samples` θ draws from the grid posterior.
pub fn grid_sample_theta<R: Rng>(
    series: &ObservationSeries,
    prior: &PriorSpec,
    grid: &GridSpec,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<[f64; 2]>, OracleError> {
    let post = CoolingPosterior::new(series, prior)?.grid_posterior(grid)?;
    Ok(post.sample(n_samples, rng))
}

pub fn sample_lambda_given_theta<R: Rng>(
    theta: &[f64],
    series: &ObservationSeries,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<f64, OracleError> {
    Ok(CoolingPosterior::new(series, prior)?.sample_lambda(theta, rng))
}

/// Joint oracle draws as marginals `[θ1, θ2, σ²]`, `σ² = 1/λ` with `λ | θ` exact.
pub fn oracle_samples(
    series: &ObservationSeries,
    prior: &PriorSpec,
    grid: &GridSpec,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, OracleError> {
    let post = CoolingPosterior::new(series, prior)?;
    let key = StreamKey::new(seed);
    let thetas = post.grid_posterior(grid)?.sample(n_samples, &mut key.rng(Stage::Oracle, 0, 0));
    let sigma2: Vec<f64> = thetas
        .par_iter()
        .enumerate()
        .map(|(j, th)| 1.0 / post.sample_lambda(th, &mut key.rng(Stage::Oracle, 1, j)))
        .collect();
    Ok(vec![
        thetas.iter().map(|t| t[0]).collect(),
        thetas.iter().map(|t| t[1]).collect(),
        sigma2,
    ])
}
