//! Liu–West shrinkage kernel for the parameters without sufficient statistics.
//!
//! `θ_new ~ N(a θ + (1 − a) θ̄, (1 − a²) V)`. Because `a² + h̃² = 1`, the mixture
//! over the cloud keeps the cloud mean `θ̄` and covariance `V`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::ParticleCloud;
use crate::priors::ThetaPrior;

/// Unweighted mean and `(N − 1)`-denominator covariance of the particle θ's.
pub fn liu_west_moments(cloud: &ParticleCloud) -> (Vec<f64>, DMatrix<f64>) {
    let thetas: Vec<&[f64]> = cloud.particles.iter().map(|p| p.theta.as_slice()).collect();
    theta_moments(&thetas)
}

pub fn theta_moments(thetas: &[&[f64]]) -> (Vec<f64>, DMatrix<f64>) {
    let n = thetas.len();
    let q = thetas.first().map_or(0, |t| t.len());
    let mut mean = vec![0.0; q];
    for th in thetas {
        for (m, v) in mean.iter_mut().zip(th.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::zeros(q, q);
    for th in thetas {
        for i in 0..q {
            let di = th[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (th[j] - mean[j]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..q {
        for j in 0..=i {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mean, cov)
}

/// Lower factor `L` with `L Lᵀ = V`, regularised with `εI` when `V` is singular.
///
/// An exactly zero `V` yields a zero factor, so the kernel collapses to its mean.
pub fn covariance_factor(v: &DMatrix<f64>) -> DMatrix<f64> {
    let q = v.nrows();
    let trace = v.trace();
    if trace == 0.0 {
        return DMatrix::zeros(q, q);
    }
    if let Some(ch) = v.clone().cholesky() {
        return ch.l();
    }
    let mut eps = if trace > 0.0 { 1e-10 * trace / q as f64 } else { 1e-12 };
    for _ in 0..20 {
        let reg = v + DMatrix::identity(q, q) * eps;
        if let Some(ch) = reg.cholesky() {
            return ch.l();
        }
        eps *= 10.0;
    }
    // Not reachable for a symmetric PSD input; fall back to the diagonal.
    DMatrix::from_diagonal(&DVector::from_iterator(q, (0..q).map(|i| v[(i, i)].max(0.0).sqrt())))
}

/// Outcome of one θ proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub theta: Vec<f64>,
    /// Redraw cap reached; `theta` is the pre-kernel value.
    pub exhausted: bool,
}

/// The shrinkage kernel built from one set of cloud moments.
#[derive(Debug, Clone)]
pub struct LiuWestKernel {
    mean: Vec<f64>,
    /// Factor of `h̃² V`.
    factor: DMatrix<f64>,
    a: f64,
}

impl LiuWestKernel {
    pub fn new(mean: Vec<f64>, v: &DMatrix<f64>, a: f64) -> Self {
        let factor = covariance_factor(v) * (1.0 - a * a).sqrt();
        Self { mean, factor, a }
    }

    pub fn from_cloud(cloud: &ParticleCloud, a: f64) -> Self {
        let (mean, v) = liu_west_moments(cloud);
        Self::new(mean, &v, a)
    }

    pub fn shrunk_mean(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.mean)
            .map(|(t, m)| self.a * t + (1.0 - self.a) * m)
            .collect()
    }

    /// One unconstrained draw from the kernel centred at `theta`.
    pub fn draw<R: Rng>(&self, theta: &[f64], rng: &mut R) -> Vec<f64> {
        let q = theta.len();
        let mut out = self.shrunk_mean(theta);
        let z: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..q {
            for j in 0..=i {
                out[i] += self.factor[(i, j)] * z[j];
            }
        }
        out
    }

    /// Draws until the proposal lies in the prior support, at most
    /// `1 + max_redraws` times; otherwise returns `theta` unchanged.
    pub fn propose<R: Rng>(
        &self,
        theta: &[f64],
        prior: &dyn ThetaPrior,
        max_redraws: usize,
        rng: &mut R,
    ) -> Proposal {
        for _ in 0..=max_redraws {
            let cand = self.draw(theta, rng);
            if prior.in_support(&cand) {
                return Proposal {
                    theta: cand,
                    exhausted: false,
                };
            }
        }
        Proposal {
            theta: theta.to_vec(),
            exhausted: true,
        }
    }
}

/// Single proposal from `N(aθ + (1 − a)θ̄, (1 − a²)V)` restricted to the prior support.
pub fn propose_theta<R: Rng>(
    theta: &[f64],
    mean: &[f64],
    v: &DMatrix<f64>,
    a: f64,
    prior: &dyn ThetaPrior,
    rng: &mut R,
) -> Proposal {
    LiuWestKernel::new(mean.to_vec(), v, a).propose(theta, prior, 100, rng)
}
