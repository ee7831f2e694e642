//! Priors for the initial state, the observation precision and the ODE parameters.
//!
//! ```text
//! x0 | λ ~ N_p(μ_x0, c λ⁻¹ I)
//! λ      ~ Gamma(a_λ, b_λ)          (mean a_λ / b_λ)
//! θ      ~ π(θ), independent of (x0, λ)
//! ```

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, Gamma, StandardNormal, Uniform};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PriorError {
    #[error("invalid box: lo[{index}] = {lo} is not below hi[{index}] = {hi}")]
    InvalidBox { index: usize, lo: f64, hi: f64 },
    #[error("box bounds have different lengths ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("invalid hyperparameter {name} = {value}: must be positive and finite")]
    InvalidHyperparameter { name: &'static str, value: f64 },
}

/// Prior over the parameters without a conjugate update.
pub trait ThetaPrior: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;
    /// `−∞` exactly off the support.
    fn log_density(&self, theta: &[f64]) -> f64;
    fn in_support(&self, theta: &[f64]) -> bool {
        self.log_density(theta) > f64::NEG_INFINITY
    }
}

/// Uniform prior on the open box `∏ (lo_j, hi_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
    log_volume: f64,
}

impl UniformBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, PriorError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(PriorError::DimensionMismatch(lo.len(), hi.len()));
        }
        for (index, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l < h) || !l.is_finite() || !h.is_finite() {
                return Err(PriorError::InvalidBox { index, lo: l, hi: h });
            }
        }
        let log_volume = lo.iter().zip(&hi).map(|(l, h)| (h - l).ln()).sum();
        Ok(Self { lo, hi, log_volume })
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
}

pub fn uniform_box_prior(lo: &[f64], hi: &[f64]) -> Result<UniformBox, PriorError> {
    UniformBox::new(lo.to_vec(), hi.to_vec())
}

impl ThetaPrior for UniformBox {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| loop {
                // the open box excludes the lower face, which `Uniform` can hit
                let v = Uniform::new(l, h).expect("validated box").sample(rng);
                if v > l {
                    break v;
                }
            })
            .collect()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        if self.in_support(theta) {
            -self.log_volume
        } else {
            f64::NEG_INFINITY
        }
    }

    fn in_support(&self, theta: &[f64]) -> bool {
        theta.len() == self.lo.len()
            && theta
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&t, (&l, &h))| t > l && t < h)
    }
}

/// Degenerate prior concentrated on a single parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMass(pub Vec<f64>);

impl ThetaPrior for PointMass {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn sample(&self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.0.clone()
    }
    fn log_density(&self, theta: &[f64]) -> f64 {
        if theta == self.0.as_slice() {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Hyperparameters of the joint prior on `(x0, λ, θ)`.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    pub mu_x0: Vec<f64>,
    pub c: f64,
    pub a_lambda: f64,
    pub b_lambda: f64,
    pub theta: Arc<dyn ThetaPrior>,
}

impl PriorSpec {
    pub fn new(
        mu_x0: Vec<f64>,
        c: f64,
        a_lambda: f64,
        b_lambda: f64,
        theta: Arc<dyn ThetaPrior>,
    ) -> Result<Self, PriorError> {
        for (name, value) in [("c", c), ("a_lambda", a_lambda), ("b_lambda", b_lambda)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(PriorError::InvalidHyperparameter { name, value });
            }
        }
        Ok(Self {
            mu_x0,
            c,
            a_lambda,
            b_lambda,
            theta,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.mu_x0.len()
    }
}

/// `λ ~ Gamma(a_λ, b_λ)` with rate parametrisation.
pub fn sample_lambda(prior: &PriorSpec, rng: &mut dyn RngCore) -> f64 {
    gamma_draw(prior.a_lambda, prior.b_lambda, rng)
}

pub(crate) fn gamma_draw(shape: f64, rate: f64, rng: &mut dyn RngCore) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("shape and rate validated positive")
        .sample(rng)
}

/// `x0 ~ N_p(μ_x0, (c / λ) I)`.
pub fn sample_x0(prior: &PriorSpec, lambda: f64, rng: &mut dyn RngCore) -> Vec<f64> {
    let sd = (prior.c / lambda).sqrt();
    prior
        .mu_x0
        .iter()
        .map(|&mu| {
            let z: f64 = StandardNormal.sample(rng);
            mu + sd * z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

    fn spec(c: f64, a: f64, b: f64, mu: Vec<f64>) -> PriorSpec {
        let q = 2;
        let theta = Arc::new(UniformBox::new(vec![0.0; q], vec![1.0; q]).unwrap());
        PriorSpec::new(mu, c, a, b, theta).unwrap()
    }

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn lambda_exponential_moments() {
        let prior = spec(1.0, 1.0, 1.0, vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_lambda(&prior, &mut rng)).collect();
        let (mean, var) = moments(&draws);
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn lambda_ks_against_gamma_cdf() {
        let prior = spec(1.0, 2.5, 0.7, vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut draws: Vec<f64> = (0..100_000).map(|_| sample_lambda(&prior, &mut rng)).collect();
        draws.sort_by(f64::total_cmp);
        let dist = GammaDist::new(2.5, 0.7).unwrap();
        let n = draws.len() as f64;
        let ks = draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = dist.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS {ks}");
    }

    #[test]
    fn degenerate_x0_prior() {
        let prior = spec(1e-12, 1.0, 1.0, vec![3.0, -2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sample_x0(&prior, 1.0, &mut rng);
        assert!((x[0] - 3.0).abs() < 1e-4 && (x[1] + 2.0).abs() < 1e-4);
    }

    #[test]
    fn x0_covariance_is_isotropic() {
        let (c, lambda) = (2.0, 0.5);
        let prior = spec(c, 1.0, 1.0, vec![0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| sample_x0(&prior, lambda, &mut rng)).collect();
        let mut cov = [[0.0; 2]; 2];
        for d in &draws {
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += d[i] * d[j] / n as f64;
                }
            }
        }
        let target = c / lambda;
        for i in 0..2 {
            assert!((cov[i][i] - target).abs() / target < 0.02, "{cov:?}");
        }
        assert!(cov[0][1].abs() / target < 0.02);
    }

    #[test]
    fn x0_standard_normal_moments() {
        let prior = spec(1.0, 1.0, 1.0, vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_x0(&prior, 1.0, &mut rng)[0]).collect();
        let (mean, var) = moments(&draws);
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn uniform_box_density_and_support() {
        let prior = uniform_box_prior(&[-100.0, 50.0], &[0.0, 150.0]).unwrap();
        let expected = -(100f64.ln() + 100f64.ln());
        assert_eq!(prior.log_density(&[-0.5, 80.0]), expected);
        assert!(!prior.in_support(&[0.0, 80.0]));
        assert_eq!(prior.log_density(&[-100.0, 80.0]), f64::NEG_INFINITY);
        assert_eq!(prior.log_density(&[-0.5, 150.0]), f64::NEG_INFINITY);
        let fhn = uniform_box_prior(&[-0.8, -0.8, 0.0], &[0.8, 0.8, 8.0]).unwrap();
        assert!(fhn.in_support(&[0.2, 0.2, 3.0]));
    }

    #[test]
    fn uniform_box_rejects_inverted_bounds() {
        assert!(matches!(
            uniform_box_prior(&[0.0, 1.0], &[1.0, 1.0]),
            Err(PriorError::InvalidBox { index: 1, .. })
        ));
        assert!(uniform_box_prior(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn hyperparameters_must_be_positive() {
        let theta = Arc::new(PointMass(vec![1.0]));
        assert!(PriorSpec::new(vec![0.0], 0.0, 1.0, 1.0, theta.clone()).is_err());
        assert!(PriorSpec::new(vec![0.0], 1.0, -1.0, 1.0, theta.clone()).is_err());
        assert!(PriorSpec::new(vec![0.0], 1.0, 1.0, f64::NAN, theta).is_err());
    }

    #[test]
    fn samplers_are_reproducible() {
        let prior = spec(1.0, 1.0, 1.0, vec![0.0, 1.0]);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = sample_lambda(&prior, &mut rng);
            (l, sample_x0(&prior, l, &mut rng), prior.theta.sample(&mut rng))
        };
        assert_eq!(draw(9), draw(9));
    }

    proptest::proptest! {
        #[test]
        fn support_iff_finite_density(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let prior = uniform_box_prior(&[-1.0, 0.0], &[1.0, 1.5]).unwrap();
            let th = [a, b];
            proptest::prop_assert_eq!(prior.in_support(&th), prior.log_density(&th) > f64::NEG_INFINITY);
        }
    }
}
