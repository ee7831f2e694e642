use serde::{Deserialize, Serialize};

use super::FilterError;

/// How ancestors are drawn from the lookahead weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    #[default]
    Systematic,
    Multinomial,
}

/// Tuning of one filter run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// Number of particles `N` (at least 2).
    pub particles: usize,
    /// Relaxation (state-noise) variance `u²`; zero recovers the DEM.
    pub u2: f64,
    /// RK4 sub-segments per observation interval.
    pub m: usize,
    /// Liu–West shrinkage, in `(0, 1)`.
    #[serde(default = "default_shrinkage")]
    pub a: f64,
    #[serde(default)]
    pub seed: u64,
    /// Extra passes started from the previous pass's `(θ, γ)` particles.
    #[serde(default = "default_refine_passes")]
    pub refine_passes: usize,
    #[serde(default)]
    pub resampling: Resampling,
    /// Redraws allowed for an off-support θ proposal before keeping the old θ.
    #[serde(default = "default_max_redraws")]
    pub max_redraws: usize,
}

fn default_shrinkage() -> f64 {
    0.95
}

fn default_refine_passes() -> usize {
    1
}

fn default_max_redraws() -> usize {
    100
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particles: 20_000,
            u2: 1e-5,
            m: 1,
            a: default_shrinkage(),
            seed: 0,
            refine_passes: default_refine_passes(),
            resampling: Resampling::Systematic,
            max_redraws: default_max_redraws(),
        }
    }
}

impl FilterConfig {
    /// Kernel variance factor `h̃² = 1 − a²`.
    pub fn kernel_variance(&self) -> f64 {
        1.0 - self.a * self.a
    }

    /// Discount factor `δ = 1 / (3 − 2a)`; derived only.
    pub fn discount(&self) -> f64 {
        1.0 / (3.0 - 2.0 * self.a)
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if self.particles < 2 {
            return Err(FilterError::Config(format!(
                "at least 2 particles are required, got {}",
                self.particles
            )));
        }
        if !(self.u2 >= 0.0 && self.u2.is_finite()) {
            return Err(FilterError::Config(format!("u2 must be finite and >= 0, got {}", self.u2)));
        }
        if self.m == 0 {
            return Err(FilterError::Config("m must be at least 1".into()));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(FilterError::Config(format!("shrinkage a must lie in (0, 1), got {}", self.a)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants_for_default_shrinkage() {
        let cfg = FilterConfig::default();
        assert!((cfg.kernel_variance() - 0.0975).abs() < 1e-15);
        assert!((cfg.discount() - 0.909).abs() < 1e-3);
        // a = (3δ − 1) / (2δ)
        let d = cfg.discount();
        assert!(((3.0 * d - 1.0) / (2.0 * d) - cfg.a).abs() < 1e-14);
    }

    #[test]
    fn validation() {
        let ok = FilterConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            FilterConfig { particles: 1, ..ok.clone() },
            FilterConfig { u2: -1.0, ..ok.clone() },
            FilterConfig { m: 0, ..ok.clone() },
            FilterConfig { a: 1.0, ..ok.clone() },
            FilterConfig { a: 0.0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
