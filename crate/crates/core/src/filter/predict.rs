use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{FilterConfig, FilterError, ParticleCloud};
use crate::diagnostics::weighted_quantile;
use crate::ode::{composite_step_in_place, OdeSystem, Rk4Workspace};
use crate::streams::{Stage, StreamKey};

/// Posterior predictive quantiles of future observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBand {
    pub times: Vec<f64>,
    /// `[time][coordinate]`
    pub q05: Vec<Vec<f64>>,
    pub q50: Vec<Vec<f64>>,
    pub q95: Vec<Vec<f64>>,
    /// Particles dropped because their trajectory became non-finite.
    pub dropped: usize,
}

impl PredictionBand {
    pub fn width(&self, time: usize, coord: usize) -> f64 {
        self.q95[time][coord] - self.q05[time][coord]
    }
}

/// Simulates each particle forward over `future` (starting at `start_time`),
/// adding `N(0, u² I)` state noise per interval and `N(0, I/γ)` observation
/// noise, then takes weighted 5 / 50 / 95 % quantiles per time and coordinate.
pub fn predict(
    cloud: &ParticleCloud,
    sys: &dyn OdeSystem,
    config: &FilterConfig,
    start_time: f64,
    future: &[f64],
    key: StreamKey,
) -> Result<PredictionBand, FilterError> {
    if future.is_empty() {
        return Err(FilterError::Config("prediction horizon must be at least 1".into()));
    }
    let mut prev = start_time;
    for &t in future {
        if t <= prev {
            return Err(FilterError::Config("future times must increase past the last observation".into()));
        }
        prev = t;
    }
    let p = sys.state_dim();
    let u_sd = config.u2.sqrt();

    let paths: Vec<Option<Vec<Vec<f64>>>> = cloud
        .particles
        .par_iter()
        .enumerate()
        .map_init(
            || Rk4Workspace::new(p),
            |ws, (j, particle)| {
                let mut rng = key.rng(Stage::Predict, 0, j);
                let obs_sd = particle.gamma.recip().sqrt();
                let mut x = particle.x.clone();
                let mut t = start_time;
                let mut out = Vec::with_capacity(future.len());
                for &t_next in future {
                    composite_step_in_place(sys, &mut x, t, t_next - t, config.m, &particle.theta, ws).ok()?;
                    for xi in x.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *xi += u_sd * z;
                    }
                    let y: Vec<f64> = x
                        .iter()
                        .map(|&xi| {
                            let z: f64 = rng.sample(StandardNormal);
                            xi + obs_sd * z
                        })
                        .collect();
                    if y.iter().any(|v| !v.is_finite()) {
                        return None;
                    }
                    out.push(y);
                    t = t_next;
                }
                Some(out)
            },
        )
        .collect();

    let kept: Vec<(usize, &Vec<Vec<f64>>)> = paths
        .iter()
        .enumerate()
        .filter_map(|(j, p)| p.as_ref().map(|p| (j, p)))
        .collect();
    let dropped = paths.len() - kept.len();
    if kept.is_empty() {
        return Err(FilterError::AllPredictionsDropped);
    }
    let weights: Vec<f64> = kept.iter().map(|(j, _)| cloud.weights[*j]).collect();

    let mut band = PredictionBand {
        times: future.to_vec(),
        q05: Vec::with_capacity(future.len()),
        q50: Vec::with_capacity(future.len()),
        q95: Vec::with_capacity(future.len()),
        dropped,
    };
    for step in 0..future.len() {
        let (mut lo, mut mid, mut hi) = (Vec::new(), Vec::new(), Vec::new());
        for coord in 0..p {
            let values: Vec<f64> = kept.iter().map(|(_, path)| path[step][coord]).collect();
            lo.push(weighted_quantile(&values, &weights, 0.05));
            mid.push(weighted_quantile(&values, &weights, 0.5));
            hi.push(weighted_quantile(&values, &weights, 0.95));
        }
        band.q05.push(lo);
        band.q50.push(mid);
        band.q95.push(hi);
    }
    Ok(band)
}
