//! Auxiliary-particle-filter pieces: lookahead weights, resampling and the
//! exact conditional draw of the next state.
//!
//! For `x' ~ N(g, u² I)` and `y | x' ~ N(x', σ² I)`:
//!
//! ```text
//! y       | x, θ, γ      ~ N(g, (σ² + u²) I)
//! x'      | x, y, θ, γ   ~ N((y/σ² + g/u²) / (1/σ² + 1/u²), (1/σ² + 1/u²)⁻¹ I)
//! ```

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{FilterError, Resampling};
use crate::ode::{composite_step_in_place, OdeSystem, Rk4Workspace};

/// `log N(y | mean, var · I)`.
pub fn log_normal_iso(y: &[f64], mean: &[f64], var: f64) -> f64 {
    let sq: f64 = y.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * y.len() as f64 * (2.0 * PI * var).ln() - 0.5 * sq / var
}

/// Model prediction `g(x, t; θ)` over one interval, `None` when the drift blows up.
pub fn predict_state(
    sys: &dyn OdeSystem,
    x: &[f64],
    t: f64,
    h: f64,
    m: usize,
    theta: &[f64],
    ws: &mut Rk4Workspace,
) -> Option<Vec<f64>> {
    let mut out = x.to_vec();
    composite_step_in_place(sys, &mut out, t, h, m, theta, ws).ok()?;
    Some(out)
}

/// Lookahead log weight given a precomputed prediction `g`.
pub fn lookahead_from_prediction(prediction: &[f64], y: &[f64], gamma: f64, u2: f64) -> f64 {
    log_normal_iso(y, prediction, 1.0 / gamma + u2)
}

/// `log N(y_next | g(x, t; θ_new), (1/γ + u²) I)`, or `−∞` if the drift is non-finite.
#[allow(clippy::too_many_arguments)]
pub fn lookahead_log_weight(
    sys: &dyn OdeSystem,
    x: &[f64],
    gamma: f64,
    theta_new: &[f64],
    y_next: &[f64],
    t: f64,
    h: f64,
    m: usize,
    u2: f64,
) -> f64 {
    let mut ws = Rk4Workspace::new(x.len());
    match predict_state(sys, x, t, h, m, theta_new, &mut ws) {
        Some(g) => lookahead_from_prediction(&g, y_next, gamma, u2),
        None => f64::NEG_INFINITY,
    }
}

/// Normalised linear weights from log weights (max-subtracted).
pub fn normalize_log_weights(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights
        .iter()
        .copied()
        .filter(|w| !w.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = log_weights
        .iter()
        .map(|&l| if l.is_nan() { 0.0 } else { (l - max).exp() })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Some(w)
}

/// `1 / Σ w²` for normalised weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Ancestor indices drawn with probability proportional to `exp(log_weight)`.
pub fn resample_indices<R: Rng>(
    log_weights: &[f64],
    scheme: Resampling,
    step: usize,
    rng: &mut R,
) -> Result<Vec<usize>, FilterError> {
    let weights = normalize_log_weights(log_weights).ok_or(FilterError::AllWeightsZero { step })?;
    Ok(resample_normalized(&weights, weights.len(), scheme, rng))
}

/// Draws `count` ancestors from normalised `weights`.
pub fn resample_normalized<R: Rng>(
    weights: &[f64],
    count: usize,
    scheme: Resampling,
    rng: &mut R,
) -> Vec<usize> {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    let pick = |u: f64| -> usize {
        let idx = cumulative.partition_point(|&c| c <= u);
        idx.min(last)
    };
    match scheme {
        Resampling::Systematic => {
            let start: f64 = rng.random::<f64>() / count as f64;
            let mut out = Vec::with_capacity(count);
            let mut j = 0;
            for k in 0..count {
                let u = start + k as f64 / count as f64;
                while j < last && cumulative[j] <= u {
                    j += 1;
                }
                out.push(j);
            }
            out
        }
        Resampling::Multinomial => (0..count).map(|_| pick(rng.random::<f64>())).collect(),
    }
}

/// Exact draw of the next state given the observation.
///
/// `u² = 0` returns the prediction unchanged.
pub fn propagate_state<R: Rng>(prediction: &[f64], y: &[f64], gamma: f64, u2: f64, rng: &mut R) -> Vec<f64> {
    if u2 == 0.0 {
        return prediction.to_vec();
    }
    let precision = gamma + 1.0 / u2;
    let sd = precision.recip().sqrt();
    prediction
        .iter()
        .zip(y)
        .map(|(&g, &yk)| {
            let mean = (yk * gamma + g / u2) / precision;
            let z: f64 = rng.sample(StandardNormal);
            mean + sd * z
        })
        .collect()
}

/// Mean and variance of the conditional state draw.
pub fn propagation_moments(prediction: &[f64], y: &[f64], gamma: f64, u2: f64) -> (Vec<f64>, f64) {
    if u2 == 0.0 {
        return (prediction.to_vec(), 0.0);
    }
    let precision = gamma + 1.0 / u2;
    let mean = prediction
        .iter()
        .zip(y)
        .map(|(&g, &yk)| (yk * gamma + g / u2) / precision)
        .collect();
    (mean, 1.0 / precision)
}
