//! Empirical checks of the convergence results: the posterior approaches the
//! DEM posterior as `u² → 0`, and the discretisation error of the likelihood
//! exponent shrinks like `n (h/m)^4`.

use rayon::prelude::*;

use super::stability::run_seeds;
use super::summary::{parameter_names, quantile_sorted, summarize, PosteriorSummary};
use super::wasserstein::wasserstein1;
use super::DiagnosticsError;
use crate::filter::{refine, FilterConfig};
use crate::ode::{integrate, OdeSystem, TimeGrid};
use crate::priors::PriorSpec;
use crate::series::ObservationSeries;

/// Distances of each marginal to a reference, along a u² list.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCurve {
    pub names: Vec<String>,
    pub u2: Vec<f64>,
    /// `[u² entry][seed][marginal]`
    pub distances: Vec<Vec<Vec<f64>>>,
    /// Median over seeds, `[u² entry][marginal]`.
    pub medians: Vec<Vec<f64>>,
    /// `[u² entry][seed]`
    pub summaries: Vec<Vec<PosteriorSummary>>,
}

impl ConvergenceCurve {
    /// Whether the median distance of `marginal` never increases along the list.
    pub fn nonincreasing(&self, marginal: usize) -> bool {
        self.medians.windows(2).all(|w| w[1][marginal] <= w[0][marginal])
    }

    pub fn marginal_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Runs the refined filter for every `u²` and seed, and measures each
/// `θ_1..θ_q, σ²` marginal against `reference` (per-marginal samples).
///
/// Without a reference, each seed is compared with its own run at the last
/// (smallest) `u²` of the list.
pub fn theorem1_convergence_curve(
    series: &ObservationSeries,
    sys: &dyn OdeSystem,
    prior: &PriorSpec,
    reference: Option<&[Vec<f64>]>,
    u2_list: &[f64],
    config: &FilterConfig,
    seeds: usize,
) -> Result<ConvergenceCurve, DiagnosticsError> {
    if u2_list.is_empty() || seeds == 0 {
        return Err(DiagnosticsError::Invalid("need at least one u² and one seed".into()));
    }
    let names = parameter_names(sys.param_dim());
    if let Some(r) = reference {
        if r.len() != names.len() || r.iter().any(Vec::is_empty) {
            return Err(DiagnosticsError::Invalid(format!(
                "reference needs {} non-empty marginals",
                names.len()
            )));
        }
    }
    let seed_list = run_seeds(config.seed, seeds);
    // [u²][seed][marginal] samples
    let mut samples: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(u2_list.len());
    for &u2 in u2_list {
        let per_seed = seed_list
            .par_iter()
            .map(|&seed| {
                let cfg = FilterConfig { u2, seed, ..config.clone() };
                refine(series, sys, prior, &cfg).map(|r| r.cloud.marginals())
            })
            .collect::<Result<Vec<_>, _>>()?;
        samples.push(per_seed);
    }
    let last = samples.len() - 1;
    let distances: Vec<Vec<Vec<f64>>> = samples
        .iter()
        .map(|per_seed| {
            per_seed
                .iter()
                .enumerate()
                .map(|(s, marg)| {
                    marg.iter()
                        .enumerate()
                        .map(|(k, v)| match reference {
                            Some(r) => wasserstein1(v, &r[k]),
                            None => wasserstein1(v, &samples[last][s][k]),
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let medians = distances
        .iter()
        .map(|per_seed| {
            (0..names.len())
                .map(|k| median(&per_seed.iter().map(|d| d[k]).collect::<Vec<_>>()))
                .collect()
        })
        .collect();
    let summaries = samples
        .iter()
        .map(|per_seed| per_seed.iter().map(|m| summarize(&names, m)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConvergenceCurve {
        names,
        u2: u2_list.to_vec(),
        distances,
        medians,
        summaries,
    })
}

/// Data-generating and evaluation points of the discretisation-error experiment.
///
/// Observations are the exact trajectory from `(x0_data, theta_data)`; the
/// residual sums are evaluated along the trajectory from `(x0_eval, theta_eval)`
/// on `t_i = t0 + i T/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem3Setup {
    pub x0_data: Vec<f64>,
    pub theta_data: Vec<f64>,
    pub x0_eval: Vec<f64>,
    pub theta_eval: Vec<f64>,
    pub t0: f64,
    pub horizon: f64,
}

impl Theorem3Setup {
    /// Cooling from 20 toward 80 at rate −0.5, evaluated with ambient 78, over `[0, 15]`.
    pub fn cooling() -> Self {
        Self {
            x0_data: vec![20.0],
            theta_data: vec![-0.5, 80.0],
            x0_eval: vec![20.0],
            theta_eval: vec![-0.5, 78.0],
            t0: 0.0,
            horizon: 15.0,
        }
    }
}

/// Exact solution `x(t0 + s)` from `x0` under `θ`, as a function of elapsed time `s`.
pub type ExactSolution<'a> = &'a (dyn Fn(&[f64], &[f64], f64) -> Vec<f64> + Sync);

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem3Report {
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub delta: Vec<f64>,
    /// Least-squares slope of `ln Δ` against `ln n`.
    pub slope: f64,
    pub intercept: f64,
}

/// `Δ(n) = |Σ‖y_i − x_i‖² − Σ‖y_i − x_iᵐ‖²|` with exact `x_i` and RK4 `x_iᵐ`.
pub fn theorem3_delta(
    sys: &dyn OdeSystem,
    solution: ExactSolution<'_>,
    setup: &Theorem3Setup,
    n: usize,
    m: usize,
) -> Result<f64, DiagnosticsError> {
    let h = setup.horizon / n as f64;
    let grid = TimeGrid::uniform(setup.t0, h, n)?;
    let rk = integrate(sys, &setup.x0_eval, &grid, m, &setup.theta_eval)?;
    let mut total = 0.0;
    for (i, xm) in rk.iter().enumerate() {
        let s = grid.points()[i + 1] - setup.t0;
        let y = solution(&setup.x0_data, &setup.theta_data, s);
        let x = solution(&setup.x0_eval, &setup.theta_eval, s);
        // ‖y − x‖² − ‖y − xᵐ‖² = (xᵐ − x)·(2y − x − xᵐ), without the cancellation
        total += xm
            .iter()
            .zip(&x)
            .zip(&y)
            .map(|((&xm, &x), &y)| (xm - x) * (2.0 * y - x - xm))
            .sum::<f64>();
    }
    Ok(total.abs())
}

/// Fits `ln Δ(n) = slope · ln n + intercept` over `n_list`, with `m = m_rule(n)`.
pub fn theorem3_error_rate(
    sys: &dyn OdeSystem,
    solution: ExactSolution<'_>,
    setup: &Theorem3Setup,
    n_list: &[usize],
    m_rule: &dyn Fn(usize) -> usize,
) -> Result<Theorem3Report, DiagnosticsError> {
    if n_list.iter().any(|&n| n == 0) {
        return Err(DiagnosticsError::Invalid("n must be positive".into()));
    }
    let m: Vec<usize> = n_list.iter().map(|&n| m_rule(n)).collect();
    let delta = n_list
        .iter()
        .zip(&m)
        .map(|(&n, &m)| theorem3_delta(sys, solution, setup, n, m))
        .collect::<Result<Vec<_>, _>>()?;
    let pts: Vec<(f64, f64)> = n_list
        .iter()
        .zip(&delta)
        .filter(|(_, &d)| d > 0.0 && d.is_finite())
        .map(|(&n, &d)| ((n as f64).ln(), d.ln()))
        .collect();
    let distinct = pts.windows(2).any(|w| w[0].0 != w[1].0);
    if pts.len() < 2 || !distinct {
        return Err(DiagnosticsError::DegenerateFit);
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(Theorem3Report {
        n: n_list.to_vec(),
        m,
        delta,
        slope,
        intercept: my - slope * mx,
    })
}

/// Exact cooling trajectory in the [`ExactSolution`] shape.
pub fn cooling_exact(x0: &[f64], theta: &[f64], s: f64) -> Vec<f64> {
    vec![crate::models::cooling_solution(x0[0], theta, s)]
}
