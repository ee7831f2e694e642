//! Multi-run stability and the u² ladder.
//!
//! A set of runs is stable when every pairwise 1-Wasserstein distance between
//! their marginal samples stays below a threshold, by default half the pooled
//! posterior standard deviation of that marginal.

use log::info;
use rayon::prelude::*;

use super::summary::parameter_names;
use super::wasserstein::wasserstein1;
use super::DiagnosticsError;
use crate::filter::{refine, FilterConfig, FilterError, ParticleCloud};
use crate::ode::OdeSystem;
use crate::priors::PriorSpec;
use crate::series::ObservationSeries;
use crate::streams::derive_seed;

/// How the per-marginal stability threshold is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// The same absolute distance for every marginal.
    Absolute(f64),
    /// A multiple of the pooled sample standard deviation of each marginal.
    PooledSd(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::PooledSd(0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalStability {
    pub name: String,
    /// Symmetric `R × R` matrix of pairwise distances.
    pub distances: Vec<Vec<f64>>,
    pub max: f64,
    pub threshold: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub marginals: Vec<MarginalStability>,
    pub stable: bool,
}

impl StabilityReport {
    pub fn max_distance(&self) -> f64 {
        self.marginals.iter().map(|m| m.max).fold(0.0, f64::max)
    }
}

fn pooled_sd(samples: &[&[f64]]) -> f64 {
    let n: usize = samples.iter().map(|s| s.len()).sum();
    let mean = samples.iter().flat_map(|s| s.iter()).sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().flat_map(|s| s.iter()).map(|v| (v - mean).powi(2)).sum();
    (ss / (n.max(2) - 1) as f64).sqrt()
}

/// Pairwise distances per marginal; `runs[r][k]` holds run `r`'s samples of marginal `k`.
pub fn stability_check(
    runs: &[Vec<Vec<f64>>],
    names: &[String],
    threshold: Threshold,
) -> Result<StabilityReport, DiagnosticsError> {
    let r = runs.len();
    if r < 2 {
        return Err(DiagnosticsError::Invalid(format!("stability needs at least 2 runs, got {r}")));
    }
    let k = names.len();
    if runs.iter().any(|run| run.len() != k || run.iter().any(Vec::is_empty)) {
        return Err(DiagnosticsError::Invalid(format!(
            "every run needs {k} non-empty marginal sample sets"
        )));
    }
    let marginals: Vec<MarginalStability> = (0..k)
        .map(|m| {
            let mut distances = vec![vec![0.0; r]; r];
            for i in 0..r {
                for j in i + 1..r {
                    let d = wasserstein1(&runs[i][m], &runs[j][m]);
                    distances[i][j] = d;
                    distances[j][i] = d;
                }
            }
            let max = distances.iter().flatten().copied().fold(0.0, f64::max);
            let threshold = match threshold {
                Threshold::Absolute(t) => t,
                Threshold::PooledSd(f) => {
                    let sets: Vec<&[f64]> = runs.iter().map(|run| run[m].as_slice()).collect();
                    f * pooled_sd(&sets)
                }
            };
            MarginalStability {
                name: names[m].clone(),
                stable: max < threshold || max == 0.0,
                distances,
                max,
                threshold,
            }
        })
        .collect();
    let stable = marginals.iter().all(|m| m.stable);
    Ok(StabilityReport { marginals, stable })
}

/// [`stability_check`] over the `θ_1..θ_q, σ²` marginals of final clouds.
pub fn stability_of_clouds(clouds: &[ParticleCloud], threshold: Threshold) -> Result<StabilityReport, DiagnosticsError> {
    let q = clouds
        .first()
        .and_then(|c| c.particles.first())
        .map_or(0, |p| p.theta.len());
    let runs: Vec<Vec<Vec<f64>>> = clouds.iter().map(ParticleCloud::marginals).collect();
    stability_check(&runs, &parameter_names(q), threshold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderEntry {
    pub u2: f64,
    /// `None` when a run degenerated.
    pub report: Option<StabilityReport>,
    pub failure: Option<String>,
}

impl LadderEntry {
    pub fn stable(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.stable)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderReport {
    pub entries: Vec<LadderEntry>,
    pub chosen_u2: f64,
    /// `false` when no entry was stable and the largest u² was returned.
    pub stable: bool,
}

/// Seeds of the `runs` repeated runs derived from one base seed.
pub fn run_seeds(seed: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|r| derive_seed(seed, r)).collect()
}

/// Runs `runs` refined filters at each u² of a descending ladder and picks the
/// smallest u² whose runs agree.
pub fn u2_ladder(
    series: &ObservationSeries,
    sys: &dyn OdeSystem,
    prior: &PriorSpec,
    base: &FilterConfig,
    ladder: &[f64],
    runs: usize,
    threshold: Threshold,
) -> Result<LadderReport, DiagnosticsError> {
    if ladder.is_empty() {
        return Err(DiagnosticsError::Invalid("u² ladder is empty".into()));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(DiagnosticsError::Invalid("u² ladder must be strictly descending".into()));
    }
    if runs < 2 {
        return Err(DiagnosticsError::Invalid(format!("stability needs at least 2 runs, got {runs}")));
    }
    let seeds = run_seeds(base.seed, runs);
    let mut entries = Vec::with_capacity(ladder.len());
    for &u2 in ladder {
        let outcomes: Vec<Result<ParticleCloud, FilterError>> = seeds
            .par_iter()
            .map(|&seed| {
                let cfg = FilterConfig { u2, seed, ..base.clone() };
                refine(series, sys, prior, &cfg).map(|r| r.cloud)
            })
            .collect();
        let mut clouds = Vec::with_capacity(runs);
        let mut failure = None;
        for o in outcomes {
            match o {
                Ok(c) => clouds.push(c),
                Err(e @ FilterError::AllWeightsZero { .. }) => {
                    failure.get_or_insert_with(|| e.to_string());
                }
                Err(e) => return Err(e.into()),
            }
        }
        let report = match failure {
            Some(_) => None,
            None => Some(stability_of_clouds(&clouds, threshold)?),
        };
        let entry = LadderEntry { u2, report, failure };
        info!(
            "u² = {u2}: {}",
            match (&entry.report, &entry.failure) {
                (Some(r), _) => format!("max distance {:.4}, stable {}", r.max_distance(), r.stable),
                (None, Some(f)) => f.clone(),
                _ => unreachable!(),
            }
        );
        entries.push(entry);
    }
    let (chosen_u2, stable) = match entries.iter().rev().find(|e| e.stable()) {
        Some(e) => (e.u2, true),
        None => (ladder[0], false),
    };
    Ok(LadderReport { entries, chosen_u2, stable })
}
