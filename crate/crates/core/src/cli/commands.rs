use std::fs;
use std::path::Path;
use std::time::Instant;

use log::info;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::config::{Reference, RunConfig};
use super::CliError;
use crate::diagnostics::{
    cooling_exact, parameter_names, summarize, theorem1_convergence_curve, theorem3_error_rate,
    u2_ladder, wasserstein1, ConvergenceCurve, LadderReport, PosteriorSummary, Theorem3Report,
    Theorem3Setup, Threshold,
};
use crate::filter::{predict, refine, FilterRun, PredictionBand};
use crate::models::Cooling;
use crate::ode::{integrate, TimeGrid};
use crate::oracle::oracle_samples;
use crate::series::{fmt_f64, ObservationSeries};
use crate::streams::{Stage, StreamKey};

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

fn write_csv(dir: &Path, name: &str, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let path = dir.join(name);
    wtr.write_record(header).map_err(|e| io_err(&path, e))?;
    for row in rows {
        wtr.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(|e| io_err(&path, e))?;
    }
    let bytes = wtr.into_inner().map_err(|e| io_err(&path, e))?;
    write_file(dir, name, &String::from_utf8(bytes).expect("csv output is ASCII"))
}

fn write_manifest(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    write_file(&cfg.out, "manifest.toml", &cfg.manifest(command))
}

fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("report serialises")
}

#[derive(Serialize)]
struct Truth<'a> {
    model: &'a str,
    seed: u64,
    x0: &'a [f64],
    theta: &'a [f64],
    sigma2: f64,
    n: usize,
    h: f64,
    m: usize,
    t0: f64,
}

/// Integrates the configured truth and adds `N(0, σ² I)` observation noise.
pub fn simulate_series(cfg: &RunConfig) -> Result<ObservationSeries, CliError> {
    let sim = cfg.simulate.as_ref().ok_or_else(|| {
        CliError::Config(format!("model {} needs a [simulate] section with the truth", cfg.model))
    })?;
    let sys = cfg.system();
    let grid = TimeGrid::uniform(sim.t0, sim.h, sim.n).map_err(|e| CliError::Config(e.to_string()))?;
    let traj = integrate(sys.as_ref(), &sim.x0, &grid, sim.m, &sim.theta)
        .map_err(|e| CliError::Config(format!("simulated trajectory: {e}")))?;
    let key = StreamKey::new(cfg.seed);
    let sd = sim.sigma2.sqrt();
    let values: Vec<Vec<f64>> = traj
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = key.rng(Stage::Simulate, i + 1, 0);
            x.iter()
                .map(|&xk| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    xk + sd * z
                })
                .collect()
        })
        .collect();
    ObservationSeries::new(sim.t0, grid.points()[1..].to_vec(), values).map_err(|e| CliError::Config(e.to_string()))
}

/// Writes `data.csv`, `truth.toml` and the manifest.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let series = simulate_series(cfg)?;
    let sim = cfg.simulate.as_ref().expect("checked in simulate_series");
    let mut buf = Vec::new();
    series
        .write_csv(&mut buf)
        .map_err(|e| io_err(&cfg.out.join("data.csv"), e))?;
    write_file(&cfg.out, "data.csv", &String::from_utf8(buf).expect("ASCII"))?;
    let truth = Truth {
        model: &cfg.model,
        seed: cfg.seed,
        x0: &sim.x0,
        theta: &sim.theta,
        sigma2: sim.sigma2,
        n: sim.n,
        h: sim.h,
        m: sim.m,
        t0: sim.t0,
    };
    write_file(&cfg.out, "truth.toml", &to_toml(&truth))?;
    write_manifest(cfg, "simulate")?;
    info!("wrote {} observations to {}", series.len(), cfg.out.join("data.csv").display());
    Ok(())
}

fn fit_run(cfg: &RunConfig, series: &ObservationSeries) -> Result<FilterRun, CliError> {
    let sys = cfg.system();
    let prior = cfg.prior_spec(Some(series))?;
    let start = Instant::now();
    let run = refine(series, sys.as_ref(), &prior, &cfg.filter_config())?;
    info!(
        "filter: {} particles, {} pass(es), {:.2} s, {} off-support proposals",
        cfg.filter.particles,
        1 + cfg.filter.refine_passes,
        start.elapsed().as_secs_f64(),
        run.off_support_total()
    );
    Ok(run)
}

fn summary_text(cfg: &RunConfig, series: &ObservationSeries, run: &FilterRun, summary: &PosteriorSummary) -> String {
    format!(
        "model = \"{}\"\nobservations = {}\nparticles = {}\noff_support_proposals = {}\n\n{}",
        cfg.model,
        series.len(),
        cfg.filter.particles,
        run.off_support_total(),
        summary.to_text()
    )
}

/// Writes `samples.csv`, `summary.toml`, `steps.csv` and the manifest.
pub fn cmd_fit(cfg: &RunConfig) -> Result<PosteriorSummary, CliError> {
    let series = cfg.load_series()?;
    let run = fit_run(cfg, &series)?;
    let names = parameter_names(cfg.system().param_dim());
    let marginals = run.cloud.marginals();
    let summary = summarize(&names, &marginals)?;

    let n = run.cloud.len();
    write_csv(&cfg.out, "samples.csv", &names, (0..n).map(|j| marginals.iter().map(|m| m[j]).collect()))?;
    write_file(&cfg.out, "summary.toml", &summary_text(cfg, &series, &run, &summary))?;

    let mut header: Vec<String> = ["step", "t", "ess", "off_support", "dropped"].map(String::from).to_vec();
    for name in &names {
        for stat in ["mean", "q05", "q50", "q95"] {
            header.push(format!("{name}_{stat}"));
        }
    }
    write_csv(
        &cfg.out,
        "steps.csv",
        &header,
        run.steps.iter().map(|s| {
            let mut row = vec![s.index as f64, s.time, s.ess, s.off_support as f64, s.dropped as f64];
            for m in &s.marginals {
                row.extend([m.mean, m.q05, m.q50, m.q95]);
            }
            row
        }),
    )?;
    write_manifest(cfg, "fit")?;
    eprint!("{}", summary.to_table());
    Ok(summary)
}

/// Future observation times `t_n + k h`, `k = 1..horizon`.
pub fn future_times(cfg: &RunConfig, series: &ObservationSeries) -> Vec<f64> {
    let last = *series.times().last().expect("non-empty series");
    let h = cfg
        .predict
        .h
        .unwrap_or_else(|| last - series.previous_time(series.len() - 1));
    (1..=cfg.predict.horizon).map(|k| last + k as f64 * h).collect()
}

fn band_header(p: usize) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    for k in 1..=p {
        for q in ["q05", "q50", "q95"] {
            header.push(if p == 1 { q.to_string() } else { format!("y{k}_{q}") });
        }
    }
    header
}

/// Writes `band.csv` and the manifest.
pub fn cmd_predict(cfg: &RunConfig) -> Result<PredictionBand, CliError> {
    let series = cfg.load_series()?;
    if series.is_empty() {
        return Err(CliError::Config("prediction needs at least one observation".into()));
    }
    let run = fit_run(cfg, &series)?;
    let sys = cfg.system();
    let future = future_times(cfg, &series);
    let last = *series.times().last().expect("non-empty");
    let band = predict(
        &run.cloud,
        sys.as_ref(),
        &cfg.filter_config(),
        last,
        &future,
        StreamKey::new(cfg.seed),
    )?;
    if band.dropped > 0 {
        info!("{} particles dropped from the prediction (non-finite trajectory)", band.dropped);
    }
    let p = sys.state_dim();
    write_csv(
        &cfg.out,
        "band.csv",
        &band_header(p),
        band.times.iter().enumerate().map(|(k, &t)| {
            let mut row = vec![t];
            for c in 0..p {
                row.extend([band.q05[k][c], band.q50[k][c], band.q95[k][c]]);
            }
            row
        }),
    )?;
    write_manifest(cfg, "predict")?;
    Ok(band)
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalComparison {
    pub name: String,
    pub wasserstein: f64,
    pub rdem_mean: f64,
    pub rdem_q05: f64,
    pub rdem_q50: f64,
    pub rdem_q95: f64,
    pub rdem_sd: f64,
    pub oracle_mean: f64,
    pub oracle_q05: f64,
    pub oracle_q50: f64,
    pub oracle_q95: f64,
    pub oracle_sd: f64,
    /// The filter posterior is wider than the exact one.
    pub rdem_variance_exceeds_oracle: bool,
    pub oracle_mean_in_rdem_interval: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub marginals: Vec<MarginalComparison>,
}

/// Side-by-side summaries and Wasserstein distances of two sample sets.
pub fn compare_samples(names: &[String], rdem: &[Vec<f64>], oracle: &[Vec<f64>]) -> Result<Comparison, CliError> {
    let a = summarize(names, rdem)?;
    let b = summarize(names, oracle)?;
    let marginals = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let (r, o) = (&a.parameters[k], &b.parameters[k]);
            MarginalComparison {
                name: name.clone(),
                wasserstein: wasserstein1(&rdem[k], &oracle[k]),
                rdem_mean: r.mean,
                rdem_q05: r.q05,
                rdem_q50: r.median,
                rdem_q95: r.q95,
                rdem_sd: r.sd,
                oracle_mean: o.mean,
                oracle_q05: o.q05,
                oracle_q50: o.median,
                oracle_q95: o.q95,
                oracle_sd: o.sd,
                rdem_variance_exceeds_oracle: r.sd >= o.sd,
                oracle_mean_in_rdem_interval: r.q05 <= o.mean && o.mean <= r.q95,
            }
        })
        .collect();
    Ok(Comparison { marginals })
}

fn require_cooling(cfg: &RunConfig, what: &str) -> Result<(), CliError> {
    if cfg.model == "cooling" {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} exists only for the cooling model, not {}", cfg.model)))
    }
}

/// Writes `comparison.toml`, `samples.csv`, `oracle_samples.csv` and the manifest.
pub fn cmd_compare_oracle(cfg: &RunConfig) -> Result<Comparison, CliError> {
    require_cooling(cfg, "the exact posterior")?;
    let series = cfg.load_series()?;
    let run = fit_run(cfg, &series)?;
    let prior = cfg.prior_spec(Some(&series))?;
    let oracle = oracle_samples(&series, &prior, &cfg.grid(), cfg.oracle.samples, cfg.seed)?;
    let names = parameter_names(2);
    let rdem = run.cloud.marginals();
    let cmp = compare_samples(&names, &rdem, &oracle)?;

    write_csv(&cfg.out, "samples.csv", &names, (0..rdem[0].len()).map(|j| rdem.iter().map(|m| m[j]).collect()))?;
    write_csv(
        &cfg.out,
        "oracle_samples.csv",
        &names,
        (0..oracle[0].len()).map(|j| oracle.iter().map(|m| m[j]).collect()),
    )?;
    write_file(&cfg.out, "comparison.toml", &to_toml(&cmp))?;
    write_manifest(cfg, "compare-oracle")?;
    for m in &cmp.marginals {
        eprintln!(
            "{}: W1 = {:.4}, rdem mean {:.3} ({:.3}, {:.3}), oracle mean {:.3}",
            m.name, m.wasserstein, m.rdem_mean, m.rdem_q05, m.rdem_q95, m.oracle_mean
        );
    }
    Ok(cmp)
}

#[derive(Debug, Clone, Serialize)]
struct MarginalStabilityRecord {
    name: String,
    max: f64,
    threshold: f64,
    stable: bool,
    distances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
struct LadderEntryRecord {
    u2: f64,
    stable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<String>,
    marginals: Vec<MarginalStabilityRecord>,
}

#[derive(Debug, Clone, Serialize)]
struct LadderRecord {
    chosen_u2: f64,
    stable: bool,
    entries: Vec<LadderEntryRecord>,
}

impl From<&LadderReport> for LadderRecord {
    fn from(r: &LadderReport) -> Self {
        Self {
            chosen_u2: r.chosen_u2,
            stable: r.stable,
            entries: r
                .entries
                .iter()
                .map(|e| LadderEntryRecord {
                    u2: e.u2,
                    stable: e.stable(),
                    failure: e.failure.clone(),
                    marginals: e
                        .report
                        .iter()
                        .flat_map(|rep| &rep.marginals)
                        .map(|m| MarginalStabilityRecord {
                            name: m.name.clone(),
                            max: m.max,
                            threshold: m.threshold,
                            stable: m.stable,
                            distances: m.distances.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Theorem1Entry {
    u2: f64,
    median: Vec<f64>,
    /// `[seed][marginal]`
    distances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
struct Theorem1Record {
    reference: Reference,
    names: Vec<String>,
    nonincreasing: Vec<bool>,
    entries: Vec<Theorem1Entry>,
}

impl Theorem1Record {
    fn new(reference: Reference, c: &ConvergenceCurve) -> Self {
        Self {
            reference,
            names: c.names.clone(),
            nonincreasing: (0..c.names.len()).map(|k| c.nonincreasing(k)).collect(),
            entries: c
                .u2
                .iter()
                .enumerate()
                .map(|(i, &u2)| Theorem1Entry {
                    u2,
                    median: c.medians[i].clone(),
                    distances: c.distances[i].clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Theorem3Record {
    n: Vec<usize>,
    m: Vec<usize>,
    delta: Vec<f64>,
    slope: f64,
    intercept: f64,
}

impl From<&Theorem3Report> for Theorem3Record {
    fn from(r: &Theorem3Report) -> Self {
        Self {
            n: r.n.clone(),
            m: r.m.clone(),
            delta: r.delta.clone(),
            slope: r.slope,
            intercept: r.intercept,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
struct DiagnoseRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    ladder: Option<LadderRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem1: Option<Theorem1Record>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem3: Option<Theorem3Record>,
}

/// Runs the enabled checks and writes `diagnose.toml` and the manifest.
pub fn cmd_diagnose(cfg: &RunConfig) -> Result<(), CliError> {
    let d = &cfg.diagnose;
    let sys = cfg.system();
    let mut record = DiagnoseRecord::default();
    if d.ladder || d.theorem1 {
        let series = cfg.load_series()?;
        let prior = cfg.prior_spec(Some(&series))?;
        let base = cfg.filter_config();
        if d.ladder {
            let rep = u2_ladder(
                &series,
                sys.as_ref(),
                &prior,
                &base,
                &d.u2_ladder,
                d.runs,
                Threshold::PooledSd(d.stability_factor),
            )?;
            info!("u² ladder chose {} (stable: {})", rep.chosen_u2, rep.stable);
            record.ladder = Some(LadderRecord::from(&rep));
        }
        if d.theorem1 {
            let reference = match d.theorem1_reference {
                Reference::Oracle => {
                    require_cooling(cfg, "an oracle reference")?;
                    Some(oracle_samples(&series, &prior, &cfg.grid(), cfg.oracle.samples, cfg.seed)?)
                }
                Reference::SmallestU2 => None,
            };
            let curve = theorem1_convergence_curve(
                &series,
                sys.as_ref(),
                &prior,
                reference.as_deref(),
                &d.u2_ladder,
                &base,
                d.theorem1_seeds,
            )?;
            record.theorem1 = Some(Theorem1Record::new(d.theorem1_reference, &curve));
        }
    }
    if d.theorem3 {
        require_cooling(cfg, "the error-rate check")?;
        let m = d.theorem3_m;
        let rep = theorem3_error_rate(&Cooling, &cooling_exact, &Theorem3Setup::cooling(), &d.theorem3_n, &|_| m)?;
        info!("error-rate slope {:.3}", rep.slope);
        record.theorem3 = Some(Theorem3Record::from(&rep));
    }
    write_file(&cfg.out, "diagnose.toml", &to_toml(&record))?;
    write_manifest(cfg, "diagnose")
}
