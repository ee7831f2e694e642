//! Run configuration: the TOML file as written by a user, and the fully
//! resolved form that is echoed into every manifest.
//!
//! A manifest parses back as a configuration file, so `rdem <cmd> --config
//! manifest.toml` repeats a run exactly.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::filter::{FilterConfig, Resampling};
use crate::models::model_by_name;
use crate::ode::OdeSystem;
use crate::oracle::GridSpec;
use crate::priors::{PriorSpec, UniformBox};
use crate::series::ObservationSeries;

pub const FIRST_OBSERVATION: &str = "first-observation";

/// `μ_x0`: a fixed vector or the first observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuX0 {
    Keyword(String),
    Value(Vec<f64>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// Present in manifests; informational.
    pub command: Option<String>,
    pub model: String,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub t0: Option<f64>,
    #[serde(default)]
    pub prior: RawPrior,
    #[serde(default)]
    pub filter: RawFilter,
    #[serde(default)]
    pub simulate: RawSimulate,
    #[serde(default)]
    pub predict: RawPredict,
    #[serde(default)]
    pub oracle: RawOracle,
    #[serde(default)]
    pub diagnose: RawDiagnose,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPrior {
    pub mu_x0: Option<MuX0>,
    pub c: Option<f64>,
    pub a_lambda: Option<f64>,
    pub b_lambda: Option<f64>,
    pub theta_lo: Option<Vec<f64>>,
    pub theta_hi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFilter {
    pub particles: Option<usize>,
    pub u2: Option<f64>,
    pub m: Option<usize>,
    pub a: Option<f64>,
    pub refine_passes: Option<usize>,
    pub resampling: Option<Resampling>,
    pub max_redraws: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimulate {
    pub x0: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub sigma2: Option<f64>,
    pub n: Option<usize>,
    pub h: Option<f64>,
    pub m: Option<usize>,
    pub t0: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPredict {
    pub horizon: Option<usize>,
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOracle {
    pub lo: Option<[f64; 2]>,
    pub hi: Option<[f64; 2]>,
    pub points_per_axis: Option<usize>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDiagnose {
    pub ladder: Option<bool>,
    pub u2_ladder: Option<Vec<f64>>,
    pub runs: Option<usize>,
    pub stability_factor: Option<f64>,
    pub theorem1: Option<bool>,
    pub theorem1_seeds: Option<usize>,
    pub theorem1_reference: Option<Reference>,
    pub theorem3: Option<bool>,
    pub theorem3_n: Option<Vec<usize>>,
    pub theorem3_m: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// Exact cooling posterior on the oracle grid.
    Oracle,
    /// Each seed's own run at the smallest u².
    SmallestU2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub mu_x0: MuX0,
    pub c: f64,
    pub a_lambda: f64,
    pub b_lambda: f64,
    pub theta_lo: Vec<f64>,
    pub theta_hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSection {
    pub particles: usize,
    pub u2: f64,
    pub m: usize,
    pub a: f64,
    pub refine_passes: usize,
    pub resampling: Resampling,
    pub max_redraws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub x0: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    pub n: usize,
    pub h: f64,
    pub m: usize,
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictConfig {
    pub horizon: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub points_per_axis: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseConfig {
    pub ladder: bool,
    pub u2_ladder: Vec<f64>,
    pub runs: usize,
    pub stability_factor: f64,
    pub theorem1: bool,
    pub theorem1_seeds: usize,
    pub theorem1_reference: Reference,
    pub theorem3: bool,
    pub theorem3_n: Vec<usize>,
    pub theorem3_m: usize,
}

/// Fully resolved configuration; serialises to a valid configuration file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub model: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    /// Not recorded: where a run writes does not change what it writes.
    #[serde(skip)]
    pub out: PathBuf,
    pub prior: PriorConfig,
    pub filter: FilterSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    pub predict: PredictConfig,
    pub oracle: OracleConfig,
    pub diagnose: DiagnoseConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub particles: Option<usize>,
    pub u2: Option<f64>,
    pub m: Option<usize>,
}

struct ModelDefaults {
    theta_box: Option<(Vec<f64>, Vec<f64>)>,
    c: f64,
    particles: usize,
    u2: f64,
    m: usize,
    simulate: Option<SimulateConfig>,
    ladder: Vec<f64>,
}

fn model_defaults(model: &str) -> Option<ModelDefaults> {
    let ladder = vec![1.0, 0.1, 0.01, 1e-5];
    match model {
        "cooling" => Some(ModelDefaults {
            theta_box: Some((vec![-100.0, 50.0], vec![0.0, 150.0])),
            c: 1.0,
            particles: 20_000,
            u2: 1e-5,
            m: 1,
            simulate: Some(SimulateConfig {
                x0: vec![20.0],
                theta: vec![-0.5, 80.0],
                sigma2: 25.0,
                n: 100,
                h: 0.15,
                m: 16,
                t0: 0.0,
            }),
            ladder,
        }),
        "fitzhugh-nagumo" => Some(ModelDefaults {
            theta_box: Some((vec![-0.8, -0.8, 0.0], vec![0.8, 0.8, 8.0])),
            c: 1.0,
            particles: 20_000,
            u2: 1e-5,
            m: 2,
            simulate: Some(SimulateConfig {
                x0: vec![-1.0, 1.0],
                theta: vec![0.2, 0.2, 3.0],
                sigma2: 0.25,
                n: 100,
                h: 0.2,
                m: 400,
                t0: 0.0,
            }),
            ladder,
        }),
        "lotka-volterra" => Some(ModelDefaults {
            theta_box: None,
            c: 10.0,
            particles: 500_000,
            u2: 5.0,
            m: 2,
            simulate: None,
            ladder: vec![20.0, 10.0, 5.0, 1.0, 1e-5],
        }),
        _ => None,
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Reads and resolves a configuration file.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading config {}: {e}", path.display())))?;
        let raw: RawConfig =
            toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::resolve(raw, &base, overrides)
    }

    /// Applies model defaults and overrides; relative paths are taken from `base`.
    pub fn resolve(raw: RawConfig, base: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let defaults = model_defaults(&raw.model).ok_or_else(|| {
            config_err(format!(
                "unknown model {:?}; expected one of {:?}",
                raw.model,
                crate::models::MODEL_NAMES
            ))
        })?;
        let sys = model_by_name(&raw.model).expect("registry and defaults agree");

        let data = match &raw.data {
            Some(p) => {
                let full = resolve_path(base, p);
                let canon = full
                    .canonicalize()
                    .map_err(|e| CliError::Io(format!("data file {}: {e}", full.display())))?;
                Some(canon)
            }
            None => None,
        };
        let out = match (&overrides.out, &raw.out) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => resolve_path(base, o),
            (None, None) => PathBuf::from("rdem-out"),
        };

        let (lo, hi) = match (&raw.prior.theta_lo, &raw.prior.theta_hi, defaults.theta_box) {
            (Some(lo), Some(hi), _) => (lo.clone(), hi.clone()),
            (None, None, Some(b)) => b,
            (None, None, None) => {
                return Err(config_err(format!(
                    "model {} needs an explicit prior box: set prior.theta_lo and prior.theta_hi",
                    raw.model
                )))
            }
            _ => return Err(config_err("set both prior.theta_lo and prior.theta_hi, or neither")),
        };
        let prior = PriorConfig {
            mu_x0: raw.prior.mu_x0.unwrap_or_else(|| MuX0::Keyword(FIRST_OBSERVATION.into())),
            c: raw.prior.c.unwrap_or(defaults.c),
            a_lambda: raw.prior.a_lambda.unwrap_or(1.0),
            b_lambda: raw.prior.b_lambda.unwrap_or(1.0),
            theta_lo: lo,
            theta_hi: hi,
        };

        let f = &raw.filter;
        let filter = FilterSection {
            particles: overrides.particles.or(f.particles).unwrap_or(defaults.particles),
            u2: overrides.u2.or(f.u2).unwrap_or(defaults.u2),
            m: overrides.m.or(f.m).unwrap_or(defaults.m),
            a: f.a.unwrap_or(0.95),
            refine_passes: f.refine_passes.unwrap_or(1),
            resampling: f.resampling.unwrap_or_default(),
            max_redraws: f.max_redraws.unwrap_or(100),
        };

        let s = &raw.simulate;
        let simulate = match defaults.simulate {
            Some(d) => Some(SimulateConfig {
                x0: s.x0.clone().unwrap_or(d.x0),
                theta: s.theta.clone().unwrap_or(d.theta),
                sigma2: s.sigma2.unwrap_or(d.sigma2),
                n: s.n.unwrap_or(d.n),
                h: s.h.unwrap_or(d.h),
                m: s.m.unwrap_or(d.m),
                t0: s.t0.unwrap_or(d.t0),
            }),
            None => match (&s.x0, &s.theta, s.sigma2, s.n, s.h) {
                (Some(x0), Some(theta), Some(sigma2), Some(n), Some(h)) => Some(SimulateConfig {
                    x0: x0.clone(),
                    theta: theta.clone(),
                    sigma2,
                    n,
                    h,
                    m: s.m.unwrap_or(1),
                    t0: s.t0.unwrap_or(0.0),
                }),
                (None, None, None, None, None) => None,
                _ => {
                    return Err(config_err(format!(
                        "model {} has no default simulation: give simulate.x0, theta, sigma2, n and h",
                        raw.model
                    )))
                }
            },
        };

        let predict = PredictConfig {
            horizon: raw.predict.horizon.unwrap_or(10),
            h: raw.predict.h,
        };
        let g = GridSpec::default();
        let oracle = OracleConfig {
            lo: raw.oracle.lo.unwrap_or(g.lo),
            hi: raw.oracle.hi.unwrap_or(g.hi),
            points_per_axis: raw.oracle.points_per_axis.unwrap_or(g.points_per_axis),
            samples: raw.oracle.samples.unwrap_or(20_000),
        };
        let d = &raw.diagnose;
        let diagnose = DiagnoseConfig {
            ladder: d.ladder.unwrap_or(true),
            u2_ladder: d.u2_ladder.clone().unwrap_or(defaults.ladder),
            runs: d.runs.unwrap_or(3),
            stability_factor: d.stability_factor.unwrap_or(0.5),
            theorem1: d.theorem1.unwrap_or(false),
            theorem1_seeds: d.theorem1_seeds.unwrap_or(10),
            theorem1_reference: d.theorem1_reference.unwrap_or(if raw.model == "cooling" {
                Reference::Oracle
            } else {
                Reference::SmallestU2
            }),
            theorem3: d.theorem3.unwrap_or(false),
            theorem3_n: d.theorem3_n.clone().unwrap_or_else(|| vec![25, 50, 100, 200]),
            theorem3_m: d.theorem3_m.unwrap_or(1),
        };

        let cfg = RunConfig {
            command: None,
            model: raw.model,
            seed: overrides.seed.or(raw.seed).unwrap_or(0),
            data,
            t0: raw.t0,
            out,
            prior,
            filter,
            simulate,
            predict,
            oracle,
            diagnose,
        };
        cfg.validate(sys.as_ref())?;
        Ok(cfg)
    }

    fn validate(&self, sys: &dyn OdeSystem) -> Result<(), CliError> {
        let (p, q) = (sys.state_dim(), sys.param_dim());
        if self.prior.theta_lo.len() != q || self.prior.theta_hi.len() != q {
            return Err(config_err(format!("prior box must have {q} entries for model {}", self.model)));
        }
        self.theta_prior()?;
        match &self.prior.mu_x0 {
            MuX0::Keyword(k) if k == FIRST_OBSERVATION => {}
            MuX0::Keyword(k) => {
                return Err(config_err(format!(
                    "prior.mu_x0 = {k:?}: expected {FIRST_OBSERVATION:?} or an array"
                )))
            }
            MuX0::Value(v) if v.len() != p => {
                return Err(config_err(format!("prior.mu_x0 needs {p} entries")))
            }
            MuX0::Value(_) => {}
        }
        for (name, v) in [("c", self.prior.c), ("a_lambda", self.prior.a_lambda), ("b_lambda", self.prior.b_lambda)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("prior.{name} = {v} must be positive")));
            }
        }
        self.filter_config()
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        if let Some(s) = &self.simulate {
            if s.x0.len() != p || s.theta.len() != q {
                return Err(config_err(format!("simulate.x0 needs {p} and simulate.theta {q} entries")));
            }
            if !(s.sigma2 >= 0.0 && s.h > 0.0 && s.n >= 1 && s.m >= 1) {
                return Err(config_err("simulate needs sigma2 >= 0, h > 0, n >= 1, m >= 1"));
            }
        }
        if self.predict.horizon == 0 {
            return Err(config_err("predict.horizon must be at least 1"));
        }
        if let Some(h) = self.predict.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(config_err("predict.h must be positive"));
            }
        }
        self.grid().validate().map_err(|e| config_err(e.to_string()))?;
        if self.oracle.samples == 0 {
            return Err(config_err("oracle.samples must be positive"));
        }
        let d = &self.diagnose;
        if d.u2_ladder.is_empty() {
            return Err(config_err("diagnose.u2_ladder must not be empty"));
        }
        if d.u2_ladder.windows(2).any(|w| w[1] >= w[0]) || d.u2_ladder.iter().any(|&u| !(u >= 0.0)) {
            return Err(config_err("diagnose.u2_ladder must be nonnegative and strictly descending"));
        }
        if d.runs < 2 {
            return Err(config_err("diagnose.runs must be at least 2"));
        }
        if !(d.stability_factor > 0.0) {
            return Err(config_err("diagnose.stability_factor must be positive"));
        }
        if d.theorem1_seeds == 0 || d.theorem3_m == 0 || d.theorem3_n.iter().any(|&n| n == 0) {
            return Err(config_err("diagnose seeds, theorem3_m and theorem3_n entries must be positive"));
        }
        Ok(())
    }

    pub fn system(&self) -> Box<dyn OdeSystem> {
        model_by_name(&self.model).expect("validated model name")
    }

    pub fn theta_prior(&self) -> Result<UniformBox, CliError> {
        UniformBox::new(self.prior.theta_lo.clone(), self.prior.theta_hi.clone())
            .map_err(|e| config_err(format!("prior box: {e}")))
    }

    /// The prior with `μ_x0` resolved against `series` when needed.
    pub fn prior_spec(&self, series: Option<&ObservationSeries>) -> Result<PriorSpec, CliError> {
        let mu = match &self.prior.mu_x0 {
            MuX0::Value(v) => v.clone(),
            MuX0::Keyword(_) => series
                .and_then(|s| s.values().first().cloned())
                .ok_or_else(|| config_err("prior.mu_x0 = \"first-observation\" needs at least one observation"))?,
        };
        PriorSpec::new(mu, self.prior.c, self.prior.a_lambda, self.prior.b_lambda, Arc::new(self.theta_prior()?))
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn filter_config(&self) -> FilterConfig {
        let f = &self.filter;
        FilterConfig {
            particles: f.particles,
            u2: f.u2,
            m: f.m,
            a: f.a,
            seed: self.seed,
            refine_passes: f.refine_passes,
            resampling: f.resampling,
            max_redraws: f.max_redraws,
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            lo: self.oracle.lo,
            hi: self.oracle.hi,
            points_per_axis: self.oracle.points_per_axis,
        }
    }

    /// Reads the configured data file.
    pub fn load_series(&self) -> Result<ObservationSeries, CliError> {
        let path = self
            .data
            .as_ref()
            .ok_or_else(|| config_err("this command needs a data file (set `data`)"))?;
        let series = ObservationSeries::read_csv_path(path, self.t0).map_err(|e| match e {
            crate::series::SeriesError::Io(e) => CliError::Io(format!("{}: {e}", path.display())),
            other => config_err(format!("{}: {other}", path.display())),
        })?;
        let p = self.system().state_dim();
        if series.dim() != p {
            return Err(config_err(format!(
                "{} has {} observed coordinates but model {} has {p}",
                path.display(),
                series.dim(),
                self.model
            )));
        }
        Ok(series)
    }

    /// Manifest text for `command`.
    pub fn manifest(&self, command: &str) -> String {
        let mut m = self.clone();
        m.command = Some(command.to_string());
        toml::to_string(&m).expect("config serialises")
    }
}
