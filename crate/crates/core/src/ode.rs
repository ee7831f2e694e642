//! Fixed-step classical Runge–Kutta propagation.
//!
//! One observation interval of length `h` is covered by `m` RK4 sub-steps of
//! length `h / m`. Every drift evaluation is checked for finiteness; a
//! non-finite value aborts the step with [`OdeError::NonFiniteDrift`] so that
//! particle filters can map it to a zero weight instead of propagating NaN.

use thiserror::Error;

/// Right-hand side of an autonomous or time-dependent ODE `ẋ = f(x, t; θ)`.
///
/// Implementors must be pure: the same inputs give the same output bits.
pub trait OdeSystem: Send + Sync {
    /// Short registry name, e.g. `"cooling"`.
    fn name(&self) -> &str;

    /// Dimension `p` of the state.
    fn state_dim(&self) -> usize;

    /// Dimension `q` of the parameter vector.
    fn param_dim(&self) -> usize;

    /// Writes `f(x, t; θ)` into `out` (length `p`).
    fn drift(&self, x: &[f64], t: f64, theta: &[f64], out: &mut [f64]);

    /// Natural parameter domain of the model.
    fn in_support(&self, theta: &[f64]) -> bool;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("non-finite drift at t = {t}, x = {x:?}, theta = {theta:?}")]
    NonFiniteDrift {
        t: f64,
        x: Vec<f64>,
        theta: Vec<f64>,
    },
    #[error("integration failed at observation index {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<OdeError>,
    },
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
}

/// Strictly increasing time points `t0 < t1 < … < tn` with `n ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self, OdeError> {
        if points.len() < 2 {
            return Err(OdeError::InvalidGrid(format!(
                "need t0 and at least one further point, got {} points",
                points.len()
            )));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(OdeError::InvalidGrid("non-finite time point".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(OdeError::InvalidGrid(format!(
                "times must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    /// `t_i = t0 + i·h` for `i = 0..=n`.
    pub fn uniform(t0: f64, h: f64, n: usize) -> Result<Self, OdeError> {
        Self::new((0..=n).map(|i| t0 + i as f64 * h).collect())
    }

    /// All points including `t0`.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    /// Number of intervals `n`.
    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h_{i+1} = t_{i+1} − t_i` for `i = 0..n`.
    pub fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.windows(2).map(|w| w[1] - w[0])
    }
}

/// Scratch buffers for one RK4 evaluation chain, sized for state dimension `p`.
#[derive(Debug, Clone)]
pub struct Rk4Workspace {
    buf: Vec<f64>,
    p: usize,
}

impl Rk4Workspace {
    pub fn new(p: usize) -> Self {
        Self {
            buf: vec![0.0; 6 * p],
            p,
        }
    }
}

fn checked_drift(
    sys: &dyn OdeSystem,
    x: &[f64],
    t: f64,
    theta: &[f64],
    out: &mut [f64],
) -> Result<(), OdeError> {
    sys.drift(x, t, theta, out);
    if out.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(OdeError::NonFiniteDrift {
            t,
            x: x.to_vec(),
            theta: theta.to_vec(),
        })
    }
}

/// One RK4 step `x ← x + (k1 + 2k2 + 2k3 + k4)/6`, in place, using `ws`.
pub fn rk4_step_in_place(
    sys: &dyn OdeSystem,
    x: &mut [f64],
    t: f64,
    h: f64,
    theta: &[f64],
    ws: &mut Rk4Workspace,
) -> Result<(), OdeError> {
    let p = ws.p;
    debug_assert_eq!(x.len(), p);
    let (k1, rest) = ws.buf.split_at_mut(p);
    let (k2, rest) = rest.split_at_mut(p);
    let (k3, rest) = rest.split_at_mut(p);
    let (k4, rest) = rest.split_at_mut(p);
    let (tmp, _) = rest.split_at_mut(p);
    let half = 0.5 * h;

    checked_drift(sys, x, t, theta, k1)?;
    k1.iter_mut().for_each(|k| *k *= h);

    for ((s, &xi), &k) in tmp.iter_mut().zip(x.iter()).zip(k1.iter()) {
        *s = xi + 0.5 * k;
    }
    checked_drift(sys, tmp, t + half, theta, k2)?;
    k2.iter_mut().for_each(|k| *k *= h);

    for ((s, &xi), &k) in tmp.iter_mut().zip(x.iter()).zip(k2.iter()) {
        *s = xi + 0.5 * k;
    }
    checked_drift(sys, tmp, t + half, theta, k3)?;
    k3.iter_mut().for_each(|k| *k *= h);

    for ((s, &xi), &k) in tmp.iter_mut().zip(x.iter()).zip(k3.iter()) {
        *s = xi + k;
    }
    checked_drift(sys, tmp, t + h, theta, k4)?;
    k4.iter_mut().for_each(|k| *k *= h);

    for (j, xi) in x.iter_mut().enumerate() {
        *xi += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0;
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(OdeError::NonFiniteDrift {
            t: t + h,
            x: x.to_vec(),
            theta: theta.to_vec(),
        })
    }
}

fn check_step(h: f64, m: usize) -> Result<(), OdeError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(OdeError::InvalidStep(format!("h must be positive, got {h}")));
    }
    if m == 0 {
        return Err(OdeError::InvalidStep("m must be at least 1".into()));
    }
    Ok(())
}

/// Single RK4 step `g(x, t; θ)`.
pub fn rk4_step(
    sys: &dyn OdeSystem,
    x: &[f64],
    t: f64,
    h: f64,
    theta: &[f64],
) -> Result<Vec<f64>, OdeError> {
    check_step(h, 1)?;
    let mut out = x.to_vec();
    let mut ws = Rk4Workspace::new(x.len());
    rk4_step_in_place(sys, &mut out, t, h, theta, &mut ws)?;
    Ok(out)
}

/// `m` chained RK4 steps of length `h / m`, in place.
pub fn composite_step_in_place(
    sys: &dyn OdeSystem,
    x: &mut [f64],
    t: f64,
    h: f64,
    m: usize,
    theta: &[f64],
    ws: &mut Rk4Workspace,
) -> Result<(), OdeError> {
    let sub = h / m as f64;
    for s in 0..m {
        rk4_step_in_place(sys, x, t + s as f64 * sub, sub, theta, ws)?;
    }
    Ok(())
}

/// `m` chained RK4 steps of length `h / m`; `m = 1` is exactly [`rk4_step`].
pub fn composite_step(
    sys: &dyn OdeSystem,
    x: &[f64],
    t: f64,
    h: f64,
    m: usize,
    theta: &[f64],
) -> Result<Vec<f64>, OdeError> {
    check_step(h, m)?;
    let mut out = x.to_vec();
    let mut ws = Rk4Workspace::new(x.len());
    composite_step_in_place(sys, &mut out, t, h, m, theta, &mut ws)?;
    Ok(out)
}

/// Iterated composite steps over `grid`, returning `x_1..x_n`.
pub fn integrate(
    sys: &dyn OdeSystem,
    x0: &[f64],
    grid: &TimeGrid,
    m: usize,
    theta: &[f64],
) -> Result<Vec<Vec<f64>>, OdeError> {
    check_step(1.0, m)?;
    let mut ws = Rk4Workspace::new(x0.len());
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(grid.len());
    for (index, (t, h)) in grid.points().iter().zip(grid.steps()).enumerate() {
        composite_step_in_place(sys, &mut x, *t, h, m, theta, &mut ws).map_err(|e| {
            OdeError::Trajectory {
                index: index + 1,
                source: Box::new(e),
            }
        })?;
        out.push(x.clone());
    }
    Ok(out)
}

/// Closure-backed system, handy for tests and ad-hoc models.
pub struct FnSystem<F> {
    pub name: String,
    pub p: usize,
    pub q: usize,
    pub f: F,
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(&[f64], f64, &[f64], &mut [f64]) + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }
    fn state_dim(&self) -> usize {
        self.p
    }
    fn param_dim(&self) -> usize {
        self.q
    }
    fn drift(&self, x: &[f64], t: f64, theta: &[f64], out: &mut [f64]) {
        (self.f)(x, t, theta, out)
    }
    fn in_support(&self, _theta: &[f64]) -> bool {
        true
    }
}
