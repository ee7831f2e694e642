//! Bayesian parameter inference for ODE regression models.
//!
//! The ODE `ẋ = f(x, t; θ)` observed with Gaussian noise is discretised with a
//! composite RK4 step and relaxed by adding state noise of variance `u²`. The
//! resulting dynamic model is filtered by an extended Liu–West auxiliary
//! particle filter, which moves θ through a shrinkage kernel and updates the
//! observation precision through its conjugate Gamma statistic. As `u² → 0` and
//! the step count `m` grows the posterior approaches that of the ODE model.
//!
//! - [`ode`]: RK4 steps and trajectories
//! - [`models`]: cooling, FitzHugh–Nagumo, Lotka–Volterra
//! - [`priors`]: priors on `(x0, λ, θ)`
//! - [`filter`]: the particle filter, refinement passes and prediction
//! - [`oracle`]: the exact cooling posterior
//! - [`diagnostics`]: summaries, stability, u² selection and convergence checks
//! - [`cli`]: the `rdem` command-line driver

pub mod cli;
pub mod diagnostics;
pub mod filter;
pub mod models;
pub mod ode;
pub mod oracle;
pub mod priors;
pub mod series;
pub mod streams;
