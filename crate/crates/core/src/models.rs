//! Built-in models: Newton's law of cooling, FitzHugh–Nagumo and Lotka–Volterra.

use crate::ode::OdeSystem;

/// Newton's law of cooling, `ẋ = θ1 (x − θ2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cooling;

/// Cooling rate (negative) and ambient temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingParams {
    pub rate: f64,
    pub ambient: f64,
}

impl CoolingParams {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.rate, self.ambient]
    }

    pub fn from_slice(theta: &[f64]) -> Self {
        Self {
            rate: theta[0],
            ambient: theta[1],
        }
    }

    /// Open box `(−100, 0) × (50, 150)`.
    pub fn in_support(&self) -> bool {
        self.rate > -100.0 && self.rate < 0.0 && self.ambient > 50.0 && self.ambient < 150.0
    }
}

impl OdeSystem for Cooling {
    fn name(&self) -> &str {
        "cooling"
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        2
    }
    fn drift(&self, x: &[f64], _t: f64, theta: &[f64], out: &mut [f64]) {
        out[0] = theta[0] * (x[0] - theta[1]);
    }
    fn in_support(&self, theta: &[f64]) -> bool {
        CoolingParams::from_slice(theta).in_support()
    }
}

pub fn cooling_system() -> Cooling {
    Cooling
}

/// Closed form `x(t) = θ2 − (θ2 − x0) e^{θ1 t}`.
pub fn cooling_solution(x0: f64, theta: &[f64], t: f64) -> f64 {
    theta[1] - (theta[1] - x0) * (theta[0] * t).exp()
}

/// FitzHugh–Nagumo spike model with two states and three parameters.
#[derive(Debug, Clone, Copy, Default)]
pub struct FitzHughNagumo;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitzHughNagumoParams {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl FitzHughNagumoParams {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.theta1, self.theta2, self.theta3]
    }

    pub fn from_slice(theta: &[f64]) -> Self {
        Self {
            theta1: theta[0],
            theta2: theta[1],
            theta3: theta[2],
        }
    }

    /// `−0.8 < θ1, θ2 < 0.8` and `0 < θ3 < 8`.
    pub fn in_support(&self) -> bool {
        let inside = |v: f64, lo: f64, hi: f64| v > lo && v < hi;
        inside(self.theta1, -0.8, 0.8) && inside(self.theta2, -0.8, 0.8) && inside(self.theta3, 0.0, 8.0)
    }
}

impl OdeSystem for FitzHughNagumo {
    fn name(&self) -> &str {
        "fitzhugh-nagumo"
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn param_dim(&self) -> usize {
        3
    }
    fn drift(&self, x: &[f64], _t: f64, theta: &[f64], out: &mut [f64]) {
        let (v, r) = (x[0], x[1]);
        out[0] = theta[2] * (v - v * v * v / 3.0 + r);
        out[1] = -(v - theta[0] + theta[1] * r) / theta[2];
    }
    fn in_support(&self, theta: &[f64]) -> bool {
        FitzHughNagumoParams::from_slice(theta).in_support()
    }
}

pub fn fitzhugh_nagumo_system() -> FitzHughNagumo {
    FitzHughNagumo
}

/// Lotka–Volterra predator–prey dynamics; `x1` prey, `x2` predator.
#[derive(Debug, Clone, Copy, Default)]
pub struct LotkaVolterra;

/// Prey growth, predation, predator mortality and predator offspring rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LotkaVolterraParams {
    pub prey_growth: f64,
    pub predation: f64,
    pub predator_mortality: f64,
    pub predator_offspring: f64,
}

impl LotkaVolterraParams {
    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.prey_growth,
            self.predation,
            self.predator_mortality,
            self.predator_offspring,
        ]
    }

    pub fn from_slice(theta: &[f64]) -> Self {
        Self {
            prey_growth: theta[0],
            predation: theta[1],
            predator_mortality: theta[2],
            predator_offspring: theta[3],
        }
    }

    /// Coexistence equilibrium `(θ3/θ4, θ1/θ2)`.
    pub fn coexistence_point(&self) -> [f64; 2] {
        [
            self.predator_mortality / self.predator_offspring,
            self.prey_growth / self.predation,
        ]
    }

    /// First integral `θ4 x1 − θ3 ln x1 + θ2 x2 − θ1 ln x2`, constant along orbits.
    pub fn first_integral(&self, x: &[f64]) -> f64 {
        self.predator_offspring * x[0] - self.predator_mortality * x[0].ln() + self.predation * x[1]
            - self.prey_growth * x[1].ln()
    }
}

impl OdeSystem for LotkaVolterra {
    fn name(&self) -> &str {
        "lotka-volterra"
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn param_dim(&self) -> usize {
        4
    }
    fn drift(&self, x: &[f64], _t: f64, theta: &[f64], out: &mut [f64]) {
        out[0] = x[0] * (theta[0] - theta[1] * x[1]);
        out[1] = -x[1] * (theta[2] - theta[3] * x[0]);
    }
    // Positivity is left to the configured prior box.
    fn in_support(&self, theta: &[f64]) -> bool {
        theta.iter().all(|v| v.is_finite())
    }
}

pub fn lotka_volterra_system() -> LotkaVolterra {
    LotkaVolterra
}

pub const MODEL_NAMES: [&str; 3] = ["cooling", "fitzhugh-nagumo", "lotka-volterra"];

/// Resolves a model by its registry name.
pub fn model_by_name(name: &str) -> Option<Box<dyn OdeSystem>> {
    match name {
        "cooling" => Some(Box::new(Cooling)),
        "fitzhugh-nagumo" => Some(Box::new(FitzHughNagumo)),
        "lotka-volterra" => Some(Box::new(LotkaVolterra)),
        _ => None,
    }
}
