//! Parameters, state, and vector fields of the model
//!
//! ```text
//! dS/dt = lambda - mu*S - beta*S*I/(1 + gamma*S)
//! dI/dt = -(mu + mu')*I + beta*S*I/(1 + gamma*S) - alpha*I/(1 + rho*I)
//! dR/dt = -mu*R + alpha*I/(1 + rho*I)
//! ```
//!
//! studied over the invariant domain
//! `Omega = { (S,I,R) >= 0 : 0 < S+I+R <= lambda/mu }`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default absolute tolerance for domain-membership checks. Adaptive
/// integration produces boundary-grazing states, so exact comparisons
/// are not usable.
pub const DEFAULT_DOMAIN_TOL: f64 = 1e-9;

/// The seven model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawParams")]
pub struct ModelParams {
    /// Incidence coefficient (per individual per time), > 0.
    pub beta: f64,
    /// Entrance rate (individuals / time), > 0.
    pub lambda: f64,
    /// Baseline exit rate (1 / time), > 0.
    pub mu: f64,
    /// Excess infected exit rate (1 / time), > 0.
    pub mu_prime: f64,
    /// Recovery coefficient (1 / time), > 0.
    pub alpha: f64,
    /// Bed-occupancy rate, dimensionless in [0, 1].
    pub rho: f64,
    /// Cautiousness level, dimensionless in [0, 1].
    pub gamma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    beta: f64,
    lambda: f64,
    mu: f64,
    mu_prime: f64,
    alpha: f64,
    rho: f64,
    gamma: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ModelParams::new(r.beta, r.lambda, r.mu, r.mu_prime, r.alpha, r.rho, r.gamma)
    }
}

impl ModelParams {
    /// Validates the domain constraints and builds the parameter set.
    pub fn new(
        beta: f64,
        lambda: f64,
        mu: f64,
        mu_prime: f64,
        alpha: f64,
        rho: f64,
        gamma: f64,
    ) -> Result<Self> {
        let all = [beta, lambda, mu, mu_prime, alpha, rho, gamma];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        for (name, v) in [
            ("beta", beta),
            ("lambda", lambda),
            ("mu", mu),
            ("mu_prime", mu_prime),
            ("alpha", alpha),
        ] {
            if v <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidInput(format!("rho must be in [0,1], got {rho}")));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidInput(format!(
                "gamma must be in [0,1], got {gamma}"
            )));
        }
        Ok(Self { beta, lambda, mu, mu_prime, alpha, rho, gamma })
    }

    /// Paper parameter set: beta=0.05, lambda=10, mu=0.01, mu'=0.1,
    /// alpha=0.2, rho=0.1, with the given cautiousness level.
    pub fn reference(gamma: f64) -> Result<Self> {
        Self::new(0.05, 10.0, 0.01, 0.1, 0.2, 0.1, gamma)
    }

    /// Same parameter set with a different `gamma`.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.beta, self.lambda, self.mu, self.mu_prime, self.alpha, self.rho, gamma)
    }

    /// Carrying capacity `lambda / mu`, the upper bound on the population size.
    pub fn population_cap(&self) -> f64 {
        self.lambda / self.mu
    }
}

/// Compartment counts at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

impl State {
    pub fn new(s: f64, i: f64, r: f64) -> Self {
        Self { s, i, r }
    }

    pub fn total(&self) -> f64 {
        self.s + self.i + self.r
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.i.is_finite() && self.r.is_finite()
    }
}

/// Rates of change of the three compartments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDerivative {
    pub ds: f64,
    pub di: f64,
    pub dr: f64,
}

/// Saturated incidence `beta*S*I/(1 + gamma*S)`.
#[inline]
pub(crate) fn incidence(p: &ModelParams, s: f64, i: f64) -> f64 {
    p.beta * s * i / (1.0 + p.gamma * s)
}

/// Saturated recovery `alpha*I/(1 + rho*I)`.
#[inline]
pub(crate) fn recovery(p: &ModelParams, i: f64) -> f64 {
    p.alpha * i / (1.0 + p.rho * i)
}

/// Right-hand side of the full three-compartment system.
pub fn rhs_full(p: &ModelParams, s: &State) -> Result<StateDerivative> {
    if !s.is_finite() {
        return Err(Error::InvalidInput("non-finite state component".into()));
    }
    let inc = incidence(p, s.s, s.i);
    let rec = recovery(p, s.i);
    Ok(StateDerivative {
        ds: p.lambda - p.mu * s.s - inc,
        di: -(p.mu + p.mu_prime) * s.i + inc - rec,
        dr: -p.mu * s.r + rec,
    })
}

/// Right-hand side of the reduced planar system (the first two equations;
/// they do not involve `R`).
pub fn rhs_reduced(p: &ModelParams, s: f64, i: f64) -> Result<(f64, f64)> {
    if !s.is_finite() || !i.is_finite() {
        return Err(Error::InvalidInput("non-finite state component".into()));
    }
    let inc = incidence(p, s, i);
    let rec = recovery(p, i);
    Ok((p.lambda - p.mu * s - inc, -(p.mu + p.mu_prime) * i + inc - rec))
}

/// Unchecked reduced field for use in integrator inner loops.
#[inline]
pub(crate) fn rhs_reduced_raw(p: &ModelParams, s: f64, i: f64) -> (f64, f64) {
    let inc = incidence(p, s, i);
    let rec = recovery(p, i);
    (p.lambda - p.mu * s - inc, -(p.mu + p.mu_prime) * i + inc - rec)
}

/// Membership in the invariant domain `Omega`, up to an absolute tolerance.
pub fn in_domain(p: &ModelParams, s: &State, tol: f64) -> bool {
    let n = s.total();
    s.s >= -tol && s.i >= -tol && s.r >= -tol && n > 0.0 && n <= p.population_cap() + tol
}
