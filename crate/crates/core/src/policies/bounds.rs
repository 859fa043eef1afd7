//! Known problem bounds and the exploration coefficients built from them.

use serde::{Deserialize, Serialize};

use crate::action_space::ActionSet;
use crate::error::{Error, Result};
use crate::linalg;
use crate::lti_env::{DlbSystem, DEFAULT_POWER_CUTOFF};

/// Bounds the learner is assumed to know: `ρ̄ ≥ ρ(A)`, `Φ̄ ≥ Φ(A)`, `‖θ‖ ≤ Θ`,
/// `‖ω‖ ≤ Ω`, `‖B‖ ≤ B`, `‖u‖ ≤ U`, `‖x‖ ≤ X`, plus the ridge regularizer and
/// the confidence level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub rho_bar: f64,
    pub phi_bar: f64,
    pub theta_bound: f64,
    pub omega_bound: f64,
    pub input_bound: f64,
    pub action_bound: f64,
    pub state_bound: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub delta: f64,
}

/// The three constants shared by the confidence radius and the exploration
/// coefficient: `c₁`, `c₂` and the inflated variance proxy `σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceConstants {
    pub c1: f64,
    pub c2: f64,
    pub sigma2: f64,
}

impl ConfidenceConstants {
    #[allow(clippy::too_many_arguments)]
    pub fn new(rho: f64, phi: f64, theta: f64, omega: f64, input: f64, action: f64, state: f64, sigma: f64) -> Self {
        let gain = 1.0 / (1.0 - rho);
        Self {
            c1: action * omega * phi * (action * input * gain + state),
            c2: theta + omega * input * phi * gain,
            sigma2: sigma * sigma * (1.0 + omega * omega * phi * phi / (1.0 - rho * rho)),
        }
    }

    /// Constants of the true system (true ρ(A) and Φ(A)).
    pub fn from_system(system: &DlbSystem, actions: &ActionSet) -> Result<Self> {
        let stats = system.spectral_stats(DEFAULT_POWER_CUTOFF)?;
        let norms = SystemNorms::new(system, actions, stats.rho, stats.phi);
        Ok(Self::new(
            stats.rho,
            stats.phi,
            norms.theta,
            norms.omega,
            norms.input,
            norms.action,
            norms.state,
            system.sigma(),
        ))
    }
}

struct SystemNorms {
    theta: f64,
    omega: f64,
    input: f64,
    action: f64,
    state: f64,
}

impl SystemNorms {
    fn new(system: &DlbSystem, actions: &ActionSet, rho: f64, phi: f64) -> Self {
        let input = linalg::spectral_norm(system.b());
        let action = actions.max_norm();
        Self {
            theta: system.theta().norm(),
            omega: system.omega().norm(),
            input,
            action,
            state: state_bound(phi, rho, system.initial_state().norm(), input, action),
        }
    }
}

/// Bound on the noise-free state norm: `Φ‖x₁‖ + Φ B U / (1 − ρ)`.
pub fn state_bound(phi: f64, rho: f64, x1_norm: f64, input: f64, action: f64) -> f64 {
    phi * x1_norm + phi * input * action / (1.0 - rho)
}

impl BoundsConfig {
    /// Exact bounds read off the system. `rho_bar` replaces ρ(A) in the
    /// algorithm-side constants when given (possibly misspecified).
    pub fn from_system(
        system: &DlbSystem,
        actions: &ActionSet,
        lambda: f64,
        delta: f64,
        rho_bar: Option<f64>,
    ) -> Result<Self> {
        let stats = system.spectral_stats(DEFAULT_POWER_CUTOFF)?;
        let norms = SystemNorms::new(system, actions, stats.rho, stats.phi);
        let bounds = Self {
            rho_bar: rho_bar.unwrap_or(stats.rho),
            phi_bar: stats.phi,
            theta_bound: norms.theta,
            omega_bound: norms.omega,
            input_bound: norms.input,
            action_bound: norms.action,
            state_bound: norms.state,
            sigma: system.sigma(),
            lambda,
            delta,
        };
        bounds.validate()?;
        Ok(bounds)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho_bar) {
            return Err(Error::invalid(format!("rho_bar must be in [0,1), got {}", self.rho_bar)));
        }
        if !(self.phi_bar >= 1.0 && self.phi_bar.is_finite()) {
            return Err(Error::invalid(format!("phi_bar must be >= 1, got {}", self.phi_bar)));
        }
        for (name, v) in [
            ("theta_bound", self.theta_bound),
            ("omega_bound", self.omega_bound),
            ("input_bound", self.input_bound),
            ("action_bound", self.action_bound),
            ("state_bound", self.state_bound),
            ("sigma", self.sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be a finite nonnegative number, got {v}")));
            }
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must be in (0,1), got {}", self.delta)));
        }
        Ok(())
    }

    pub fn constants(&self) -> ConfidenceConstants {
        ConfidenceConstants::new(
            self.rho_bar,
            self.phi_bar,
            self.theta_bound,
            self.omega_bound,
            self.input_bound,
            self.action_bound,
            self.state_bound,
            self.sigma,
        )
    }

    fn log_det_bound(&self, d: usize, effective_t: f64) -> f64 {
        let d = d as f64;
        0.5 * d * (1.0 + effective_t * self.action_bound.powi(2) / (d * self.lambda)).ln()
    }

    fn noise_width(&self, sigma2: f64, log_det: f64) -> f64 {
        (2.0 * sigma2 * ((1.0 / self.delta).ln() + log_det)).sqrt()
    }
}

/// `β_t = c̄₁/√λ · ln(e(t+1)) + c̄₂√λ + sqrt(2σ̄²(ln(1/δ) + (d/2) ln(1 + tU²/(dλ))))`.
pub fn exploration_beta(bounds: &BoundsConfig, d: usize, t: u64) -> f64 {
    let c = bounds.constants();
    let t = t as f64;
    let sqrt_lambda = bounds.lambda.sqrt();
    c.c1 / sqrt_lambda * (std::f64::consts::E * (t + 1.0)).ln()
        + c.c2 * sqrt_lambda
        + bounds.noise_width(c.sigma2, bounds.log_det_bound(d, t))
}

/// Lin-UCB coefficient: `β_t` without the state-transient `c̄₁` term.
pub fn linucb_beta(bounds: &BoundsConfig, d: usize, t: u64) -> f64 {
    let c = bounds.constants();
    c.c2 * bounds.lambda.sqrt() + bounds.noise_width(c.sigma2, bounds.log_det_bound(d, t as f64))
}

/// D-LinUCB coefficient: the Lin-UCB form with `t` replaced by the discounted
/// sample mass `(1 − γ^{2t}) / (1 − γ²)`.
pub fn dlinucb_beta(bounds: &BoundsConfig, d: usize, t: u64, gamma: f64) -> f64 {
    let mass = discounted_mass(gamma, t);
    let c = bounds.constants();
    c.c2 * bounds.lambda.sqrt() + bounds.noise_width(c.sigma2, bounds.log_det_bound(d, mass))
}

fn discounted_mass(gamma: f64, t: u64) -> f64 {
    let g2 = gamma * gamma;
    if 1.0 - g2 < 1e-12 {
        t as f64
    } else {
        (1.0 - g2.powf(t as f64)) / (1.0 - g2)
    }
}

/// Self-normalized confidence radius of the ridge estimate: the same shape as
/// [`exploration_beta`] with the true constants and the realized `det(V_t)/λ^d`.
pub fn concentration_radius(c: &ConfidenceConstants, lambda: f64, delta: f64, t: u64, det_ratio: f64) -> f64 {
    let sqrt_lambda = lambda.sqrt();
    c.c1 / sqrt_lambda * (std::f64::consts::E * (t as f64 + 1.0)).ln()
        + c.c2 * sqrt_lambda
        + (2.0 * c.sigma2 * ((1.0 / delta).ln() + 0.5 * det_ratio.ln())).sqrt()
}

/// Reward range half-width for the Exp3 family: `ξ = (Θ + ΩB/(1 − ρ)) U`.
pub fn exp3_scale(theta: f64, omega: f64, input: f64, rho: f64, action: f64) -> f64 {
    (theta + omega * input / (1.0 - rho)) * action
}

/// [`exp3_scale`] evaluated on the true system.
pub fn exp3_scale_of(system: &DlbSystem, actions: &ActionSet) -> f64 {
    exp3_scale(
        system.theta().norm(),
        system.omega().norm(),
        linalg::spectral_norm(system.b()),
        linalg::spectral_radius(system.a()),
        actions.max_norm(),
    )
}
