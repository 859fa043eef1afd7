//! Hidden-state linear environment.
//!
//! The state evolves as `x_{t+1} = A x_t + B u_t + ε_t` and the learner only sees
//! the scalar reward `y_t = ⟨ω, x_t⟩ + ⟨θ, u_t⟩ + η_t`. Both noises are zero-mean
//! Gaussian with the same scale σ (the state noise has covariance σ²I).
//!
//! Besides simulation this module exposes the impulse response of the reward
//! (the Markov parameters `h^{s}`), its sum `h` that defines the steady-state
//! value `J(u) = ⟨h, u⟩`, spectral statistics of `A`, and constructors for the
//! special instances used in tests and experiments.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::action_space::ActionSet;
use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::rng::{self, Stream};

/// Default number of powers of `A` inspected when estimating Φ(A).
pub const DEFAULT_POWER_CUTOFF: usize = 200;

/// Radius below which `A` is treated as nilpotent.
const ZERO_RADIUS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DlbSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    omega: DVector<f64>,
    theta: DVector<f64>,
    sigma: f64,
    x1: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralStats {
    pub rho: f64,
    pub phi: f64,
}

impl DlbSystem {
    /// Builds a system, rejecting inconsistent shapes and unstable `A`.
    /// `x1` defaults to the zero state.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        omega: DVector<f64>,
        theta: DVector<f64>,
        sigma: f64,
        x1: Option<DVector<f64>>,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::invalid("state dimension must be positive"));
        }
        check_len("A columns", n, a.ncols())?;
        check_len("B rows", n, b.nrows())?;
        check_len("omega length", n, omega.len())?;
        let d = b.ncols();
        if d == 0 {
            return Err(Error::invalid("action dimension must be positive"));
        }
        check_len("theta length", d, theta.len())?;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(format!("noise scale must be >= 0, got {sigma}")));
        }
        let x1 = x1.unwrap_or_else(|| DVector::zeros(n));
        check_len("initial state length", n, x1.len())?;
        let all_finite = a.iter().chain(b.iter()).chain(omega.iter()).chain(theta.iter()).chain(x1.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("system parameters must be finite"));
        }
        let rho = linalg::spectral_radius(&a);
        if rho >= 1.0 {
            return Err(Error::Unstable { rho });
        }
        Ok(Self {
            a,
            b,
            omega,
            theta,
            sigma,
            x1,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn action_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn omega(&self) -> &DVector<f64> {
        &self.omega
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.x1
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(format!("noise scale must be >= 0, got {sigma}")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn with_initial_state(mut self, x1: DVector<f64>) -> Result<Self> {
        check_len("initial state length", self.state_dim(), x1.len())?;
        self.x1 = x1;
        Ok(self)
    }

    /// Equivalent system under the state change `x' = T x`.
    pub fn transformed(&self, t: &DMatrix<f64>) -> Result<Self> {
        check_len("transform size", self.state_dim(), t.nrows())?;
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("similarity transform is singular".into()))?;
        Self::new(
            t * &self.a * &t_inv,
            t * &self.b,
            t_inv.transpose() * &self.omega,
            self.theta.clone(),
            self.sigma,
            Some(t * &self.x1),
        )
    }

    /// Noise-free reward for state `x` and action `u`.
    pub fn mean_reward(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.omega.dot(x) + self.theta.dot(u)
    }

    /// Plays `action` from `state`: returns the reward generated by the current
    /// state, then moves the state forward one round.
    pub fn step(&self, state: &mut SimState, action: &DVector<f64>) -> Result<f64> {
        check_len("action length", self.action_dim(), action.len())?;
        check_len("hidden state length", self.state_dim(), state.x.len())?;
        let mut y = self.mean_reward(&state.x, action);
        let mut next = &self.a * &state.x + &self.b * action;
        if self.sigma > 0.0 {
            let s = self.sigma * state.noise_sign;
            let eta: f64 = StandardNormal.sample(&mut state.reward_rng);
            y += s * eta;
            for v in next.iter_mut() {
                let eps: f64 = StandardNormal.sample(&mut state.state_rng);
                *v += s * eps;
            }
        }
        state.x = next;
        state.round += 1;
        Ok(y)
    }

    /// `h^{0} = θ`, `h^{s} = Bᵀ (A^{s-1})ᵀ ω` for `s >= 1`.
    pub fn markov_parameter(&self, s: usize) -> DVector<f64> {
        if s == 0 {
            return self.theta.clone();
        }
        // (A^{s-1})ᵀ ω computed as repeated Aᵀ products.
        let mut z = self.omega.clone();
        let at = self.a.transpose();
        for _ in 1..s {
            z = &at * z;
        }
        self.b.transpose() * z
    }

    /// Partial sum `h^{[0,k]} = Σ_{l=0}^{k} h^{l}`.
    pub fn markov_prefix_sum(&self, k: usize) -> DVector<f64> {
        let mut acc = self.theta.clone();
        let at = self.a.transpose();
        let bt = self.b.transpose();
        let mut z = self.omega.clone();
        for _ in 1..=k {
            acc += &bt * &z;
            z = &at * z;
        }
        acc
    }

    /// `h = θ + Bᵀ (I − A)^{-T} ω`.
    pub fn cumulative_markov(&self) -> Result<DVector<f64>> {
        let n = self.state_dim();
        let m = (linalg::identity(n) - &self.a).transpose();
        let z = linalg::solve_square(&m, &self.omega, "cumulative Markov parameter")?;
        Ok(&self.theta + self.b.transpose() * z)
    }

    /// Steady state `(I − A)^{-1} B u` reached under a constant action.
    pub fn steady_state(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("action length", self.action_dim(), u.len())?;
        let n = self.state_dim();
        linalg::solve_square(&(linalg::identity(n) - &self.a), &(&self.b * u), "steady state")
    }

    pub fn spectral_stats(&self, power_cutoff: usize) -> Result<SpectralStats> {
        spectral_stats(&self.a, power_cutoff)
    }
}

/// `J(u) = ⟨h, u⟩`.
pub fn steady_state_reward(h: &DVector<f64>, action: &DVector<f64>) -> Result<f64> {
    check_len("steady-state reward", h.len(), action.len())?;
    Ok(h.dot(action))
}

/// Spectral radius ρ(A) and Φ(A) = max_{τ ≤ cutoff} ‖A^τ‖₂ / ρ^τ.
///
/// The ratio is accumulated on the normalized powers `(A/ρ)^τ` so that it never
/// under- or overflows. For ρ = 0 only the τ = 0 term is kept and Φ = 1.
pub fn spectral_stats(a: &DMatrix<f64>, power_cutoff: usize) -> Result<SpectralStats> {
    if power_cutoff == 0 {
        return Err(Error::invalid("power cutoff must be >= 1"));
    }
    let rho = linalg::spectral_radius(a);
    if rho < ZERO_RADIUS {
        return Ok(SpectralStats { rho: 0.0, phi: 1.0 });
    }
    let scaled = a / rho;
    let mut power = linalg::identity(a.nrows());
    let mut phi: f64 = 1.0;
    for _ in 0..power_cutoff {
        power = &scaled * &power;
        phi = phi.max(linalg::spectral_norm(&power));
    }
    Ok(SpectralStats { rho, phi })
}

/// Mutable simulation state of one run: round counter, hidden state and the
/// two noise streams.
#[derive(Debug, Clone)]
pub struct SimState {
    round: u64,
    x: DVector<f64>,
    state_rng: ChaCha8Rng,
    reward_rng: ChaCha8Rng,
    noise_sign: f64,
}

impl SimState {
    pub fn new(system: &DlbSystem, seed: u64) -> Self {
        Self {
            round: 1,
            x: system.initial_state().clone(),
            state_rng: rng::stream(seed, Stream::StateNoise),
            reward_rng: rng::stream(seed, Stream::RewardNoise),
            noise_sign: 1.0,
        }
    }

    /// Same noise draws as [`SimState::new`] with the sign flipped; used for
    /// antithetic pairs.
    pub fn mirrored(system: &DlbSystem, seed: u64) -> Self {
        Self {
            noise_sign: -1.0,
            ..Self::new(system, seed)
        }
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn hidden_state(&self) -> &DVector<f64> {
        &self.x
    }
}

/// Parameters of the lower-bound instance family: `A = diag(a)` with every
/// `a_i ∈ {ρ, ρ − ε}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HardInstanceParams {
    pub rho: f64,
    pub eps: f64,
    pub a: Vec<f64>,
}

impl HardInstanceParams {
    /// `signs[i] >= 0` selects `a_i = ρ`, a negative sign selects `ρ − ε`.
    pub fn from_signs(rho: f64, eps: f64, signs: &[f64]) -> Self {
        let a = signs
            .iter()
            .map(|&s| if s >= 0.0 { rho } else { rho - eps })
            .collect();
        Self { rho, eps, a }
    }

    pub fn d(&self) -> usize {
        self.a.len()
    }

    fn validate(&self) -> Result<()> {
        if self.a.is_empty() {
            return Err(Error::invalid("hard instance needs d >= 1"));
        }
        if !(0.0 <= self.eps && self.eps <= self.rho && self.rho < 1.0) {
            return Err(Error::invalid(format!(
                "hard instance needs 0 <= eps <= rho < 1, got rho={}, eps={}",
                self.rho, self.eps
            )));
        }
        for &ai in &self.a {
            let on_grid = (ai - self.rho).abs() <= 1e-12 || (ai - (self.rho - self.eps)).abs() <= 1e-12;
            if !on_grid {
                return Err(Error::invalid(format!(
                    "diagonal entry {ai} is neither rho nor rho - eps"
                )));
            }
        }
        Ok(())
    }

    /// +1 where `a_i = ρ`, −1 where `a_i = ρ − ε` (ε = 0 maps to +1).
    pub fn signs(&self) -> Vec<f64> {
        self.a
            .iter()
            .map(|&ai| if (ai - self.rho).abs() <= 1e-12 { 1.0 } else { -1.0 })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct HardInstance {
    pub system: DlbSystem,
    pub actions: ActionSet,
    pub h: DVector<f64>,
    pub optimal_action: DVector<f64>,
    pub optimal_value: f64,
}

/// Lower-bound construction: `ω = 1`, `B = (1−ρ) I`, `A = diag(a)`,
/// `θ = −(2(1−ρ)+ε) / (2(1−ρ+ε)) · 1`, actions `{−1, 1}^d`.
///
/// The closed form `h = sign(a) · ε / (2(1−ρ+ε))` is returned alongside the
/// system, with `u* = sign(a)` and `J* = ε d / (2(1−ρ+ε))`.
pub fn hard_instance(params: &HardInstanceParams) -> Result<HardInstance> {
    params.validate()?;
    let d = params.d();
    let (rho, eps) = (params.rho, params.eps);
    let denom = 2.0 * (1.0 - (rho - eps));
    let theta_val = -(2.0 * (1.0 - rho) + eps) / denom;
    let system = DlbSystem::new(
        DMatrix::from_diagonal(&DVector::from_vec(params.a.clone())),
        DMatrix::identity(d, d) * (1.0 - rho),
        DVector::from_element(d, 1.0),
        DVector::from_element(d, theta_val),
        0.0,
        None,
    )?;
    let signs = DVector::from_vec(params.signs());
    let h = &signs * (eps / denom);
    let optimal_value = eps * d as f64 / denom;
    Ok(HardInstance {
        system,
        actions: ActionSet::signs(d)?,
        h,
        optimal_action: signs,
        optimal_value,
    })
}

fn shift_matrix(tau: usize) -> DMatrix<f64> {
    DMatrix::from_fn(tau, tau, |i, j| if i == j + 1 { 1.0 } else { 0.0 })
}

fn check_means(mu: &[f64]) -> Result<()> {
    if mu.is_empty() {
        return Err(Error::invalid("mean reward vector must be nonempty"));
    }
    if mu.iter().any(|m| !m.is_finite()) {
        return Err(Error::invalid("mean rewards must be finite"));
    }
    Ok(())
}

/// K-armed bandit whose reward for a pull at round t is observed at t + τ.
/// Arms are the canonical basis vectors of ℝ^K.
pub fn make_delayed_instance(mu: &[f64], tau: usize) -> Result<DlbSystem> {
    if tau == 0 {
        return Err(Error::invalid("delay must be >= 1"));
    }
    let mut weights = vec![0.0; tau];
    weights[tau - 1] = 1.0;
    make_composite_instance(mu, &weights)
}

/// Reward of a pull at round t spread over rounds t+1..t+τ with weights `w`.
pub fn make_composite_instance(mu: &[f64], weights: &[f64]) -> Result<DlbSystem> {
    check_means(mu)?;
    let tau = weights.len();
    if tau == 0 {
        return Err(Error::invalid("composite weights must be nonempty"));
    }
    let k = mu.len();
    let mut b = DMatrix::zeros(tau, k);
    for (j, &m) in mu.iter().enumerate() {
        b[(0, j)] = m;
    }
    DlbSystem::new(
        shift_matrix(tau),
        b,
        DVector::from_column_slice(weights),
        DVector::zeros(k),
        0.0,
        None,
    )
}

/// Reward of a pull decays geometrically: `μ_k γ^{s−1}` at round t + s.
pub fn make_ar1_instance(mu: &[f64], gamma: f64) -> Result<DlbSystem> {
    check_means(mu)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("AR(1) parameter must be in (0,1), got {gamma}")));
    }
    let k = mu.len();
    DlbSystem::new(
        DMatrix::from_element(1, 1, gamma),
        DMatrix::from_row_slice(1, k, mu),
        DVector::from_element(1, 1.0),
        DVector::zeros(k),
        0.0,
        None,
    )
}

/// Optimal open-loop action at round `t` of an `horizon`-round problem:
/// the maximizer of `⟨h^{[0, horizon − t]}, u⟩`, lowest index on ties.
pub fn finite_horizon_optimal(
    system: &DlbSystem,
    horizon: usize,
    actions: &ActionSet,
    t: usize,
) -> Result<DVector<f64>> {
    if horizon == 0 || t == 0 || t > horizon {
        return Err(Error::invalid(format!(
            "round {t} outside [1, {horizon}]"
        )));
    }
    check_len("action set dimension", system.action_dim(), actions.dim())?;
    let weights = system.markov_prefix_sum(horizon - t);
    let choice = actions.argmax_linear(&weights)?;
    Ok(actions.get(choice.index).clone())
}
