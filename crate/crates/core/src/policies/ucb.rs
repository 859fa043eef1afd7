//! Optimistic ridge agents: the epoch-based learner and plain Lin-UCB.
//!
//! At the start of epoch `m` (round `t`) the agent plays the maximizer of
//! `⟨ĥ, u⟩ + β_{t−1} ‖u‖_{V⁻¹}` and keeps it for `1 + H_m` rounds. Only the
//! reward of the final round of the epoch enters the ridge regression, when
//! the state has nearly settled to the steady state of that action. Lin-UCB is
//! the special case `H_m ≡ 0` with a smaller coefficient.

use std::sync::Arc;

use nalgebra::DVector;

use super::bounds::{exploration_beta, linucb_beta, BoundsConfig};
use super::ridge::RidgeState;
use super::schedule::EpochSchedule;
use super::Policy;
use crate::action_space::ActionSet;
use crate::error::{Error, Result};

/// How the exploration coefficient is computed from the round index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExplorationRule {
    /// [`exploration_beta`], including the state-transient term.
    DynLin,
    /// [`linucb_beta`].
    LinUcb,
    /// A fixed coefficient.
    Fixed(f64),
}

impl ExplorationRule {
    pub fn beta(&self, bounds: &BoundsConfig, d: usize, t: u64) -> f64 {
        match *self {
            Self::DynLin => exploration_beta(bounds, d, t),
            Self::LinUcb => linucb_beta(bounds, d, t),
            Self::Fixed(beta) => beta,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DynLinUcb {
    name: String,
    actions: Arc<ActionSet>,
    bounds: BoundsConfig,
    rule: ExplorationRule,
    schedule: EpochSchedule,
    ridge: RidgeState,
    epoch: u64,
    epoch_end: u64,
    current: usize,
}

impl DynLinUcb {
    pub fn new(actions: Arc<ActionSet>, bounds: BoundsConfig, horizon: u64) -> Result<Self> {
        Self::build("dynlin_ucb", actions, bounds, horizon, ExplorationRule::DynLin)
    }

    /// Lin-UCB: one-round epochs regardless of `bounds.rho_bar`, reduced coefficient.
    pub fn lin_ucb(actions: Arc<ActionSet>, bounds: BoundsConfig, horizon: u64) -> Result<Self> {
        let schedule = EpochSchedule::new(horizon, 0.0)?;
        Self::with_schedule("linucb", actions, bounds, schedule, ExplorationRule::LinUcb)
    }

    fn build(
        name: &str,
        actions: Arc<ActionSet>,
        bounds: BoundsConfig,
        horizon: u64,
        rule: ExplorationRule,
    ) -> Result<Self> {
        let schedule = EpochSchedule::new(horizon, bounds.rho_bar)?;
        Self::with_schedule(name, actions, bounds, schedule, rule)
    }

    fn with_schedule(
        name: &str,
        actions: Arc<ActionSet>,
        bounds: BoundsConfig,
        schedule: EpochSchedule,
        rule: ExplorationRule,
    ) -> Result<Self> {
        bounds.validate()?;
        let ridge = RidgeState::new(actions.dim(), bounds.lambda)?;
        Ok(Self {
            name: name.to_string(),
            actions,
            bounds,
            rule,
            schedule,
            ridge,
            epoch: 0,
            epoch_end: 0,
            current: 0,
        })
    }

    pub fn with_rule(mut self, rule: ExplorationRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn schedule(&self) -> &EpochSchedule {
        &self.schedule
    }

    pub fn bounds(&self) -> &BoundsConfig {
        &self.bounds
    }

    /// Index of the epoch containing the last chosen round (0 before the first).
    pub fn epoch(&self) -> u64 {
        self.epoch
    }
}

impl Policy for DynLinUcb {
    fn name(&self) -> &str {
        &self.name
    }

    /// Rounds after the last whole epoch form a final epoch cut short by the horizon.
    fn choose(&mut self, t: u64) -> Result<DVector<f64>> {
        let horizon = self.schedule.horizon();
        if t == 0 || t > horizon {
            return Err(Error::PastHorizon { round: t, horizon });
        }
        if t > self.epoch_end {
            self.epoch += 1;
            self.epoch_end = t - 1 + self.schedule.epoch_length(self.epoch);
            let beta = self.rule.beta(&self.bounds, self.actions.dim(), t - 1);
            let choice = self.actions.argmax_ucb(self.ridge.estimate(), self.ridge.cholesky(), beta)?;
            self.current = choice.index;
        }
        Ok(self.actions.get(self.current).clone())
    }

    fn observe(&mut self, t: u64, action: &DVector<f64>, reward: f64) -> Result<()> {
        if t == self.epoch_end {
            self.ridge.absorb(action, reward)?;
        }
        Ok(())
    }

    fn reset(&mut self, _seed: u64) {
        self.ridge = RidgeState::new(self.actions.dim(), self.bounds.lambda).expect("validated at construction");
        self.epoch = 0;
        self.epoch_end = 0;
        self.current = 0;
    }

    fn ridge(&self) -> Option<&RidgeState> {
        Some(&self.ridge)
    }
}
