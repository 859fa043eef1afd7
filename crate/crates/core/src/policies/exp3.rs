//! Exponential weights over the finite action list, and its batched variant.
//!
//! Rewards are mapped to `[0, 1]` with `r̄ = (r + 2ξ) / (4ξ)`; values that
//! still fall outside (Gaussian tails) are clipped and counted.

use std::sync::Arc;

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_chacha::ChaCha8Rng;

use super::schedule::{batch_length, EpochSchedule};
use super::Policy;
use crate::action_space::ActionSet;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone)]
pub struct Exp3 {
    name: String,
    actions: Arc<ActionSet>,
    scale: f64,
    mix: f64,
    log_weights: Vec<f64>,
    probs: Vec<f64>,
    rng: ChaCha8Rng,
    clipped: u64,
    last_arm: Option<usize>,
    horizon: u64,
}

/// Original Exp3 mixing rate `min(1, sqrt(K ln K / ((e − 1) g)))` for `g`
/// decision points.
pub fn exp3_rate(arms: usize, decisions: u64) -> f64 {
    let k = arms as f64;
    if arms <= 1 {
        return 0.0;
    }
    (k * k.ln() / ((std::f64::consts::E - 1.0) * decisions.max(1) as f64)).sqrt().min(1.0)
}

impl Exp3 {
    /// `decisions` is the number of arm draws the agent will make; `scale` is ξ.
    pub fn new(actions: Arc<ActionSet>, decisions: u64, scale: f64, seed: u64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("reward scale must be > 0, got {scale}")));
        }
        let k = actions.len();
        Ok(Self {
            name: "exp3".to_string(),
            mix: exp3_rate(k, decisions),
            log_weights: vec![0.0; k],
            probs: vec![1.0 / k as f64; k],
            rng: rng::stream(seed, Stream::Policy),
            clipped: 0,
            last_arm: None,
            horizon: decisions,
            scale,
            actions,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn mixing_rate(&self) -> f64 {
        self.mix
    }

    /// Number of rescaled rewards that fell outside `[0, 1]`.
    pub fn clipped(&self) -> u64 {
        self.clipped
    }

    pub fn rescale(&self, reward: f64) -> f64 {
        (reward + 2.0 * self.scale) / (4.0 * self.scale)
    }

    pub fn draw(&mut self) -> usize {
        let dist = WeightedIndex::new(&self.probs).expect("probabilities are positive and finite");
        let arm = dist.sample(&mut self.rng);
        self.last_arm = Some(arm);
        arm
    }

    /// Importance-weighted update of `arm` with a raw (unscaled) reward.
    pub fn update(&mut self, arm: usize, reward: f64) {
        let mut r = self.rescale(reward);
        if !(0.0..=1.0).contains(&r) {
            self.clipped += 1;
            r = r.clamp(0.0, 1.0);
        }
        let k = self.probs.len() as f64;
        self.log_weights[arm] += self.mix * (r / self.probs[arm]) / k;
        let top = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for w in &mut self.log_weights {
            *w -= top;
        }
        let total: f64 = self.log_weights.iter().map(|w| w.exp()).sum();
        for (p, w) in self.probs.iter_mut().zip(&self.log_weights) {
            *p = (1.0 - self.mix) * w.exp() / total + self.mix / k;
        }
    }
}

impl Policy for Exp3 {
    fn name(&self) -> &str {
        &self.name
    }

    fn choose(&mut self, t: u64) -> Result<DVector<f64>> {
        if t == 0 || t > self.horizon {
            return Err(Error::PastHorizon { round: t, horizon: self.horizon });
        }
        let arm = self.draw();
        Ok(self.actions.get(arm).clone())
    }

    fn observe(&mut self, _t: u64, _action: &DVector<f64>, reward: f64) -> Result<()> {
        let arm = self.last_arm.ok_or_else(|| Error::invalid("observe called before choose"))?;
        self.update(arm, reward);
        Ok(())
    }

    fn reset(&mut self, seed: u64) {
        let k = self.probs.len();
        self.log_weights = vec![0.0; k];
        self.probs = vec![1.0 / k as f64; k];
        self.rng = rng::stream(seed, Stream::Policy);
        self.clipped = 0;
        self.last_arm = None;
    }
}

/// Exp3 over batches of `k` rounds: one arm per batch, fed the batch-average reward.
#[derive(Debug, Clone)]
pub struct BatchExp3 {
    name: String,
    inner: Exp3,
    batch: u64,
    horizon: u64,
    arm: usize,
    sum: f64,
    count: u64,
}

impl BatchExp3 {
    /// Batch length `⌈ln M / ln(1/ρ̄)⌉` with `M` the epoch count of the
    /// `(horizon, ρ̄)` schedule.
    pub fn new(actions: Arc<ActionSet>, horizon: u64, rho_bar: f64, scale: f64, seed: u64) -> Result<Self> {
        let m = EpochSchedule::new(horizon, rho_bar)?.epoch_count();
        Self::with_batch(actions, horizon, batch_length(rho_bar, m), scale, seed)
    }

    pub fn with_batch(actions: Arc<ActionSet>, horizon: u64, batch: u64, scale: f64, seed: u64) -> Result<Self> {
        if batch == 0 || horizon == 0 {
            return Err(Error::invalid("batch length and horizon must be >= 1"));
        }
        let decisions = horizon.div_ceil(batch);
        Ok(Self {
            name: "batch_exp3".to_string(),
            inner: Exp3::new(actions, decisions, scale, seed)?,
            batch,
            horizon,
            arm: 0,
            sum: 0.0,
            count: 0,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn batch_length(&self) -> u64 {
        self.batch
    }

    pub fn inner(&self) -> &Exp3 {
        &self.inner
    }
}

impl Policy for BatchExp3 {
    fn name(&self) -> &str {
        &self.name
    }

    fn choose(&mut self, t: u64) -> Result<DVector<f64>> {
        if t == 0 || t > self.horizon {
            return Err(Error::PastHorizon { round: t, horizon: self.horizon });
        }
        if (t - 1).is_multiple_of(self.batch) {
            self.arm = self.inner.draw();
        }
        Ok(self.inner.actions.get(self.arm).clone())
    }

    fn observe(&mut self, t: u64, _action: &DVector<f64>, reward: f64) -> Result<()> {
        self.sum += reward;
        self.count += 1;
        if t.is_multiple_of(self.batch) || t == self.horizon {
            self.inner.update(self.arm, self.sum / self.count as f64);
            self.sum = 0.0;
            self.count = 0;
        }
        Ok(())
    }

    fn reset(&mut self, seed: u64) {
        self.inner.reset(seed);
        self.sum = 0.0;
        self.count = 0;
        self.arm = 0;
    }
}
