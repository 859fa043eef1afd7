//! Epoch schedule: epoch `m` holds its action for `1 + H_m` rounds with
//! `H_m = ⌊ln m / ln(1/ρ̄)⌋`, and `M` is the largest number of whole epochs
//! that fit in the horizon.

use serde::Serialize;

use crate::error::{Error, Result};

/// Slack added before flooring so exact ratios such as `ln 4 / ln 2` land on
/// the integer rather than just below it.
const LOG_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochSchedule {
    horizon: u64,
    rho_bar: f64,
    epoch_count: u64,
    used_rounds: u64,
}

impl EpochSchedule {
    pub fn new(horizon: u64, rho_bar: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        if !(0.0..1.0).contains(&rho_bar) {
            return Err(Error::invalid(format!("rho_bar must be in [0,1), got {rho_bar}")));
        }
        let mut s = Self {
            horizon,
            rho_bar,
            epoch_count: 0,
            used_rounds: 0,
        };
        s.fill();
        Ok(s)
    }

    /// Walks runs of epochs sharing the same `H`, jumping over each run in one step.
    fn fill(&mut self) {
        let mut m = 1u64;
        let mut used = 0u64;
        loop {
            let h = self.persistence(m);
            let run_end = self.last_epoch_with(h, m);
            let len = 1 + h;
            let available = run_end - m + 1;
            let take = ((self.horizon - used) / len).min(available);
            used += take * len;
            m += take;
            if take < available {
                break;
            }
        }
        self.epoch_count = m - 1;
        self.used_rounds = used;
    }

    /// Last epoch index `≥ from` whose persistence equals `h`.
    fn last_epoch_with(&self, h: u64, from: u64) -> u64 {
        if self.rho_bar == 0.0 {
            return u64::MAX / 2;
        }
        let l = (1.0 / self.rho_bar).ln();
        let guess = ((h as f64 + 1.0) * l).exp();
        if !guess.is_finite() || guess > 1e18 {
            return u64::MAX / 2;
        }
        let mut end = (guess.floor() as u64).max(from);
        while end > from && self.persistence(end) > h {
            end -= 1;
        }
        while self.persistence(end + 1) == h {
            end += 1;
        }
        end
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn rho_bar(&self) -> f64 {
        self.rho_bar
    }

    /// `H_m`; zero for every `m` when `ρ̄ = 0`.
    pub fn persistence(&self, m: u64) -> u64 {
        persistence(self.rho_bar, m)
    }

    /// `1 + H_m`.
    pub fn epoch_length(&self, m: u64) -> u64 {
        1 + self.persistence(m)
    }

    /// `M`.
    pub fn epoch_count(&self) -> u64 {
        self.epoch_count
    }

    /// `t_M = Σ_{m ≤ M} (1 + H_m)`.
    pub fn used_rounds(&self) -> u64 {
        self.used_rounds
    }

    pub fn epoch_lengths(&self) -> impl Iterator<Item = u64> + '_ {
        (1..=self.epoch_count).map(|m| self.epoch_length(m))
    }

    /// `t_m` for `m = 1..=M`.
    pub fn epoch_end_rounds(&self) -> impl Iterator<Item = u64> + '_ {
        self.epoch_lengths().scan(0u64, |acc, len| {
            *acc += len;
            Some(*acc)
        })
    }
}

pub fn persistence(rho_bar: f64, m: u64) -> u64 {
    if rho_bar == 0.0 || m <= 1 {
        return 0;
    }
    ((m as f64).ln() / (1.0 / rho_bar).ln() + LOG_SNAP).floor() as u64
}

/// Batch length for the batched adversarial baselines: `⌈ln M / ln(1/ρ̄)⌉`, at least 1.
pub fn batch_length(rho_bar: f64, epoch_count: u64) -> u64 {
    if rho_bar == 0.0 || epoch_count <= 1 {
        return 1;
    }
    let ratio = (epoch_count as f64).ln() / (1.0 / rho_bar).ln();
    ((ratio - LOG_SNAP).ceil() as u64).max(1)
}
