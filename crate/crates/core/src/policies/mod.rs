//! Learning agents and the interface the harness drives them through.

use nalgebra::DVector;

use crate::error::Result;

pub mod bounds;
pub mod constant;
pub mod dlinucb;
pub mod exp3;
pub mod ridge;
pub mod schedule;
pub mod ucb;

pub use bounds::{BoundsConfig, ConfidenceConstants};
pub use constant::ConstantPolicy;
pub use dlinucb::DLinUcb;
pub use exp3::{BatchExp3, Exp3};
pub use ridge::RidgeState;
pub use schedule::EpochSchedule;
pub use ucb::{DynLinUcb, ExplorationRule};

/// A learner interacting over rounds `t = 1, 2, …`. Each round the harness
/// calls `choose(t)` then `observe(t, action, reward)` with the same `t`.
pub trait Policy: Send {
    fn name(&self) -> &str;

    fn choose(&mut self, t: u64) -> Result<DVector<f64>>;

    fn observe(&mut self, t: u64, action: &DVector<f64>, reward: f64) -> Result<()>;

    /// Forget all history; randomized policies reseed from `seed`.
    fn reset(&mut self, seed: u64);

    /// Current ridge state, for agents that keep one.
    fn ridge(&self) -> Option<&RidgeState> {
        None
    }
}
