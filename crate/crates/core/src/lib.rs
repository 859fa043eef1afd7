//! Dynamical linear bandits: a hidden linear state drives a noisy scalar reward,
//! so the value of an action accrues over time through the state dynamics.
//!
//! The crate provides the environment simulator, action sets, the optimistic
//! epoch-based learner and its baselines, Ho-Kalman system identification and
//! a seeded Monte Carlo harness.

pub mod action_space;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod linalg;
pub mod lti_env;
pub mod policies;
pub mod rng;
pub mod sysid;

pub use action_space::{ActionSet, Choice};
pub use error::{Error, Result};
pub use lti_env::{DlbSystem, SimState};
