//! Fixed allocation, e.g. a human expert's average budget split.

use nalgebra::DVector;

use super::Policy;
use crate::action_space::ActionSet;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct ConstantPolicy {
    name: String,
    action: DVector<f64>,
}

impl ConstantPolicy {
    /// Plays `u`, projected onto the action set when it lies outside.
    pub fn new(u: &DVector<f64>, actions: &ActionSet) -> Result<Self> {
        let action = if actions.contains(u) { u.clone() } else { actions.project(u)? };
        Ok(Self {
            name: "constant".to_string(),
            action,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn action(&self) -> &DVector<f64> {
        &self.action
    }
}

impl Policy for ConstantPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn choose(&mut self, _t: u64) -> Result<DVector<f64>> {
        Ok(self.action.clone())
    }

    fn observe(&mut self, _t: u64, _action: &DVector<f64>, _reward: f64) -> Result<()> {
        Ok(())
    }

    fn reset(&mut self, _seed: u64) {}
}
