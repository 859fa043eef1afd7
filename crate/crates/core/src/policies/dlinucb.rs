//! Discounted Lin-UCB for drifting parameters.
//!
//! Past samples are down-weighted by `γ` per round. The estimate uses the
//! discounted Gram `V`, the width uses `V⁻¹ Ṽ V⁻¹` with the squared-discount
//! Gram `Ṽ`:
//!
//! ```text
//! V ← γV + uuᵀ + (1−γ)λI     Ṽ ← γ²Ṽ + uuᵀ + (1−γ²)λI     b ← γb + y u
//! ```

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::bounds::{dlinucb_beta, BoundsConfig};
use super::Policy;
use crate::action_space::ActionSet;
use crate::error::{check_len, Error, Result};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct DLinUcb {
    name: String,
    actions: Arc<ActionSet>,
    bounds: BoundsConfig,
    gamma: f64,
    horizon: u64,
    gram: DMatrix<f64>,
    gram_sq: DMatrix<f64>,
    moments: DVector<f64>,
    estimate: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    samples: u64,
}

impl DLinUcb {
    pub fn new(actions: Arc<ActionSet>, bounds: BoundsConfig, gamma: f64, horizon: u64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid(format!("discount must be in (0,1], got {gamma}")));
        }
        bounds.validate()?;
        let d = actions.dim();
        let gram = linalg::identity(d) * bounds.lambda;
        let chol = linalg::cholesky(&gram, "discounted Gram matrix")?;
        Ok(Self {
            name: format!("dlinucb_{gamma}"),
            actions,
            bounds,
            gamma,
            horizon,
            gram_sq: gram.clone(),
            gram,
            moments: DVector::zeros(d),
            estimate: DVector::zeros(d),
            chol,
            samples: 0,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn estimate(&self) -> &DVector<f64> {
        &self.estimate
    }

    pub fn moments(&self) -> &DVector<f64> {
        &self.moments
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Confidence width `sqrt(uᵀ V⁻¹ Ṽ V⁻¹ u)`.
    pub fn width(&self, u: &DVector<f64>) -> f64 {
        let w = self.chol.solve(u);
        w.dot(&(&self.gram_sq * &w)).max(0.0).sqrt()
    }
}

impl Policy for DLinUcb {
    fn name(&self) -> &str {
        &self.name
    }

    fn choose(&mut self, t: u64) -> Result<DVector<f64>> {
        if t == 0 || t > self.horizon {
            return Err(Error::PastHorizon { round: t, horizon: self.horizon });
        }
        let beta = dlinucb_beta(&self.bounds, self.actions.dim(), self.samples, self.gamma);
        let choice = self.actions.argmax_by(|u| self.estimate.dot(u) + beta * self.width(u))?;
        Ok(self.actions.get(choice.index).clone())
    }

    fn observe(&mut self, _t: u64, action: &DVector<f64>, reward: f64) -> Result<()> {
        check_len("action length", self.actions.dim(), action.len())?;
        let (g, lambda) = (self.gamma, self.bounds.lambda);
        let d = action.len();
        self.gram = &self.gram * g + action * action.transpose() + linalg::identity(d) * ((1.0 - g) * lambda);
        self.gram_sq =
            &self.gram_sq * (g * g) + action * action.transpose() + linalg::identity(d) * ((1.0 - g * g) * lambda);
        self.moments = &self.moments * g + action * reward;
        self.chol = linalg::cholesky(&self.gram, "discounted Gram matrix")?;
        self.estimate = self.chol.solve(&self.moments);
        self.samples += 1;
        Ok(())
    }

    fn reset(&mut self, _seed: u64) {
        let name = std::mem::take(&mut self.name);
        *self = Self::new(self.actions.clone(), self.bounds.clone(), self.gamma, self.horizon)
            .expect("validated at construction")
            .with_name(name);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::DynLinUcb;

    fn bounds() -> BoundsConfig {
        BoundsConfig {
            rho_bar: 0.2,
            phi_bar: 1.0,
            theta_bound: 0.5,
            omega_bound: 1.0,
            input_bound: 0.25,
            action_bound: 1.0,
            state_bound: 0.35,
            sigma: 0.01,
            lambda: 1.0,
            delta: 0.05,
        }
    }

    fn e1() -> DVector<f64> {
        DVector::from_vec(vec![1.0, 0.0])
    }

    #[test]
    fn two_sample_recursion() {
        let set = Arc::new(ActionSet::canonical_basis(2).unwrap());
        let mut p = DLinUcb::new(set, bounds(), 0.5, 10).unwrap();
        p.observe(1, &e1(), 1.0).unwrap();
        assert_eq!(p.moments(), &e1());
        p.observe(2, &e1(), 1.0).unwrap();
        assert!((p.moments()[0] - 1.5).abs() < 1e-15);
        assert!((p.gram()[(0, 0)] - 2.5).abs() < 1e-15);
        assert!((p.estimate()[0] - 0.6).abs() < 1e-12);
        assert!((p.gram()[(1, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_sample_then_decay() {
        let set = Arc::new(ActionSet::canonical_basis(2).unwrap());
        let mut p = DLinUcb::new(set, bounds(), 0.8, 10).unwrap();
        p.observe(1, &e1(), 2.0).unwrap();
        p.observe(2, &DVector::zeros(2), 0.0).unwrap();
        assert!((p.moments()[0] - 0.8 * 2.0).abs() < 1e-15);
    }

    #[test]
    fn undiscounted_matches_linucb() {
        let set = Arc::new(ActionSet::budget_box(3, 1.5).unwrap());
        let mut d = DLinUcb::new(set.clone(), bounds(), 1.0, 200).unwrap();
        let mut l = DynLinUcb::lin_ucb(set, bounds(), 200).unwrap();
        let h = DVector::from_vec(vec![0.3, 0.5, 0.1]);
        for t in 1..=200u64 {
            let ud = d.choose(t).unwrap();
            let ul = l.choose(t).unwrap();
            assert_eq!(ud, ul, "round {t}");
            let y = h.dot(&ud) + ((t as f64) * 0.7).sin() * 0.1;
            d.observe(t, &ud, y).unwrap();
            l.observe(t, &ul, y).unwrap();
            assert!((d.estimate() - l.ridge().unwrap().estimate()).amax() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_discount() {
        let set = Arc::new(ActionSet::canonical_basis(2).unwrap());
        assert!(DLinUcb::new(set.clone(), bounds(), 0.0, 10).is_err());
        assert!(DLinUcb::new(set, bounds(), 1.5, 10).is_err());
    }
}
