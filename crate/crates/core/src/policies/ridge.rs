//! Regularized least squares over absorbed `(u, y)` pairs.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::linalg;

/// `V = λI + Σ u uᵀ`, `b = Σ y u`, `ĥ = V⁻¹ b`.
#[derive(Debug, Clone)]
pub struct RidgeState {
    lambda: f64,
    gram: DMatrix<f64>,
    moments: DVector<f64>,
    estimate: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    samples: u64,
}

impl RidgeState {
    pub fn new(d: usize, lambda: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("ridge dimension must be positive"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
        }
        let gram = linalg::identity(d) * lambda;
        let chol = linalg::cholesky(&gram, "ridge Gram matrix")?;
        Ok(Self {
            lambda,
            gram,
            moments: DVector::zeros(d),
            estimate: DVector::zeros(d),
            chol,
            samples: 0,
        })
    }

    pub fn absorb(&mut self, u: &DVector<f64>, y: f64) -> Result<()> {
        check_len("sample length", self.dim(), u.len())?;
        self.gram.ger(1.0, u, u, 1.0);
        self.moments.axpy(y, u, 1.0);
        self.chol = linalg::cholesky(&self.gram, "ridge Gram matrix")?;
        self.estimate = self.chol.solve(&self.moments);
        self.samples += 1;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.moments.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn moments(&self) -> &DVector<f64> {
        &self.moments
    }

    pub fn estimate(&self) -> &DVector<f64> {
        &self.estimate
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    pub fn sample_count(&self) -> u64 {
        self.samples
    }

    /// `det(V) / λ^d`.
    pub fn det_ratio(&self) -> f64 {
        let log_det: f64 = self.chol.l_dirty().diagonal().iter().map(|l| 2.0 * l.ln()).sum();
        (log_det - self.dim() as f64 * self.lambda.ln()).exp()
    }

    /// `‖ĥ − h‖_V`.
    pub fn error_norm(&self, h: &DVector<f64>) -> f64 {
        let e = &self.estimate - h;
        (e.transpose() * &self.gram * &e)[(0, 0)].max(0.0).sqrt()
    }

    /// `‖V ĥ − b‖₂`.
    pub fn residual(&self) -> f64 {
        (&self.gram * &self.estimate - &self.moments).norm()
    }
}
