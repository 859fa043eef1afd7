//! Small dense linear-algebra helpers shared by the environment, the agents and
//! the identification pipeline.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Largest eigenvalue modulus of a square matrix, computed as `‖A^k‖^{1/k}`
/// for `k = 2^60` by repeated normalized squaring.
///
/// Unlike a QR eigenvalue sweep this is exact on defective matrices such as
/// the nilpotent shifts of the delayed-reward instances, where eigenvalue
/// solvers report spurious radii of order `ε^{1/n}`.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let mut p = a.clone();
    let mut log_radius = 0.0;
    let mut k = 1.0;
    for _ in 0..60 {
        let norm = p.norm();
        if norm == 0.0 {
            return 0.0;
        }
        p /= norm;
        log_radius += norm.ln() / k;
        p = &p * &p;
        k *= 2.0;
    }
    let norm = p.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (log_radius + norm.ln() / k).exp()
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(v: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(v.clone()).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// `sqrt(uᵀ V⁻¹ u)` via a triangular solve with the Cholesky factor `L` of `V`.
pub fn inverse_norm(chol: &Cholesky<f64, Dyn>, u: &DVector<f64>) -> f64 {
    let l = chol.l_dirty();
    // Solve L z = u; then ||z||² = uᵀ (L Lᵀ)⁻¹ u.
    match l.solve_lower_triangular(u) {
        Some(z) => z.norm(),
        None => f64::INFINITY,
    }
}

pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// LU solve of the square system `m x = b`, failing on singularity.
pub fn solve_square(m: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let lu = m.clone().lu();
    lu.solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Numerical(format!("singular matrix in {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_of_rotation_is_its_scale() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((spectral_radius(&a) - 0.5).abs() < 1e-12);
        assert!((spectral_norm(&a) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn radius_of_defective_matrices() {
        let shift = DMatrix::from_fn(4, 4, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
        assert!(spectral_radius(&shift) < 1e-9);
        let jordan = DMatrix::from_row_slice(2, 2, &[0.3, 1.0, 0.0, 0.3]);
        assert!((spectral_radius(&jordan) - 0.3).abs() < 1e-12);
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, 0.0, 0.1]));
        assert!((spectral_radius(&diag) - 0.2).abs() < 1e-14);
        let complex = DMatrix::from_row_slice(3, 3, &[0.1, -0.6, 0.0, 0.6, 0.1, 0.0, 0.0, 0.0, -0.3]);
        let expected = (0.01f64 + 0.36).sqrt();
        assert!((spectral_radius(&complex) - expected).abs() < 1e-12);
    }

    #[test]
    fn inverse_norm_matches_explicit_inverse() {
        let v = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let u = DVector::from_vec(vec![0.3, -1.2]);
        let chol = cholesky(&v, "test").unwrap();
        let explicit = (u.transpose() * v.try_inverse().unwrap() * &u)[(0, 0)].sqrt();
        assert!((inverse_norm(&chol, &u) - explicit).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            cholesky(&v, "v"),
            Err(Error::NotPositiveDefinite(_))
        ));
    }
}
