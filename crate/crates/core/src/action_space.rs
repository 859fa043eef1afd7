//! Finite action sets and budget polytopes.
//!
//! Every set is stored as an explicit, ordered list of vectors. For the budget
//! polytope `{u ∈ [0,1]^d : Σu ≤ c}` that list is the vertex set, which is enough
//! for both linear and optimistic (linear plus ellipsoidal norm) maximization
//! because both objectives are convex in `u`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg;

/// Largest dimension accepted by [`enumerate_vertices`] (the candidate scan is
/// exponential in `d`).
pub const MAX_VERTEX_DIM: usize = 20;

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSetKind {
    ExplicitList,
    BudgetBox { d: usize, budget: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    kind: ActionSetKind,
    actions: Vec<DVector<f64>>,
    dim: usize,
    max_norm: f64,
}

/// Winner of an argmax over the set: position in canonical order and objective value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub index: usize,
    pub value: f64,
}

impl ActionSet {
    pub fn explicit(actions: Vec<DVector<f64>>) -> Result<Self> {
        let dim = actions.first().ok_or(Error::EmptyActionSet)?.len();
        if dim == 0 {
            return Err(Error::invalid("actions must have positive dimension"));
        }
        for a in &actions {
            check_len("action length", dim, a.len())?;
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("actions must be finite"));
            }
        }
        Ok(Self::from_parts(ActionSetKind::ExplicitList, actions, dim))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::explicit(rows.iter().map(|r| DVector::from_column_slice(r)).collect())
    }

    pub fn budget_box(d: usize, budget: f64) -> Result<Self> {
        let vertices = enumerate_vertices(d, budget)?;
        Ok(Self::from_parts(ActionSetKind::BudgetBox { d, budget }, vertices, d))
    }

    /// `{−1, 1}^d` in lexicographic order.
    pub fn signs(d: usize) -> Result<Self> {
        if d == 0 || d > MAX_VERTEX_DIM {
            return Err(Error::invalid(format!("sign set dimension must be in 1..={MAX_VERTEX_DIM}")));
        }
        let actions = (0..1usize << d)
            .map(|mask| DVector::from_fn(d, |i, _| if mask >> (d - 1 - i) & 1 == 1 { 1.0 } else { -1.0 }))
            .collect();
        Self::explicit(actions)
    }

    /// The K canonical basis vectors (K-armed bandit encoding).
    pub fn canonical_basis(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::EmptyActionSet);
        }
        Self::explicit((0..k).map(|i| DVector::from_fn(k, |j, _| if i == j { 1.0 } else { 0.0 })).collect())
    }

    fn from_parts(kind: ActionSetKind, actions: Vec<DVector<f64>>, dim: usize) -> Self {
        let max_norm = actions.iter().map(|a| a.norm()).fold(0.0, f64::max);
        Self {
            kind,
            actions,
            dim,
            max_norm,
        }
    }

    pub fn kind(&self) -> &ActionSetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[DVector<f64>] {
        &self.actions
    }

    pub fn get(&self, index: usize) -> &DVector<f64> {
        &self.actions[index]
    }

    /// `U = max ‖u‖₂` over the set.
    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    pub fn index_of(&self, u: &DVector<f64>) -> Option<usize> {
        self.actions.iter().position(|a| (a - u).amax() <= 1e-12)
    }

    /// Maximizer of `⟨h, u⟩`; ties go to the lowest index.
    pub fn argmax_linear(&self, h: &DVector<f64>) -> Result<Choice> {
        check_len("weights length", self.dim, h.len())?;
        self.argmax_by(|u| h.dot(u))
    }

    /// Maximizer of `⟨ĥ, u⟩ + β ‖u‖_{V⁻¹}` given the Cholesky factor of `V`.
    pub fn argmax_ucb(&self, estimate: &DVector<f64>, gram: &Cholesky<f64, Dyn>, beta: f64) -> Result<Choice> {
        check_len("estimate length", self.dim, estimate.len())?;
        check_len("gram size", self.dim, gram.l_dirty().nrows())?;
        if beta.is_nan() || beta < 0.0 {
            return Err(Error::invalid(format!("exploration coefficient must be >= 0, got {beta}")));
        }
        self.argmax_by(|u| estimate.dot(u) + beta * linalg::inverse_norm(gram, u))
    }

    pub(crate) fn argmax_by(&self, mut score: impl FnMut(&DVector<f64>) -> f64) -> Result<Choice> {
        let mut best: Option<Choice> = None;
        for (index, u) in self.actions.iter().enumerate() {
            let value = score(u);
            let better = match best {
                None => true,
                Some(b) => value > b.value + TIE_TOL * b.value.abs().max(1.0),
            };
            if better {
                best = Some(Choice { index, value });
            }
        }
        best.ok_or(Error::EmptyActionSet)
    }

    /// Euclidean projection onto the set: exact for the budget polytope, nearest
    /// member for explicit lists.
    pub fn project(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("action length", self.dim, u.len())?;
        match self.kind {
            ActionSetKind::BudgetBox { budget, .. } => Ok(project_budget_box(u, budget)),
            ActionSetKind::ExplicitList => {
                let mut best = 0;
                let mut best_dist = f64::INFINITY;
                for (i, a) in self.actions.iter().enumerate() {
                    let dist = (a - u).norm();
                    if dist < best_dist - TIE_TOL {
                        best = i;
                        best_dist = dist;
                    }
                }
                Ok(self.actions[best].clone())
            }
        }
    }

    pub fn contains(&self, u: &DVector<f64>) -> bool {
        match self.kind {
            ActionSetKind::BudgetBox { budget, .. } => {
                u.len() == self.dim
                    && u.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v))
                    && u.sum() <= budget + 1e-12
            }
            ActionSetKind::ExplicitList => self.index_of(u).is_some(),
        }
    }
}

/// Free-function form of [`ActionSet::argmax_linear`] returning the action itself.
pub fn argmax_linear(h: &DVector<f64>, actions: &ActionSet) -> Result<(DVector<f64>, f64)> {
    let c = actions.argmax_linear(h)?;
    Ok((actions.get(c.index).clone(), c.value))
}

/// Free-function form of [`ActionSet::argmax_ucb`] taking the Gram matrix `V` itself.
pub fn argmax_ucb(
    estimate: &DVector<f64>,
    gram: &DMatrix<f64>,
    beta: f64,
    actions: &ActionSet,
) -> Result<(DVector<f64>, f64)> {
    let chol = linalg::cholesky(gram, "Gram matrix")?;
    let c = actions.argmax_ucb(estimate, &chol, beta)?;
    Ok((actions.get(c.index).clone(), c.value))
}

/// Vertex list of `{u ∈ [0,1]^d : Σu ≤ c}` in ascending lexicographic order.
///
/// A vertex has at least `d − 1` coordinates at a box bound, so the candidates
/// are the box corners inside the budget plus, for every coordinate `i` and
/// every 0/1 assignment of the others, the point where the budget hyperplane
/// cuts the edge along `i` strictly inside `(0, 1)`.
pub fn enumerate_vertices(d: usize, budget: f64) -> Result<Vec<DVector<f64>>> {
    if d == 0 || d > MAX_VERTEX_DIM {
        return Err(Error::invalid(format!("dimension must be in 1..={MAX_VERTEX_DIM}, got {d}")));
    }
    if !(budget > 0.0 && budget <= d as f64) {
        return Err(Error::invalid(format!("budget must be in (0, {d}], got {budget}")));
    }
    let corner = |mask: usize| -> Vec<f64> { (0..d).map(|i| (mask >> i & 1) as f64).collect() };
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mask in 0..1usize << d {
        let v = corner(mask);
        if v.iter().sum::<f64>() <= budget + 1e-12 {
            out.push(v);
        }
    }
    for free in 0..d {
        for mask in 0..1usize << d {
            if mask >> free & 1 == 1 {
                continue;
            }
            let mut v = corner(mask);
            let rest = budget - v.iter().sum::<f64>();
            if rest > 1e-12 && rest < 1.0 - 1e-12 {
                v[free] = rest;
                out.push(v);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite vertices"));
    out.dedup();
    Ok(out.into_iter().map(DVector::from_vec).collect())
}

/// Projection onto `[0,1]^d ∩ {Σu ≤ c}`: clip, and if the budget is still
/// violated shift by the unique τ > 0 with `Σ clip(u − τ, 0, 1) = c`.
fn project_budget_box(u: &DVector<f64>, budget: f64) -> DVector<f64> {
    let clipped = |tau: f64| u.map(|v| (v - tau).clamp(0.0, 1.0));
    let first = clipped(0.0);
    if first.sum() <= budget {
        return first;
    }
    let (mut lo, mut hi) = (0.0, u.amax() + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clipped(mid).sum() > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clipped(hi)
}
