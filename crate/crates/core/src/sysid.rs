//! System identification from a single input/output trajectory.
//!
//! The reward process is rewritten in predictor form
//! `x̂_{t+1} = Ā x̂_t + B' u_t + F y_t`, `y_t = C x̂_t + D u_t + e_t`, so that
//! `y_t` is linear in the last `H` outputs and the last `H + 1` inputs:
//!
//! `y_t ≈ Σ_k C Ā^k F y_{t-1-k} + D u_t + Σ_k C Ā^k B' u_{t-1-k}`.
//!
//! The block row `G = [CF, …, CĀ^{H-1}F, D, CB', …, CĀ^{H-1}B']` is fitted by
//! ridge regression, and a Ho-Kalman realization of the stacked
//! `[CĀ^k F, CĀ^k B']` blocks recovers `(C, Ā, F, B')`. The state-space model
//! of the reward is then `A = Ā + F C`, `B = B' + F D`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action_space::ActionSet;
use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::lti_env::{DlbSystem, SimState};
use crate::rng::{self, Stream};

/// Singular values below this fraction of the largest are dropped when the
/// order is not given.
pub const ORDER_RATIO: f64 = 1e-3;

/// Default ridge regularizer of the Markov-parameter regression.
pub const DEFAULT_LAMBDA: f64 = 1e-6;

/// Relative singular-value floor under which the Hankel matrix is treated as
/// rank deficient.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    inputs: Vec<DVector<f64>>,
    outputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(inputs: Vec<DVector<f64>>, outputs: Vec<DVector<f64>>) -> Result<Self> {
        check_len("trajectory outputs", inputs.len(), outputs.len())?;
        let (Some(u0), Some(y0)) = (inputs.first(), outputs.first()) else {
            return Err(Error::invalid("empty trajectory"));
        };
        let (p, m) = (u0.len(), y0.len());
        if p == 0 || m == 0 {
            return Err(Error::invalid("trajectory needs at least one input and one output"));
        }
        for u in &inputs {
            check_len("trajectory input", p, u.len())?;
        }
        for y in &outputs {
            check_len("trajectory output", m, y.len())?;
        }
        Ok(Self { inputs, outputs })
    }

    /// Scalar-output trajectory.
    pub fn scalar(inputs: Vec<DVector<f64>>, outputs: &[f64]) -> Result<Self> {
        let outputs = outputs.iter().map(|&y| DVector::from_element(1, y)).collect();
        Self::new(inputs, outputs)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs[0].len()
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[DVector<f64>] {
        &self.outputs
    }

    /// Columns `t, u_1..u_p, y_1..y_m`, with `t` starting at 1.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.input_dim()).map(|i| format!("u_{i}")));
        header.extend((1..=self.output_dim()).map(|i| format!("y_{i}")));
        w.write_record(&header)?;
        for (t, (u, y)) in self.inputs.iter().zip(&self.outputs).enumerate() {
            let mut row = vec![(t + 1).to_string()];
            row.extend(u.iter().chain(y.iter()).map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::Config("empty trajectory file".into()));
        }
        if &header[0] != "t" {
            return Err(Error::Config(format!("first column must be 't', found '{}'", &header[0])));
        }
        let p = header.iter().skip(1).take_while(|c| c.starts_with("u_")).count();
        let m = header.len() - 1 - p;
        let expected: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=p).map(|i| format!("u_{i}")))
            .chain((1..=m).map(|i| format!("y_{i}")))
            .collect();
        if p == 0 || m == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::Config(format!(
                "trajectory header must be t,u_1..u_p,y_1..y_m; found {}",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let values = rec
                .iter()
                .skip(1)
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Config(format!("row {}: {e}", line + 2)))?;
            inputs.push(DVector::from_column_slice(&values[..p]));
            outputs.push(DVector::from_column_slice(&values[p..]));
        }
        if inputs.is_empty() {
            return Err(Error::Config("trajectory has a header but no rows".into()));
        }
        Self::new(inputs, outputs)
    }
}

/// Design matrix (one row `φ_t` per `t = H+1..T`) and the matching outputs.
#[derive(Debug, Clone)]
pub struct Regressors {
    pub design: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    pub history: usize,
    pub output_dim: usize,
    pub input_dim: usize,
}

/// `φ_t = [y_{t-1}, …, y_{t-H}, u_t, u_{t-1}, …, u_{t-H}]`.
pub fn build_regressors(traj: &Trajectory, history: usize) -> Result<Regressors> {
    if history == 0 {
        return Err(Error::invalid("history window must be >= 1"));
    }
    if history >= traj.len() {
        return Err(Error::invalid(format!(
            "history window {history} needs a trajectory longer than {} rounds",
            traj.len()
        )));
    }
    let (m, p) = (traj.output_dim(), traj.input_dim());
    let rows = traj.len() - history;
    let width = (m + p) * history + p;
    let mut design = DMatrix::zeros(rows, width);
    let mut targets = DMatrix::zeros(rows, m);
    for r in 0..rows {
        let t = r + history;
        for k in 0..history {
            let y = &traj.outputs[t - 1 - k];
            for i in 0..m {
                design[(r, k * m + i)] = y[i];
            }
        }
        for k in 0..=history {
            let u = &traj.inputs[t - k];
            for i in 0..p {
                design[(r, m * history + k * p + i)] = u[i];
            }
        }
        for i in 0..m {
            targets[(r, i)] = traj.outputs[t][i];
        }
    }
    Ok(Regressors {
        design,
        targets,
        history,
        output_dim: m,
        input_dim: p,
    })
}

/// Estimated block row `G`, `m × ((m+p)H + p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovEstimate {
    pub g: DMatrix<f64>,
    pub history: usize,
    pub lambda: f64,
    pub output_dim: usize,
    pub input_dim: usize,
}

impl MarkovEstimate {
    /// Assembles `G` from the feedback blocks `CĀ^kF` (m×m), `D` (m×p) and the
    /// input blocks `CĀ^kB'` (m×p).
    pub fn from_blocks(feedback: &[DMatrix<f64>], d: &DMatrix<f64>, input: &[DMatrix<f64>]) -> Result<Self> {
        let history = feedback.len();
        check_len("input Markov blocks", history, input.len())?;
        let (m, p) = d.shape();
        let mut g = DMatrix::zeros(m, (m + p) * history + p);
        for (k, f) in feedback.iter().enumerate() {
            check_len("feedback block shape", m * m, f.nrows() * f.ncols())?;
            g.view_mut((0, k * m), (m, m)).copy_from(f);
        }
        g.view_mut((0, m * history), (m, p)).copy_from(d);
        for (k, b) in input.iter().enumerate() {
            check_len("input block shape", m * p, b.nrows() * b.ncols())?;
            g.view_mut((0, m * history + p + k * p), (m, p)).copy_from(b);
        }
        Ok(Self {
            g,
            history,
            lambda: 0.0,
            output_dim: m,
            input_dim: p,
        })
    }

    pub fn feedback_block(&self, k: usize) -> DMatrix<f64> {
        let m = self.output_dim;
        self.g.view((0, k * m), (m, m)).into_owned()
    }

    pub fn input_block(&self, k: usize) -> DMatrix<f64> {
        let (m, p) = (self.output_dim, self.input_dim);
        self.g.view((0, m * self.history + p + k * p), (m, p)).into_owned()
    }
}

/// `G = Yᵀ X (XᵀX + λI)⁻¹`.
pub fn estimate_markov(reg: &Regressors, lambda: f64) -> Result<MarkovEstimate> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("identification lambda must be >= 0, got {lambda}")));
    }
    let x = &reg.design;
    let mut normal = x.tr_mul(x);
    for i in 0..normal.nrows() {
        normal[(i, i)] += lambda;
    }
    let rhs = x.tr_mul(&reg.targets);
    let chol = nalgebra::Cholesky::new(normal).ok_or_else(|| {
        Error::Numerical(if lambda == 0.0 {
            "singular normal matrix; use a positive identification lambda".into()
        } else {
            "normal matrix is not positive definite".into()
        })
    })?;
    let g = chol.solve(&rhs).transpose();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite Markov estimate".into()));
    }
    Ok(MarkovEstimate {
        g,
        history: reg.history,
        lambda,
        output_dim: reg.output_dim,
        input_dim: reg.input_dim,
    })
}

/// The `D` block, at column offset `mH`.
pub fn extract_d(est: &MarkovEstimate) -> DMatrix<f64> {
    est.g
        .view((0, est.output_dim * est.history), (est.output_dim, est.input_dim))
        .into_owned()
}

/// `(A, B, C, D)` of order `n`, plus the Hankel singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub order: usize,
    pub singular_values: Vec<f64>,
}

impl Realization {
    /// `D` for `k = 0`, `C A^{k-1} B` otherwise.
    pub fn markov_parameter(&self, k: usize) -> DMatrix<f64> {
        if k == 0 {
            return self.d.clone();
        }
        let mut z = self.b.clone();
        for _ in 1..k {
            z = &self.a * z;
        }
        &self.c * z
    }

    pub fn markov_sequence(&self, len: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(len);
        let mut z = self.b.clone();
        for k in 0..len {
            if k == 0 {
                out.push(self.d.clone());
            } else {
                out.push(&self.c * &z);
                z = &self.a * z;
            }
        }
        out
    }

    /// As a reward system (`ω = Cᵀ`, `θ = Dᵀ`); scalar output only.
    pub fn to_system(&self, sigma: f64) -> Result<DlbSystem> {
        check_len("output dimension", 1, self.c.nrows())?;
        DlbSystem::new(
            self.a.clone(),
            self.b.clone(),
            self.c.row(0).transpose(),
            self.d.row(0).transpose(),
            sigma,
            None,
        )
    }
}

/// Ho-Kalman realization of the estimated predictor blocks.
///
/// The block Hankel matrix of `M_k = [CĀ^kF, CĀ^kB']` has `H − ⌊H/2⌋` block rows
/// and `⌊H/2⌋` block columns. A balanced rank-`n` factorization `U S Vᵀ` gives
/// the observability factor `U S^{1/2}` (first block row: `C`) and the
/// controllability factor `S^{1/2} Vᵀ` (first block column: `[F B']`), and the
/// shifted Hankel gives `Ā = S^{-1/2} Uᵀ H⁺ V S^{-1/2}`.
///
/// With `order = None` the order is the number of singular values above
/// [`ORDER_RATIO`] times the largest.
pub fn ho_kalman(est: &MarkovEstimate, order: Option<usize>) -> Result<Realization> {
    let (m, p, hist) = (est.output_dim, est.input_dim, est.history);
    let d = extract_d(est);
    let rows = hist - hist / 2;
    let cols = hist / 2;
    if let Some(n) = order {
        if n == 0 {
            return Err(Error::invalid("realization order must be >= 1"));
        }
        if hist < 2 * n {
            return Err(Error::invalid(format!("history {hist} is too short for order {n} (need >= {})", 2 * n)));
        }
    } else if cols == 0 {
        return Err(Error::invalid("history must be >= 2 for a realization"));
    }
    let w = m + p;
    let block = |k: usize| -> DMatrix<f64> {
        let mut b = DMatrix::zeros(m, w);
        b.view_mut((0, 0), (m, m)).copy_from(&est.feedback_block(k));
        b.view_mut((0, m), (m, p)).copy_from(&est.input_block(k));
        b
    };
    let blocks: Vec<DMatrix<f64>> = (0..hist).map(block).collect();
    let mut hankel = DMatrix::zeros(m * rows, w * cols);
    let mut shifted = DMatrix::zeros(m * rows, w * cols);
    for i in 0..rows {
        for j in 0..cols {
            hankel.view_mut((i * m, j * w), (m, w)).copy_from(&blocks[i + j]);
            shifted.view_mut((i * m, j * w), (m, w)).copy_from(&blocks[i + j + 1]);
        }
    }
    let svd = hankel.svd(true, true);
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let top = singular_values.first().copied().unwrap_or(0.0);
    let n = order.unwrap_or_else(|| singular_values.iter().filter(|&&s| s > ORDER_RATIO * top).count().max(1));
    if n > singular_values.len() {
        return Err(Error::DegenerateRealization { order: n, singular_values });
    }
    if top == 0.0 {
        return Ok(Realization {
            a: DMatrix::zeros(n, n),
            b: DMatrix::zeros(n, p),
            c: DMatrix::zeros(m, n),
            d,
            order: n,
            singular_values,
        });
    }
    if singular_values[n - 1] <= RANK_TOL * top {
        return Err(Error::DegenerateRealization { order: n, singular_values });
    }
    let (u_full, vt_full) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let u = DMatrix::from_fn(m * rows, n, |r, c| u_full[(r, idx[c])]);
    let vt = DMatrix::from_fn(n, w * cols, |r, c| vt_full[(idx[r], c)]);
    let sqrt_s: Vec<f64> = singular_values[..n].iter().map(|s| s.sqrt()).collect();
    let obs = DMatrix::from_fn(m * rows, n, |r, c| u[(r, c)] * sqrt_s[c]);
    let ctrl = DMatrix::from_fn(n, w * cols, |r, c| vt[(r, c)] * sqrt_s[r]);
    let mut a_bar = u.tr_mul(&shifted) * vt.transpose();
    for r in 0..n {
        for c in 0..n {
            a_bar[(r, c)] /= sqrt_s[r] * sqrt_s[c];
        }
    }
    let c_hat = obs.rows(0, m).into_owned();
    let f = ctrl.view((0, 0), (n, m)).into_owned();
    let b_prime = ctrl.view((0, m), (n, p)).into_owned();
    let a = a_bar + &f * &c_hat;
    let b = b_prime + &f * &d;
    Ok(Realization {
        a,
        b,
        c: c_hat,
        d,
        order: n,
        singular_values,
    })
}

/// `ĥ = D̂ᵀ + B̂ᵀ (I − Â)^{-T} Ĉᵀ` of a scalar-output realization.
pub fn identified_h(r: &Realization) -> Result<DVector<f64>> {
    check_len("output dimension", 1, r.c.nrows())?;
    let rho = linalg::spectral_radius(&r.a);
    if rho >= 1.0 || !rho.is_finite() {
        return Err(Error::Unstable { rho });
    }
    let n = r.order;
    let lhs = (linalg::identity(n) - &r.a).transpose();
    let z = linalg::solve_square(&lhs, &r.c.row(0).transpose(), "identified cumulative parameter")?;
    Ok(r.d.row(0).transpose() + r.b.transpose() * z)
}

/// Smallest `H` with `ρ̄^H ≤ 10⁻³`, capped at `T_id / 10` and at least 2.
pub fn default_history(rho_bar: f64, t_id: usize) -> usize {
    let cap = (t_id / 10).max(2);
    let mut h = 1usize;
    let mut power = rho_bar;
    while power > 1e-3 && h < cap {
        h += 1;
        power *= rho_bar;
    }
    h.clamp(2, cap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifyOptions {
    pub history: usize,
    pub order: Option<usize>,
    pub lambda: f64,
}

impl IdentifyOptions {
    pub fn new(history: usize) -> Self {
        Self {
            history,
            order: None,
            lambda: DEFAULT_LAMBDA,
        }
    }

    pub fn with_order(mut self, n: usize) -> Self {
        self.order = Some(n);
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Identification {
    pub estimate: MarkovEstimate,
    pub realization: Realization,
    pub h: DVector<f64>,
}

/// Regressors, ridge fit, realization and `ĥ` in one call.
pub fn identify(traj: &Trajectory, opts: &IdentifyOptions) -> Result<Identification> {
    let reg = build_regressors(traj, opts.history)?;
    let estimate = estimate_markov(&reg, opts.lambda)?;
    let realization = ho_kalman(&estimate, opts.order)?;
    let h = identified_h(&realization)?;
    Ok(Identification {
        estimate,
        realization,
        h,
    })
}

/// Plays i.i.d. uniform draws from `actions` for `t_id` rounds.
pub fn simulate_trajectory(system: &DlbSystem, actions: &ActionSet, t_id: usize, seed: u64) -> Result<Trajectory> {
    check_len("action set dimension", system.action_dim(), actions.dim())?;
    if t_id == 0 {
        return Err(Error::invalid("trajectory length must be >= 1"));
    }
    let mut input_rng = rng::stream(seed, Stream::Inputs);
    let mut state = SimState::new(system, seed);
    let mut inputs = Vec::with_capacity(t_id);
    let mut outputs = Vec::with_capacity(t_id);
    for _ in 0..t_id {
        let u = actions.get(input_rng.random_range(0..actions.len())).clone();
        outputs.push(system.step(&mut state, &u)?);
        inputs.push(u);
    }
    Trajectory::scalar(inputs, &outputs)
}

/// JSON report of an identification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifiedModel {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub order: usize,
    pub history: usize,
    pub lambda: f64,
    pub singular_values: Vec<f64>,
}

impl From<&Identification> for IdentifiedModel {
    fn from(id: &Identification) -> Self {
        let r = &id.realization;
        Self {
            a: linalg::to_rows(&r.a),
            b: linalg::to_rows(&r.b),
            c: linalg::to_rows(&r.c),
            d: linalg::to_rows(&r.d),
            h: id.h.iter().copied().collect(),
            order: r.order,
            history: id.estimate.history,
            lambda: id.estimate.lambda,
            singular_values: r.singular_values.clone(),
        }
    }
}
