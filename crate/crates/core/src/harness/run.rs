//! Seeded runs, regret bookkeeping and aggregation across seeds.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ActionSpec, ExperimentConfig, LambdaSpec, PolicySpec, SystemSource};
use crate::action_space::ActionSet;
use crate::error::{check_len, Error, Result};
use crate::fixtures::SystemFixture;
use crate::lti_env::{self, DlbSystem, HardInstanceParams, SimState};
use crate::policies::bounds::{exp3_scale_of, BoundsConfig};
use crate::policies::{BatchExp3, ConstantPolicy, DLinUcb, DynLinUcb, Exp3, Policy};

/// Best action, its value, and the gap to the best strictly worse action
/// (`+∞` when every action is optimal).
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    pub h: DVector<f64>,
    pub optimal_index: usize,
    pub optimal_action: DVector<f64>,
    pub optimal_value: f64,
    pub gap: f64,
}

const GAP_TOL: f64 = 1e-12;

pub fn oracle(h: &DVector<f64>, actions: &ActionSet) -> Result<Oracle> {
    let best = actions.argmax_linear(h)?;
    let gap = actions
        .actions()
        .iter()
        .map(|u| best.value - h.dot(u))
        .filter(|g| *g > GAP_TOL * best.value.abs().max(1.0))
        .fold(f64::INFINITY, f64::min);
    Ok(Oracle {
        h: h.clone(),
        optimal_index: best.index,
        optimal_action: actions.get(best.index).clone(),
        optimal_value: best.value,
        gap,
    })
}

/// Oracle with `h` computed from the system.
pub fn system_oracle(system: &DlbSystem, actions: &ActionSet) -> Result<Oracle> {
    oracle(&system.cumulative_markov()?, actions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub checkpoint: u64,
    pub online_regret: f64,
    pub offline_regret: f64,
    pub action: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub policy: String,
    pub seed: u64,
    pub points: Vec<TracePoint>,
}

impl RegretTrace {
    pub fn at(&self, checkpoint: u64) -> Option<&TracePoint> {
        self.points.iter().find(|p| p.checkpoint == checkpoint)
    }

    pub fn last(&self) -> Option<&TracePoint> {
        self.points.last()
    }
}

/// Plays `policy` for `horizon` rounds from `state`, recording cumulative
/// online regret `t J* − Σ y_s` and offline regret `t J* − Σ ⟨h, u_s⟩` at the
/// sorted `checkpoints`.
pub fn simulate(
    system: &DlbSystem,
    policy: &mut dyn Policy,
    mut state: SimState,
    horizon: u64,
    checkpoints: &[u64],
    oracle: &Oracle,
    seed: u64,
) -> Result<RegretTrace> {
    check_len("oracle weights", system.action_dim(), oracle.h.len())?;
    let mut online = 0.0;
    let mut offline = 0.0;
    let mut points = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().copied().filter(|&c| c <= horizon).peekable();
    for t in 1..=horizon {
        let u = policy.choose(t)?;
        check_len("policy action", system.action_dim(), u.len())?;
        let y = system.step(&mut state, &u)?;
        policy.observe(t, &u, y)?;
        online += oracle.optimal_value - y;
        offline += (oracle.optimal_value - oracle.h.dot(&u)).max(0.0);
        while next.peek() == Some(&t) {
            next.next();
            points.push(TracePoint {
                checkpoint: t,
                online_regret: online,
                offline_regret: offline,
                action: u.iter().copied().collect(),
            });
        }
    }
    Ok(RegretTrace {
        policy: policy.name().to_string(),
        seed,
        points,
    })
}

/// A configuration resolved into concrete objects.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub fixture: SystemFixture,
    pub actions: Arc<ActionSet>,
    pub oracle: Oracle,
    pub checkpoints: Vec<u64>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mut fixture = load_system(&config.system)?;
        if let Some(sigma) = config.sigma {
            fixture.system = fixture.system.with_sigma(sigma)?;
        }
        let actions = Arc::new(build_actions(&config.actions)?);
        check_len("action set dimension", fixture.system.action_dim(), actions.dim())?;
        let h = if config.use_stated_h {
            fixture
                .stated_h
                .clone()
                .ok_or_else(|| Error::Config("use_stated_h requires a fixture with stated_h".into()))?
        } else {
            fixture.system.cumulative_markov()?
        };
        let oracle = oracle(&h, &actions)?;
        let checkpoints = config.checkpoint_rounds();
        let exp = Self {
            config,
            fixture,
            actions,
            oracle,
            checkpoints,
        };
        for spec in &exp.config.policies {
            exp.build_policy(spec, 0)?;
        }
        Ok(exp)
    }

    pub fn system(&self) -> &DlbSystem {
        &self.fixture.system
    }

    /// Bounds read off the system with the configured overrides applied.
    pub fn bounds(&self, rho_bar: Option<f64>, lambda: Option<LambdaSpec>) -> Result<BoundsConfig> {
        let o = &self.config.bounds;
        let horizon = self.config.horizon;
        let lambda = lambda.or(o.lambda).map_or(1.0, |l| l.resolve(horizon));
        let delta = o.delta.unwrap_or(if horizon >= 2 { 1.0 / horizon as f64 } else { 0.5 });
        let mut b = BoundsConfig::from_system(self.system(), &self.actions, lambda, delta, rho_bar.or(o.rho_bar))?;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut b.phi_bar, o.phi_bar);
        set(&mut b.theta_bound, o.theta_bound);
        set(&mut b.omega_bound, o.omega_bound);
        set(&mut b.input_bound, o.input_bound);
        set(&mut b.action_bound, o.action_bound);
        set(&mut b.state_bound, o.state_bound);
        set(&mut b.sigma, o.sigma);
        b.validate()?;
        if self.config.oracle_bounds {
            let rho = crate::linalg::spectral_radius(self.system().a());
            if b.rho_bar < rho {
                return Err(Error::Config(format!(
                    "rho_bar {} is below the true spectral radius {rho} (oracle_bounds is set)",
                    b.rho_bar
                )));
            }
        }
        Ok(b)
    }

    pub fn build_policy(&self, spec: &PolicySpec, seed: u64) -> Result<Box<dyn Policy>> {
        let horizon = self.config.horizon;
        let actions = self.actions.clone();
        let label = spec.label();
        let mut policy: Box<dyn Policy> = match spec {
            PolicySpec::DynlinUcb { rho_bar, lambda, .. } => {
                Box::new(DynLinUcb::new(actions, self.bounds(*rho_bar, *lambda)?, horizon)?.with_name(label))
            }
            PolicySpec::Linucb { lambda, .. } => {
                Box::new(DynLinUcb::lin_ucb(actions, self.bounds(None, *lambda)?, horizon)?.with_name(label))
            }
            PolicySpec::Dlinucb { gamma, lambda, .. } => {
                Box::new(DLinUcb::new(actions, self.bounds(None, *lambda)?, *gamma, horizon)?.with_name(label))
            }
            PolicySpec::Exp3 { .. } => {
                let xi = exp3_scale_of(self.system(), &actions);
                Box::new(Exp3::new(actions, horizon, xi, seed)?.with_name(label))
            }
            PolicySpec::BatchExp3 { rho_bar, .. } => {
                let xi = exp3_scale_of(self.system(), &actions);
                let rho = self.bounds(*rho_bar, None)?.rho_bar;
                Box::new(BatchExp3::new(actions, horizon, rho, xi, seed)?.with_name(label))
            }
            PolicySpec::Constant { action, .. } => {
                let u = DVector::from_column_slice(action);
                check_len("constant action", self.actions.dim(), u.len())?;
                Box::new(ConstantPolicy::new(&u, &self.actions)?.with_name(label))
            }
            PolicySpec::Optimal { .. } => {
                Box::new(ConstantPolicy::new(&self.oracle.optimal_action, &self.actions)?.with_name(label))
            }
        };
        policy.reset(seed);
        Ok(policy)
    }

    pub fn run_one(&self, spec: &PolicySpec, seed: u64) -> Result<RegretTrace> {
        let state = SimState::new(self.system(), seed);
        self.run_with_state(spec, seed, state)
    }

    pub fn run_with_state(&self, spec: &PolicySpec, seed: u64, state: SimState) -> Result<RegretTrace> {
        let mut policy = self.build_policy(spec, seed)?;
        simulate(
            self.system(),
            policy.as_mut(),
            state,
            self.config.horizon,
            &self.checkpoints,
            &self.oracle,
            seed,
        )
    }

    /// Every (policy, seed) pair, in config order; parallel over pairs.
    pub fn run_all(&self) -> Result<Vec<RegretTrace>> {
        let jobs: Vec<(&PolicySpec, u64)> = self
            .config
            .policies
            .iter()
            .flat_map(|p| self.config.seeds.iter().map(move |&s| (p, s)))
            .collect();
        let work = || jobs.par_iter().map(|(p, s)| self.run_one(p, *s)).collect::<Result<Vec<_>>>();
        match self.config.parallel {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
                .install(work),
            None => work(),
        }
    }

    pub fn run_sweep(&self) -> Result<SweepResult> {
        let traces = self.run_all()?;
        let aggregate = aggregate(&traces);
        Ok(SweepResult { traces, aggregate })
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub traces: Vec<RegretTrace>,
    pub aggregate: Vec<AggregateRow>,
}

impl SweepResult {
    pub fn row(&self, policy: &str, checkpoint: u64) -> Option<&AggregateRow> {
        self.aggregate.iter().find(|r| r.policy == policy && r.checkpoint == checkpoint)
    }

    /// `R̄(T) / R̄(T/2)` on mean offline regret.
    pub fn sublinearity(&self, policy: &str, horizon: u64) -> Option<f64> {
        let half = self.row(policy, horizon / 2)?;
        let full = self.row(policy, horizon)?;
        sublinearity_statistic(half.mean_offline, full.mean_offline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub policy: String,
    pub checkpoint: u64,
    pub mean_online: f64,
    pub std_online: f64,
    pub mean_offline: f64,
    pub std_offline: f64,
    pub n_seeds: usize,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// One row per (policy, checkpoint), policies in first-seen order. Seeds are
/// sorted before reduction so the result does not depend on trace order.
pub fn aggregate(traces: &[RegretTrace]) -> Vec<AggregateRow> {
    let mut policies: Vec<&str> = Vec::new();
    for t in traces {
        if !policies.contains(&t.policy.as_str()) {
            policies.push(&t.policy);
        }
    }
    let mut rows = Vec::new();
    for policy in policies {
        let mut group: Vec<&RegretTrace> = traces.iter().filter(|t| t.policy == policy).collect();
        group.sort_by_key(|t| t.seed);
        let mut checkpoints: Vec<u64> = group.iter().flat_map(|t| t.points.iter().map(|p| p.checkpoint)).collect();
        checkpoints.sort_unstable();
        checkpoints.dedup();
        for c in checkpoints {
            let pts: Vec<&TracePoint> = group.iter().filter_map(|t| t.at(c)).collect();
            let online: Vec<f64> = pts.iter().map(|p| p.online_regret).collect();
            let offline: Vec<f64> = pts.iter().map(|p| p.offline_regret).collect();
            let (mean_online, std_online) = mean_std(&online);
            let (mean_offline, std_offline) = mean_std(&offline);
            rows.push(AggregateRow {
                policy: policy.to_string(),
                checkpoint: c,
                mean_online,
                std_online,
                mean_offline,
                std_offline,
                n_seeds: pts.len(),
            });
        }
    }
    rows
}

/// `R̄(T) / R̄(T/2)`: about √2 for √T regret and 2 for linear regret. `None`
/// when `R̄(T/2) ≤ 0`.
pub fn sublinearity_statistic(half: f64, full: f64) -> Option<f64> {
    (half > 0.0).then(|| full / half)
}

fn load_system(source: &SystemSource) -> Result<SystemFixture> {
    Ok(match source {
        SystemSource::Fixture { name } => SystemFixture::named(name)?,
        SystemSource::File { path } => SystemFixture::load(path)?,
        SystemSource::Hard { rho, eps, signs } => {
            let inst = lti_env::hard_instance(&HardInstanceParams::from_signs(*rho, *eps, signs))?;
            SystemFixture::new(inst.system)
        }
        SystemSource::Delayed { mu, tau } => SystemFixture::new(lti_env::make_delayed_instance(mu, *tau)?),
        SystemSource::Composite { mu, weights } => {
            SystemFixture::new(lti_env::make_composite_instance(mu, weights)?)
        }
        SystemSource::Ar1 { mu, gamma } => SystemFixture::new(lti_env::make_ar1_instance(mu, *gamma)?),
    })
}

pub fn build_actions(spec: &ActionSpec) -> Result<ActionSet> {
    match spec {
        ActionSpec::BudgetBox { d, budget } => ActionSet::budget_box(*d, *budget),
        ActionSpec::Explicit { actions } => ActionSet::from_rows(actions),
        ActionSpec::Signs { d } => ActionSet::signs(*d),
        ActionSpec::Basis { k } => ActionSet::canonical_basis(*k),
    }
}
