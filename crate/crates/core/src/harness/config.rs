//! Experiment configuration (JSON, `"schema": 1`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub system: SystemSource,
    /// Replaces the noise scale of the loaded system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub actions: ActionSpec,
    /// Score actions with the fixture's `stated_h` instead of the computed one.
    #[serde(default)]
    pub use_stated_h: bool,
    /// Require every configured `rho_bar` to dominate the true spectral radius.
    #[serde(default)]
    pub oracle_bounds: bool,
    #[serde(default)]
    pub bounds: BoundsOverrides,
    pub policies: Vec<PolicySpec>,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSource {
    Fixture { name: String },
    File { path: String },
    Hard { rho: f64, eps: f64, signs: Vec<f64> },
    Delayed { mu: Vec<f64>, tau: usize },
    Composite { mu: Vec<f64>, weights: Vec<f64> },
    Ar1 { mu: Vec<f64>, gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionSpec {
    BudgetBox { d: usize, budget: f64 },
    Explicit { actions: Vec<Vec<f64>> },
    Signs { d: usize },
    Basis { k: usize },
}

/// Either a number or `"log_t"` (natural log of the horizon).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Value(f64),
    Rule(LambdaRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaRule {
    #[serde(rename = "log_t")]
    LogT,
}

impl LambdaSpec {
    pub fn resolve(&self, horizon: u64) -> f64 {
        match self {
            Self::Value(v) => *v,
            Self::Rule(LambdaRule::LogT) => (horizon as f64).ln().max(f64::MIN_POSITIVE),
        }
    }
}

/// Replacements for bounds otherwise read off the true system. `delta`
/// defaults to `1/T` and `lambda` to 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    DynlinUcb {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho_bar: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<LambdaSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Linucb {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<LambdaSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Dlinucb {
        gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<LambdaSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Exp3 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    BatchExp3 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho_bar: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Constant {
        action: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    /// Constant play of the oracle action.
    Optimal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

impl PolicySpec {
    /// Name used in output files.
    pub fn label(&self) -> String {
        let (label, default) = match self {
            Self::DynlinUcb { rho_bar, label, .. } => (
                label,
                match rho_bar {
                    Some(r) => format!("dynlin_ucb(rho_bar={r})"),
                    None => "dynlin_ucb".to_string(),
                },
            ),
            Self::Linucb { label, .. } => (label, "linucb".to_string()),
            Self::Dlinucb { gamma, label, .. } => (label, format!("dlinucb(gamma={gamma})")),
            Self::Exp3 { label } => (label, "exp3".to_string()),
            Self::BatchExp3 { label, .. } => (label, "batch_exp3".to_string()),
            Self::Constant { label, .. } => (label, "constant".to_string()),
            Self::Optimal { label } => (label, "optimal".to_string()),
        };
        label.clone().unwrap_or(default)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed JSON: {e}")))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let schema = value.get("schema").and_then(|s| s.as_u64());
        if schema != Some(u64::from(SCHEMA_VERSION)) {
            return Err(Error::Config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                value.get("schema").map_or("<missing>".to_string(), |v| v.to_string())
            )));
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("policies must be nonempty".into()));
        }
        if let Some(cps) = &self.checkpoints {
            if cps.iter().any(|&c| c == 0 || c > self.horizon) {
                return Err(Error::Config(format!("checkpoints must lie in [1, {}]", self.horizon)));
            }
        }
        if self.parallel == Some(0) {
            return Err(Error::Config("parallel must be >= 1".into()));
        }
        let mut labels: Vec<String> = self.policies.iter().map(PolicySpec::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate policy label '{}'", w[0])));
        }
        Ok(())
    }

    /// Configured checkpoints, or `{1, 2, 4, …} ∪ {T/2, T}`.
    pub fn checkpoint_rounds(&self) -> Vec<u64> {
        let mut cps = self.checkpoints.clone().unwrap_or_else(|| default_checkpoints(self.horizon));
        cps.sort_unstable();
        cps.dedup();
        cps
    }
}

pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    let mut cps: Vec<u64> = std::iter::successors(Some(1u64), |c| c.checked_mul(2))
        .take_while(|&c| c <= horizon)
        .collect();
    if horizon >= 2 {
        cps.push(horizon / 2);
    }
    cps.push(horizon);
    cps.sort_unstable();
    cps.dedup();
    cps
}

/// Applies `key=value` overrides to a raw config. Keys are dot-separated
/// paths (`bounds.lambda`, `policies.0.gamma`); values parse as JSON and fall
/// back to plain strings. Unknown top-level or nested object keys are rejected.
pub fn apply_override(value: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not of the form key=value")))?;
    let parsed: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = value;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            serde_json::Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), parsed);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| serde_json::Value::Object(Default::default()))
            }
            serde_json::Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("override key '{key}': '{part}' is not an index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("override key '{key}': index {idx} out of range ({len})")))?;
                if last {
                    *slot = parsed;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("override key '{key}': '{part}' is not inside an object"))),
        };
    }
    Ok(())
}
