//! JSON system fixtures: `{"A", "B", "omega", "theta", "sigma", "x1"}` plus an
//! optional externally stated cumulative parameter `stated_h`.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lti_env::DlbSystem;

/// Environment variable naming a directory searched before the built-in fixtures.
pub const FIXTURE_DIR_ENV: &str = "DYNBANDIT_FIXTURES";

const BUILTIN: &[(&str, &str)] = &[
    ("synthetic", include_str!("../../../fixtures/synthetic.json")),
    ("advertising", include_str!("../../../fixtures/advertising.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    omega: Vec<f64>,
    theta: Vec<f64>,
    sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stated_h: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemFixture {
    pub system: DlbSystem,
    pub stated_h: Option<DVector<f64>>,
}

impl SystemFixture {
    pub fn new(system: DlbSystem) -> Self {
        Self { system, stated_h: None }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: FixtureFile = serde_json::from_str(text)?;
        let system = DlbSystem::new(
            linalg::from_rows(&raw.a)?,
            linalg::from_rows(&raw.b)?,
            DVector::from_vec(raw.omega),
            DVector::from_vec(raw.theta),
            raw.sigma,
            raw.x1.map(DVector::from_vec),
        )?;
        let stated_h = raw.stated_h.map(DVector::from_vec);
        if let Some(h) = &stated_h {
            crate::error::check_len("stated_h length", system.action_dim(), h.len())?;
        }
        Ok(Self { system, stated_h })
    }

    pub fn to_json(&self) -> Result<String> {
        let s = &self.system;
        let raw = FixtureFile {
            a: linalg::to_rows(s.a()),
            b: linalg::to_rows(s.b()),
            omega: s.omega().iter().copied().collect(),
            theta: s.theta().iter().copied().collect(),
            sigma: s.sigma(),
            x1: Some(s.initial_state().iter().copied().collect()),
            stated_h: self.stated_h.as_ref().map(|h| h.iter().copied().collect()),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Config(format!("{}: {j}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    /// A fixture by name: `$DYNBANDIT_FIXTURES/<name>.json` when that file
    /// exists, otherwise one of the bundled fixtures.
    pub fn named(name: &str) -> Result<Self> {
        if let Some(dir) = std::env::var_os(FIXTURE_DIR_ENV) {
            let path = PathBuf::from(dir).join(format!("{name}.json"));
            if path.exists() {
                return Self::load(path);
            }
        }
        Self::builtin(name)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("unknown fixture '{name}'")))?;
        Self::from_json(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load() {
        let syn = SystemFixture::builtin("synthetic").unwrap();
        assert_eq!(syn.system.state_dim(), 3);
        assert_eq!(syn.stated_h.unwrap(), DVector::from_vec(vec![0.56, 0.5, 0.11]));
        let adv = SystemFixture::builtin("advertising").unwrap();
        assert!(adv.stated_h.is_none());
        assert!(SystemFixture::builtin("nope").is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        for name in ["synthetic", "advertising"] {
            let f = SystemFixture::builtin(name).unwrap();
            let back = SystemFixture::from_json(&f.to_json().unwrap()).unwrap();
            assert_eq!(f, back);
        }
    }

    #[test]
    fn rejects_unknown_fields_and_bad_shapes() {
        let bad = r#"{"A": [[0.5]], "B": [[1.0]], "omega": [1.0], "theta": [0.0], "sigma": 0.0, "extra": 1}"#;
        assert!(SystemFixture::from_json(bad).is_err());
        let ragged = r#"{"A": [[0.5, 0.1]], "B": [[1.0]], "omega": [1.0], "theta": [0.0], "sigma": 0.0}"#;
        assert!(SystemFixture::from_json(ragged).is_err());
        let unstable = r#"{"A": [[1.5]], "B": [[1.0]], "omega": [1.0], "theta": [0.0], "sigma": 0.0}"#;
        assert!(matches!(SystemFixture::from_json(unstable), Err(Error::Unstable { .. })));
    }
}
