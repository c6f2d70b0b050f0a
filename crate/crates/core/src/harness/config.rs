use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::protocol::Framework;
use crate::rl::DqnConfig;
use crate::scenario::ScenarioConfig;

/// What to run on top of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub framework: Framework,
    /// Training episodes before the greedy evaluation.
    pub episodes: usize,
    /// Cycles in the greedy evaluation phase.
    pub eval_cycles: usize,
    pub seeds: Vec<u64>,
    /// Subchannel counts visited by the sweep.
    pub subchannels: Vec<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            framework: Framework::U2x,
            episodes: 200,
            eval_cycles: 40,
            seeds: (1..=10).collect(),
            subchannels: vec![2, 3, 4, 5],
        }
    }
}

/// Top-level configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub dqn: DqnConfig,
    pub experiment: ExperimentSpec,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("line {} column {}", e.line(), e.column()), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
        Self::from_json(&text)
    }

    /// Checks everything that does not depend on the layout seed, then
    /// builds the scenario for the first seed.
    pub fn validate(&self) -> Result<()> {
        self.dqn.validate()?;
        let e = &self.experiment;
        if e.eval_cycles < 20 {
            return Err(Error::config("experiment.eval_cycles", "must be >= 20"));
        }
        if e.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "must not be empty"));
        }
        if let Some(k) = e.subchannels.iter().position(|&s| s == 0) {
            return Err(Error::config(format!("experiment.subchannels[{k}]"), "must be >= 1"));
        }
        for (k, &seed) in e.seeds.iter().enumerate() {
            self.scenario.build(seed).map_err(|err| match err {
                Error::Config { path, message } => {
                    Error::config(format!("scenario.{path}"), format!("{message} (seeds[{k}] = {seed})"))
                }
                other => other,
            })?;
        }
        Ok(())
    }

    /// Canonical JSON (field order fixed by the types).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
