use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_error, HarnessError};
use crate::learner::{BackupSet, BonusConfig, PlannerConfig, DEFAULT_HORIZON, DEFAULT_SIGMA};
use crate::visitor::{VisitorConfig, DEFAULT_REQUEST_PROBABILITY};

/// Which controller drives the campaign episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Fixed exhibit order, extra detail on visitor request. Counts are still
    /// recorded so coverage can be compared.
    Static,
    /// UCBVI, replanned before every episode.
    #[default]
    Learning,
    /// A learning run followed by static-policy episodes against fresh
    /// visitors.
    Verification,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Static => "static",
            Mode::Learning => "learning",
            Mode::Verification => "verification",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(Mode::Static),
            "learning" => Ok(Mode::Learning),
            "verification" => Ok(Mode::Verification),
            _ => Err(HarnessError::Config(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub horizon: usize,
    pub sigma: f64,
    pub optimistic_init: bool,
    /// Action set of the value backup.
    pub backup: BackupSet,
    /// Campaign episodes per replication.
    pub episodes: usize,
    /// Static episodes appended in verification mode.
    pub verification_episodes: usize,
    pub replications: usize,
    pub seed: u64,
    /// Episodes per metrics window.
    pub window: usize,
    /// Static episodes simulated to seed the model when no log is given.
    pub bootstrap_episodes: usize,
    pub bootstrap_log: Option<PathBuf>,
    pub request_probability: f64,
    /// Where logs, snapshots and exports go. Nothing is written when unset.
    pub output_dir: Option<PathBuf>,
    pub visitor: VisitorConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Learning,
            horizon: DEFAULT_HORIZON,
            sigma: DEFAULT_SIGMA,
            optimistic_init: false,
            backup: BackupSet::Feasible,
            episodes: 1000,
            verification_episodes: 100,
            replications: 1,
            seed: 0,
            window: 50,
            bootstrap_episodes: 2000,
            bootstrap_log: None,
            request_probability: DEFAULT_REQUEST_PROBABILITY,
            output_dir: None,
            visitor: VisitorConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if !(1..=u8::MAX as usize).contains(&self.horizon) {
            return fail(format!("horizon must be in 1..=255, got {}", self.horizon));
        }
        self.bonus().validate()?;
        if self.window == 0 {
            return fail("window must be at least 1".into());
        }
        if self.replications == 0 {
            return fail("replications must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.request_probability) {
            return fail(format!("request_probability must lie in [0, 1], got {}", self.request_probability));
        }
        self.visitor.validate()?;
        if let Some(log) = &self.bootstrap_log {
            if !log.is_file() {
                return fail(format!("bootstrap log {} does not exist", log.display()));
            }
        }
        if let Some(dir) = &self.output_dir {
            if dir.exists() && !dir.is_dir() {
                return fail(format!("output path {} is not a directory", dir.display()));
            }
        }
        Ok(())
    }

    pub fn bonus(&self) -> BonusConfig {
        BonusConfig { sigma: self.sigma, optimistic_init: self.optimistic_init }
    }

    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig { bonus: Some(self.bonus()), backup: self.backup }
    }

    /// SHA-256 over everything that affects results. The output directory is
    /// left out so identical experiments written to different places hash
    /// the same.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let json = serde_json::to_string(&canonical).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
