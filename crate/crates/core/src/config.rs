//! Run configuration files.
//!
//! ```json
//! {
//!   "problem": { "type": "lq", "c1": 0.25, ... },
//!   "training": { "mode": "mfg", "n_steps": 200000, ... },
//!   "profiles": { "paper": { "n_steps": 1000000 } },
//!   "output": "runs/lq_set1_mfg"
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::{self, AnalyticSolution};
use crate::env::{LqConfig, LqEnv, MeanFieldEnv, MfcgConfig, MfcgEnv};
use crate::error::{Error, Result};
use crate::trainer::{MeanTargets, Mode, Profile, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Problem {
    Lq(LqConfig),
    Mfcg(MfcgConfig),
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        match self {
            Problem::Lq(c) => c.validate(),
            Problem::Mfcg(c) => c.validate(),
        }
    }

    pub fn env(&self) -> Result<Box<dyn MeanFieldEnv + Send + Sync>> {
        Ok(match self {
            Problem::Lq(c) => Box::new(LqEnv::new(*c)?),
            Problem::Mfcg(c) => Box::new(MfcgEnv::new(*c)?),
        })
    }

    /// Closed-form solution for the given mode.
    pub fn analytic(&self, mode: Mode) -> Result<AnalyticSolution> {
        match (self, mode) {
            (Problem::Lq(c), Mode::Mfg) => analytic::solve_mfg(c),
            (Problem::Lq(c), Mode::Mfc) => analytic::solve_mfc(c),
            (Problem::Mfcg(c), Mode::Mfcg) => analytic::solve_mfcg(c),
            (p, m) => Err(Error::Config(format!(
                "{m} mode is not available for a {} problem",
                p.type_name()
            ))),
        }
    }

    /// Metric targets: the analytic mean, shared by the local distribution in
    /// the control game.
    pub fn targets(&self, mode: Mode) -> Result<MeanTargets> {
        let m = self.analytic(mode)?.mean;
        Ok(MeanTargets {
            global: Some(m),
            local: mode.is_mfcg().then_some(m),
        })
    }

    fn type_name(&self) -> &'static str {
        match self {
            Problem::Lq(_) => "lq",
            Problem::Mfcg(_) => "mfcg",
        }
    }
}

/// Per-profile overrides of the training section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_particles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub langevin_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_interval: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub problem: Problem,
    pub training: TrainConfig,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profiles: BTreeMap<Profile, ProfileOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl RunConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfigFile = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.training.validate()?;
        self.problem.analytic(self.training.mode)?;
        for p in self.profiles.keys() {
            self.resolve(Some(*p))?.validate()?;
        }
        Ok(())
    }

    /// Training configuration with `profile` applied: built-in preset first,
    /// then this file's override for that profile.
    pub fn resolve(&self, profile: Option<Profile>) -> Result<TrainConfig> {
        let mut t = self.training.clone();
        if let Some(p) = profile {
            t.apply_profile(p);
            if let Some(o) = self.profiles.get(&p) {
                if let Some(v) = o.n_steps {
                    t.n_steps = v;
                }
                if let Some(v) = o.n_particles {
                    t.n_particles = v;
                }
                if let Some(v) = o.langevin_iters {
                    t.langevin_iters = v;
                }
                if let Some(v) = o.truncation_steps {
                    t.truncation_steps = v;
                }
                if let Some(v) = o.log_interval {
                    t.log_interval = v;
                }
            }
        }
        t.validate()?;
        Ok(t)
    }
}

/// FNV-1a over the canonical JSON of the problem and training sections.
pub fn config_hash(problem: &Problem, training: &TrainConfig) -> Result<String> {
    let text = serde_json::to_string(&(problem, training))?;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(format!("{h:016x}"))
}
