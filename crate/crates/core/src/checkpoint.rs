//! JSON checkpoints: networks (spec and parameters), optimizer moments, the
//! particle sets, the step index and the RNG position.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{config_hash, Problem};
use crate::error::{Error, Result};
use crate::trainer::{MeanTargets, TrainConfig, Trainer, TrainerState};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub problem: Problem,
    pub training: TrainConfig,
    pub targets: MeanTargets,
    pub state: TrainerState,
}

impl Checkpoint {
    pub fn new(
        problem: &Problem,
        training: &TrainConfig,
        targets: MeanTargets,
        state: TrainerState,
    ) -> Result<Self> {
        Ok(Checkpoint {
            version: CHECKPOINT_VERSION,
            config_hash: config_hash(problem, training)?,
            problem: problem.clone(),
            training: training.clone(),
            targets,
            state,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        let expect = config_hash(&ck.problem, &ck.training)?;
        if expect != ck.config_hash {
            return Err(Error::Config(format!(
                "checkpoint config hash {} does not match its contents ({expect})",
                ck.config_hash
            )));
        }
        ck.problem.validate()?;
        ck.training.validate()?;
        Ok(ck)
    }

    /// Writes through a temporary file so an interrupted save never leaves a
    /// truncated checkpoint behind.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Fails unless `training` and `problem` hash to this checkpoint's hash.
    pub fn check_matches(&self, problem: &Problem, training: &TrainConfig) -> Result<()> {
        let h = config_hash(problem, training)?;
        if h != self.config_hash {
            return Err(Error::Config(format!(
                "configuration hash {h} differs from the checkpoint's {}",
                self.config_hash
            )));
        }
        Ok(())
    }

    /// Rebuilds a trainer positioned at the saved step.
    pub fn into_trainer<E: crate::env::MeanFieldEnv + ?Sized>(
        self,
        env: &E,
    ) -> Result<Trainer<'_, E>> {
        Trainer::from_state(env, self.training, self.targets, self.state)
    }
}
