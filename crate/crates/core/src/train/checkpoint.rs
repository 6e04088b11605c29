use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{embed, predict_from, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Graph};
use crate::model::{ClassifierParams, ModelState};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Every parameter tensor with its shape, the training config and its hash.
/// Stored as JSON; floats round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub config: TrainConfig,
    pub model: ModelState,
    /// Post-hoc probe; when present it replaces the joint classifier for
    /// predictions.
    pub probe: Option<ClassifierParams>,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, model: ModelState, probe: Option<ClassifierParams>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config_hash: config.hash(),
            config,
            model,
            probe,
        }
    }

    /// The classifier used for predictions.
    pub fn classifier(&self) -> &ClassifierParams {
        self.probe.as_ref().unwrap_or(&self.model.classifier)
    }

    /// Predicted class of every node of `g`.
    pub fn predict(&self, g: &Graph) -> Result<Vec<usize>> {
        let adj = normalized_adjacency(g, self.config.self_loops);
        let z = embed(&self.model, g, &adj)?;
        predict_from(&z, self.classifier())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses a checkpoint; a stored hash that disagrees with the stored
    /// config only produces a warning.
    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        if !ck.hash_matches() {
            warn!("checkpoint config hash does not match its stored config");
        }
        Ok(ck)
    }

    pub fn hash_matches(&self) -> bool {
        self.config.hash() == self.config_hash
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
