//! Versioned JSON checkpoints of a fitted model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::inference::{ModelState, TracePoint};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: RunConfig,
    pub vocabulary_hash: String,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
    pub state: ModelState,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let checkpoint: Self =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
        if checkpoint.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {FORMAT_VERSION})",
                checkpoint.format_version
            )));
        }
        let s = &checkpoint.state;
        let (d, k) = s.theta.dim();
        let consistent = s.theta_hat.nrows() == d
            && s.phi.nrows() == k
            && s.phi_hat.nrows() == s.theta_hat.ncols()
            && s.phi_hat.ncols() == s.phi.ncols()
            && s.gamma.dim() == (s.phi.ncols(), k)
            && s.pi.len() == s.phi.ncols();
        if !consistent {
            return Err(Error::Checkpoint("checkpoint matrices have inconsistent shapes".into()));
        }
        Ok(checkpoint)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|source| Error::Write { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fails unless the checkpoint was trained on `vocabulary_hash`.
    pub fn check_vocabulary(&self, vocabulary_hash: &str) -> Result<()> {
        if self.vocabulary_hash != vocabulary_hash {
            return Err(Error::Checkpoint(format!(
                "vocabulary hash mismatch: checkpoint {} vs corpus {vocabulary_hash}",
                self.vocabulary_hash
            )));
        }
        Ok(())
    }
}
