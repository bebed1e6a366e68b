use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DnnModel, Mlp};
use crate::error::{Error, Result};

/// Saved network state: the algebraic map ℓ̂ or a differential network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Checkpoint {
    Mlp(Mlp),
    Dnn(DnnModel),
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn into_mlp(self) -> Result<Mlp> {
        match self {
            Checkpoint::Mlp(m) => Ok(m),
            Checkpoint::Dnn(_) => Err(Error::InvalidArgument("checkpoint holds a DNN, not an MLP".into())),
        }
    }

    pub fn into_dnn(self) -> Result<DnnModel> {
        match self {
            Checkpoint::Dnn(d) => Ok(d),
            Checkpoint::Mlp(_) => Err(Error::InvalidArgument("checkpoint holds an MLP, not a DNN".into())),
        }
    }
}
