//! Context files: a goal plus the taught part of the API.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsl::{Api, ApiExport, DslError};
use crate::sim::SceneSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextFile {
    pub goal: String,
    #[serde(flatten)]
    pub api: ApiExport,
}

#[derive(Debug, thiserror::Error)]
pub enum ContextIoError {
    #[error("cannot read context file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed context file: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ContextFile {
    pub fn new(goal: &str, api: &Api) -> ContextFile {
        ContextFile { goal: goal.to_string(), api: api.export() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("context files serialize")
    }

    pub fn from_json(text: &str) -> Result<ContextFile, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ContextFile, ContextIoError> {
        Ok(ContextFile::from_json(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }
}

/// Rebuilds goal and API against `scene`, checking every object reference.
pub fn import_context(file: &ContextFile, scene: &SceneSpec) -> Result<(String, Api), DslError> {
    let api = Api::import(&file.api, scene.objects.clone())?;
    Ok((file.goal.clone(), api))
}
