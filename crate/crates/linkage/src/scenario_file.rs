//! Scenario files: the JSON form of a [`Scenario`] plus an optional
//! `multilink` block describing a focal agent in several segments.

use std::path::Path;

use linkage_core::gaussian::MultiLinkSpec;
use linkage_core::Scenario;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(flatten)]
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multilink: Option<MultiLinkSpec>,
}

impl ScenarioFile {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, CliError> {
        let file: Self = serde_json::from_str(text).map_err(|source| CliError::Parse {
            path: path.to_owned(),
            source,
        })?;
        file.scenario.check_structure()?;
        if let Some(m) = &file.multilink {
            m.check()?;
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text, path)
    }
}
