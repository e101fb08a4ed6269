use crate::error::{CliError, Result};
use refkrig_core::existence::ExistenceReport;
use serde::{Deserialize, Serialize};

/// A file read by a run, kept verbatim so the manifest alone can replay it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Input {
    pub path: String,
    pub contents: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleFlag {
    Desk,
    Paper,
}

/// What was run, with every command-line choice that affects the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum CommandSpec {
    Check,
    Fit { method: String },
    Sample,
    Predict { method: Option<String>, level: Option<f64> },
    Bench { scale: Option<ScaleFlag>, threads: usize },
}

/// Command-line values that override the config file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    #[serde(default)]
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub comment: String,
    pub version: String,
    pub spec: CommandSpec,
    pub overrides: Overrides,
    pub config: Input,
    /// The settings after defaults and overrides were applied.
    pub resolved: serde_json::Value,
    pub master_seed: u64,
    pub data: Option<Input>,
    pub targets: Option<Input>,
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch at the start of the run.
    pub started_at: u64,
    pub wall_clock_seconds: f64,
    pub stages: Vec<Stage>,
    pub existence: Option<ExistenceReport>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(origin: &str, text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Data(format!("{origin}: not a run manifest: {e}")))
    }
}
