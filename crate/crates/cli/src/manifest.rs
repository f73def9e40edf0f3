use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::FileEntry;

/// Record of one run, written as `manifest.toml` next to the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub threads: usize,
    pub reference_mode: bool,
    pub status: String,
    pub config_digest: String,
    pub diagnostics: Vec<String>,
    pub config: RunConfig,
    pub files: Vec<FileEntry>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}
