//! Configuration file schema and flag merging.
//!
//! ```toml
//! seed = 7
//!
//! [generate]
//! composition = "2,2"
//! train = 1000
//! workers = 8
//!
//! [rephrase]
//! endpoint = "https://example.invalid/rephrase"
//! api_key_env = "MIXEDIT_REPHRASE_API_KEY"
//! ```
//!
//! Every table is optional; unknown keys are rejected. Flags override the
//! file, which overrides the built-in defaults.

use std::path::Path;

use anyhow::Context;
use mixedit::dataset::{RephraseConfig, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::commands::{edit, eval, generate, tasks, train_toy};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub tasks: tasks::Settings,
    pub generate: generate::Settings,
    pub edit: edit::Settings,
    pub eval: eval::Settings,
    pub train_toy: train_toy::Settings,
    pub synth_catalog: SyntheticSpec,
    pub rephrase: RephraseConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| crate::usage(format!("invalid config {}: {e}", path.display())))
    }
}

pub struct Ctx {
    pub json: bool,
    pub seed: Option<u64>,
    pub file: FileConfig,
}

impl Ctx {
    pub fn seed_or(&self, default: u64) -> u64 {
        self.seed.unwrap_or(default)
    }

    /// Prints `value` as JSON, or the human-readable report, on stdout.
    pub fn emit(&self, value: &serde_json::Value, human: impl FnOnce() -> String) {
        use std::io::Write;
        let text = if self.json { serde_json::to_string_pretty(value).unwrap_or_default() + "\n" } else { human() };
        // a closed pipe (e.g. `| head`) is not an error worth reporting
        let _ = std::io::stdout().lock().write_all(text.as_bytes());
    }
}

/// Overwrites `slot` when the flag was given.
pub fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// The effective settings as one JSON object, for echoing.
pub fn echo(settings: &impl Serialize, seed: u64) -> serde_json::Value {
    let mut v = serde_json::to_value(settings).unwrap_or(serde_json::Value::Null);
    if let Some(obj) = v.as_object_mut() {
        obj.insert("seed".into(), seed.into());
    }
    v
}

pub fn echo_line(config: &serde_json::Value) -> String {
    format!("config: {}\n", serde_json::to_string(config).unwrap_or_default())
}
