use std::path::{Path, PathBuf};

use mhnpath::mhn::ModelConfig;
use mhnpath::search::SearchConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// JSON run configuration. Every key is optional; relative paths resolve
/// against the working directory. Flags override file values, which
/// override built-in defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub library: Option<PathBuf>,
    pub models: Vec<PathBuf>,
    pub enz_library: Option<PathBuf>,
    pub enz_models: Vec<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub toxicity: Option<PathBuf>,
    pub conditions: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Overrides `model.seed` when set.
    pub seed: Option<u64>,
    pub log_level: Option<String>,
    pub search: SearchConfig,
    pub model: ModelConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Flag, then file `seed`, then `model.seed`.
    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(self.model.seed)
    }

    pub fn out_dir(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| self.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."))
    }
}

/// First of flag and file value, or a usage error naming the flag.
pub fn required(flag: Option<PathBuf>, file: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    flag.or_else(|| file.clone())
        .ok_or_else(|| CliError::Usage(format!("--{name} is required (flag or config key)")))
}

/// Flag values when given, else the file's list.
pub fn list(flag: Vec<PathBuf>, file: &[PathBuf]) -> Vec<PathBuf> {
    if flag.is_empty() {
        file.to_vec()
    } else {
        flag
    }
}

/// Provenance written beside every output: the command, the seed and the
/// effective configuration.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub config: &'a C,
}

pub fn write_manifest<C: Serialize>(dir: &Path, command: &str, seed: u64, config: &C) -> Result<(), CliError> {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config,
    };
    let mut text = serde_json::to_string_pretty(&m).map_err(CliError::runtime)?;
    text.push('\n');
    write(&dir.join("run.json"), &text)
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}
