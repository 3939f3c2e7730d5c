//! Config file, environment and flags, merged in that order.

use std::path::{Path, PathBuf};

use serde::Deserialize;

/// A problem with the user's input: exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}

pub const API_KEY_ENV: &str = "WEBPILOT_API_KEY";
pub const API_URL_ENV: &str = "WEBPILOT_API_URL";
pub const MODELS_ENV: &str = "WEBPILOT_MODELS";
pub const WEBDRIVER_ENV: &str = "WEBPILOT_WEBDRIVER_URL";
pub const MAX_COST_ENV: &str = "WEBPILOT_MAX_COST";
pub const DEFAULT_API_URL: &str = "https://api.openai.com/v1/chat/completions";

/// Contents of `--config`. Paths are relative to the file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub goal: Option<String>,
    pub url: Option<String>,
    pub driver: Option<String>,
    pub graph: Option<PathBuf>,
    pub backend: Option<String>,
    pub script: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub policy: Option<String>,
    pub budget_steps: Option<usize>,
    pub retries: Option<usize>,
    pub max_cost: Option<f64>,
    pub wall_clock_secs: Option<u64>,
    pub pricing: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub models: Option<String>,
    pub api_url: Option<String>,
    pub webdriver_url: Option<String>,
    pub headless: Option<bool>,
    pub templates: Option<PathBuf>,
    pub upload_file: Option<PathBuf>,
    pub jobs: Option<usize>,
    /// Read separately by the distiller loader.
    pub distiller: Option<toml::Table>,
    #[serde(skip)]
    pub path: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let raw: toml::Table = toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        if raw.keys().any(|k| k.contains("key") || k.contains("secret") || k.contains("token")) {
            return Err(config_error(format!(
                "{}: credentials are not read from config files; set {API_KEY_ENV} instead",
                path.display()
            )));
        }
        let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.graph,
            &mut cfg.script,
            &mut cfg.cache,
            &mut cfg.pricing,
            &mut cfg.out,
            &mut cfg.templates,
            &mut cfg.upload_file,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.path = Some(path.to_path_buf());
        Ok(cfg)
    }
}

/// Environment value, ignoring empty strings.
pub fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}
