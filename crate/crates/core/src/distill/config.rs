use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use super::noise::{data_lines, Dictionary};
use super::selectors::bundled_selector_strings;
use super::DistillError;

pub const DEFAULT_WHITELIST: &[&str] =
    &["aria-label", "role", "type", "placeholder", "name", "title", "class", "href", "value", "alt", "for", "id"];

#[derive(Debug, Clone)]
pub struct DistillerConfig {
    pub css_selectors: Vec<String>,
    pub attribute_whitelist: Vec<String>,
    pub noise_threshold: f64,
    pub max_attr_value_len: usize,
    pub per_element_char_cap: usize,
    /// Character budget for the page text handed to the page-context prompt.
    pub page_text_budget: usize,
    pub dictionary: Arc<Dictionary>,
}

impl Default for DistillerConfig {
    fn default() -> Self {
        Self {
            css_selectors: bundled_selector_strings(),
            attribute_whitelist: DEFAULT_WHITELIST.iter().map(|s| s.to_string()).collect(),
            noise_threshold: 0.65,
            max_attr_value_len: 100,
            per_element_char_cap: 500,
            page_text_budget: 4000,
            dictionary: Dictionary::bundled(),
        }
    }
}

/// The `[distiller]` table of a config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillerSettings {
    pub selectors_file: Option<PathBuf>,
    pub css_selectors: Option<Vec<String>>,
    pub attribute_whitelist: Option<Vec<String>>,
    pub noise_threshold: Option<f64>,
    pub max_attr_value_len: Option<usize>,
    pub per_element_char_cap: Option<usize>,
    pub page_text_budget: Option<usize>,
    pub dictionary_file: Option<PathBuf>,
}

impl DistillerConfig {
    pub fn validate(&self) -> Result<(), DistillError> {
        let bad = |m: &str| Err(DistillError::Config(m.to_string()));
        if !(self.noise_threshold > 0.0) || !self.noise_threshold.is_finite() {
            return bad("noise_threshold must be a positive number");
        }
        if self.max_attr_value_len < 3 {
            return bad("max_attr_value_len must be at least 3");
        }
        if self.per_element_char_cap < 64 {
            return bad("per_element_char_cap must be at least 64");
        }
        if self.css_selectors.is_empty() {
            return bad("css_selectors must not be empty");
        }
        Ok(())
    }

    pub fn is_whitelisted(&self, name: &str) -> bool {
        self.attribute_whitelist.iter().any(|w| w.eq_ignore_ascii_case(name))
    }

    /// Applies file settings over the defaults. Relative paths resolve
    /// against `base_dir`.
    pub fn from_settings(settings: &DistillerSettings, base_dir: &Path) -> Result<Self, DistillError> {
        let mut cfg = Self::default();
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        if let Some(p) = &settings.selectors_file {
            let p = resolve(p);
            let text = std::fs::read_to_string(&p).map_err(|e| DistillError::Io { path: p.clone(), source: e })?;
            cfg.css_selectors = data_lines(&text).map(str::to_string).collect();
        }
        if let Some(s) = &settings.css_selectors {
            cfg.css_selectors = s.clone();
        }
        if let Some(w) = &settings.attribute_whitelist {
            cfg.attribute_whitelist = w.iter().map(|s| s.to_ascii_lowercase()).collect();
        }
        if let Some(p) = &settings.dictionary_file {
            cfg.dictionary = Arc::new(Dictionary::load(&resolve(p))?);
        }
        if let Some(v) = settings.noise_threshold {
            cfg.noise_threshold = v;
        }
        if let Some(v) = settings.max_attr_value_len {
            cfg.max_attr_value_len = v;
        }
        if let Some(v) = settings.per_element_char_cap {
            cfg.per_element_char_cap = v;
        }
        if let Some(v) = settings.page_text_budget {
            cfg.page_text_budget = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a standalone TOML file holding either a `[distiller]` table or
    /// the distiller keys at top level.
    pub fn load(path: &Path) -> Result<Self, DistillError> {
        let text = std::fs::read_to_string(path).map_err(|e| DistillError::Io { path: path.to_path_buf(), source: e })?;
        let value: toml::Table = toml::from_str(&text).map_err(|e| DistillError::Config(format!("{}: {e}", path.display())))?;
        let table = match value.get("distiller") {
            Some(toml::Value::Table(t)) => t.clone(),
            _ => value,
        };
        let settings: DistillerSettings =
            table.try_into().map_err(|e| DistillError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_settings(&settings, base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        DistillerConfig::default().validate().unwrap();
    }

    #[test]
    fn file_overrides() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("words.txt"), "# test\nzebra\n").unwrap();
        let cfg_path = dir.path().join("d.toml");
        std::fs::write(
            &cfg_path,
            "[distiller]\nnoise_threshold = 1.5\ndictionary_file = \"words.txt\"\ncss_selectors = [\"button\"]\n",
        )
        .unwrap();
        let cfg = DistillerConfig::load(&cfg_path).unwrap();
        assert_eq!(cfg.noise_threshold, 1.5);
        assert_eq!(cfg.dictionary.len(), 1);
        assert_eq!(cfg.css_selectors, vec!["button".to_string()]);
    }

    #[test]
    fn rejects_bad_threshold() {
        let s = DistillerSettings { noise_threshold: Some(0.0), ..Default::default() };
        assert!(DistillerConfig::from_settings(&s, Path::new(".")).is_err());
    }
}
