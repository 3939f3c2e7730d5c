//! Completion backends and response parsers.

mod http;
pub mod parse;
mod scripted;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::component::ComponentId;

pub use http::{HttpBackend, HttpConfig, RetryPolicy};
pub use parse::{
    parse_action_selection, parse_element_list, parse_option_index, parse_search_keys, parse_yes_no, ParseError,
};
pub use scripted::{ScriptedBackend, ScriptedCall, ScriptedExpectation};

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub component: ComponentId,
    pub model_id: String,
    pub system_text: String,
    pub user_text: String,
    /// PNG bytes sent alongside the text, if any.
    pub image: Option<Vec<u8>>,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_output_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(with = "duration_ms")]
    pub latency: Duration,
}

pub(crate) mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("rate limited; gave up after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("server error {status}; gave up after {attempts} attempts")]
    Server { status: u16, attempts: u32 },
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { message: String, attempts: u32 },
    #[error("request rejected (HTTP {status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no scripted expectation matches a {component} request")]
    NoMatchingExpectation { component: ComponentId },
    #[error("script file: {0}")]
    Script(String),
}

/// A chat-completion service. Implementations must tolerate two calls in
/// flight at once.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<T> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        (**self).complete(request)
    }
}

/// Which model serves each component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMap {
    pub default: String,
    #[serde(default)]
    pub components: BTreeMap<ComponentId, String>,
}

/// Cheap model for the high-volume components, vision model for
/// screenshots, the strong model everywhere else.
impl Default for ModelMap {
    fn default() -> Self {
        let mut components = BTreeMap::new();
        components.insert(ComponentId::ScreenshotResponse, "gpt-4-vision-preview".to_string());
        for c in [
            ComponentId::ElementProposal,
            ComponentId::CacheKeyMatch,
            ComponentId::TabManagement,
            ComponentId::SearchKeyGeneration,
            ComponentId::PageContext,
        ] {
            components.insert(c, "gpt-3.5-turbo".to_string());
        }
        Self { default: "gpt-4-turbo".into(), components }
    }
}

impl ModelMap {
    pub fn model_for(&self, component: ComponentId) -> &str {
        self.components.get(&component).map(String::as_str).unwrap_or(&self.default)
    }

    pub fn uniform(model: impl Into<String>) -> Self {
        Self { default: model.into(), components: BTreeMap::new() }
    }

    /// Reads `component=model` pairs separated by commas on top of the
    /// defaults. A bare model name replaces the default and drops the
    /// per-component defaults.
    pub fn parse_pairs(spec: &str) -> Result<Self, LlmError> {
        let mut map = Self::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.split_once('=') {
                Some((c, m)) => {
                    let c: ComponentId = c.trim().parse().map_err(|e| LlmError::InvalidRequest(format!("{e}")))?;
                    map.components.insert(c, m.trim().to_string());
                }
                None => {
                    let overrides: BTreeMap<_, _> =
                        map.components.into_iter().filter(|(c, m)| Self::default().components.get(c) != Some(m)).collect();
                    map = Self { default: part.to_string(), components: overrides };
                }
            }
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_map_pairs() {
        let m = ModelMap::parse_pairs("gpt-4o, element_proposal=gpt-3.5-turbo").unwrap();
        assert_eq!(m.model_for(ComponentId::ElementProposal), "gpt-3.5-turbo");
        assert_eq!(m.model_for(ComponentId::EndState), "gpt-4o");
        assert!(ModelMap::parse_pairs("bogus=x").is_err());
    }

    #[test]
    fn request_bounds() {
        let mut r = CompletionRequest {
            component: ComponentId::EndState,
            model_id: "m".into(),
            system_text: String::new(),
            user_text: String::new(),
            image: None,
            temperature: 0.0,
            max_output_tokens: 10,
        };
        assert!(r.validate().is_ok());
        r.temperature = 2.5;
        assert!(r.validate().is_err());
    }
}
