use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, CompletionResponse, LlmBackend, LlmError};
use crate::component::ComponentId;
use crate::distill::{ApproxTokenizer, Tokenizer};

/// One canned answer. It matches a request when the component agrees (or is
/// unset) and every substring occurs in the request text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedExpectation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<ComponentId>,
    #[serde(default)]
    pub match_substrings: Vec<String>,
    pub response: String,
    #[serde(default)]
    pub once: bool,
}

impl ScriptedExpectation {
    pub fn new(component: ComponentId, response: impl Into<String>) -> Self {
        Self { component: Some(component), match_substrings: vec![], response: response.into(), once: false }
    }

    pub fn matching(mut self, s: impl Into<String>) -> Self {
        self.match_substrings.push(s.into());
        self
    }

    pub fn once(mut self) -> Self {
        self.once = true;
        self
    }

    fn matches(&self, req: &CompletionRequest) -> bool {
        if self.component.is_some_and(|c| c != req.component) {
            return false;
        }
        self.match_substrings.iter().all(|s| req.user_text.contains(s.as_str()) || req.system_text.contains(s.as_str()))
    }
}

/// A served scripted call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedCall {
    pub component: ComponentId,
    pub model_id: String,
    pub expectation: usize,
    pub has_image: bool,
    pub response: String,
}

struct Inner {
    expectations: Vec<(ScriptedExpectation, bool)>,
    transcript: Vec<ScriptedCall>,
}

/// Deterministic test double that answers from a script.
pub struct ScriptedBackend {
    inner: Mutex<Inner>,
    tokenizer: Arc<dyn Tokenizer>,
}

impl std::fmt::Debug for ScriptedBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScriptedBackend").finish_non_exhaustive()
    }
}

impl ScriptedBackend {
    pub fn new(expectations: Vec<ScriptedExpectation>) -> Self {
        Self::with_tokenizer(expectations, Arc::new(ApproxTokenizer))
    }

    pub fn with_tokenizer(expectations: Vec<ScriptedExpectation>, tokenizer: Arc<dyn Tokenizer>) -> Self {
        let expectations = expectations.into_iter().map(|e| (e, false)).collect();
        Self { inner: Mutex::new(Inner { expectations, transcript: Vec::new() }), tokenizer }
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        let list: Vec<ScriptedExpectation> = serde_json::from_str(text).map_err(|e| LlmError::Script(e.to_string()))?;
        if let Some(i) = list.iter().position(|e| e.response.is_empty()) {
            return Err(LlmError::Script(format!("expectation {i} has an empty response")));
        }
        Ok(Self::new(list))
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| LlmError::Script(format!("{}: {e}", path.display())))
    }

    pub fn transcript(&self) -> Vec<ScriptedCall> {
        self.inner.lock().expect("scripted backend lock").transcript.clone()
    }

    pub fn call_count(&self) -> usize {
        self.inner.lock().expect("scripted backend lock").transcript.len()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        request.validate()?;
        let mut inner = self.inner.lock().expect("scripted backend lock");
        let Some(idx) = inner.expectations.iter().position(|(e, used)| !*used && e.matches(request)) else {
            return Err(LlmError::NoMatchingExpectation { component: request.component });
        };
        let (exp, used) = &mut inner.expectations[idx];
        if exp.once {
            *used = true;
        }
        let text = exp.response.clone();
        inner.transcript.push(ScriptedCall {
            component: request.component,
            model_id: request.model_id.clone(),
            expectation: idx,
            has_image: request.image.is_some(),
            response: text.clone(),
        });
        drop(inner);
        let input_tokens = (self.tokenizer.count(&request.system_text) + self.tokenizer.count(&request.user_text)) as u64;
        let output_tokens = self.tokenizer.count(&text) as u64;
        Ok(CompletionResponse { text, input_tokens, output_tokens, latency: Duration::ZERO })
    }
}
