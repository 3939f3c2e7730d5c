use std::sync::Arc;
use std::time::{Duration, Instant};

use base64::Engine;
use serde_json::{json, Value};

use super::{CompletionRequest, CompletionResponse, LlmBackend, LlmError};
use crate::distill::{ApproxTokenizer, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, base_delay: Duration::from_millis(500), max_delay: Duration::from_secs(8) }
    }
}

impl RetryPolicy {
    /// Wait before attempt `attempt + 1`, where `attempt` counts from 1.
    pub fn delay_after(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.saturating_sub(1));
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Clone)]
pub struct HttpConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl std::fmt::Debug for HttpConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpConfig")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("timeout", &self.timeout)
            .field("retry", &self.retry)
            .finish()
    }
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self { endpoint: endpoint.into(), api_key, timeout: Duration::from_secs(120), retry: RetryPolicy::default() }
    }
}

/// Chat-completions client over blocking HTTP.
pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    tokenizer: Arc<dyn Tokenizer>,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend").field("config", &self.config).finish_non_exhaustive()
    }
}

enum Failure {
    Retry(LlmError),
    Fatal(LlmError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, LlmError> {
        url::Url::parse(&config.endpoint).map_err(|e| LlmError::InvalidRequest(format!("endpoint: {e}")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| LlmError::InvalidRequest(e.to_string()))?;
        Ok(Self { config, client, tokenizer: Arc::new(ApproxTokenizer) })
    }

    pub fn with_tokenizer(mut self, tokenizer: Arc<dyn Tokenizer>) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    fn body(request: &CompletionRequest) -> Value {
        let user = match &request.image {
            Some(png) => {
                let data = base64::engine::general_purpose::STANDARD.encode(png);
                json!([
                    {"type": "text", "text": request.user_text},
                    {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{data}")}}
                ])
            }
            None => Value::String(request.user_text.clone()),
        };
        let mut messages = Vec::new();
        if !request.system_text.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_text}));
        }
        messages.push(json!({"role": "user", "content": user}));
        json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        })
    }

    fn attempt(&self, body: &Value, attempt: u32) -> Result<Value, Failure> {
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => {
                let retryable = e.is_timeout() || e.is_connect() || e.is_request();
                let err = LlmError::Transport { message: e.without_url().to_string(), attempts: attempt };
                return Err(if retryable { Failure::Retry(err) } else { Failure::Fatal(err) });
            }
        };
        let status = resp.status().as_u16();
        match status {
            200..=299 => resp.json::<Value>().map_err(|e| Failure::Fatal(LlmError::Decode(e.to_string()))),
            401 | 403 => Err(Failure::Fatal(LlmError::Auth(status))),
            429 => Err(Failure::Retry(LlmError::RateLimited { attempts: attempt })),
            408 | 500..=599 => Err(Failure::Retry(LlmError::Server { status, attempts: attempt })),
            _ => {
                let message: String = resp.text().unwrap_or_default().chars().take(300).collect();
                Err(Failure::Fatal(LlmError::Rejected { status, message }))
            }
        }
    }

    fn decode(&self, request: &CompletionRequest, value: &Value, latency: Duration) -> Result<CompletionResponse, LlmError> {
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| LlmError::Decode("missing choices[0].message.content".into()))?
            .to_string();
        let usage = |k: &str| value.pointer(&format!("/usage/{k}")).and_then(Value::as_u64);
        let input_tokens = usage("prompt_tokens").unwrap_or_else(|| {
            (self.tokenizer.count(&request.system_text) + self.tokenizer.count(&request.user_text)) as u64
        });
        let output_tokens = usage("completion_tokens").unwrap_or_else(|| self.tokenizer.count(&text) as u64);
        Ok(CompletionResponse { text, input_tokens, output_tokens, latency })
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        request.validate()?;
        let body = Self::body(request);
        let started = Instant::now();
        let max = self.config.retry.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match self.attempt(&body, attempt) {
                Ok(value) => return self.decode(request, &value, started.elapsed()),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(e)) => {
                    if attempt >= max {
                        return Err(e);
                    }
                    log::warn!("{} call failed on attempt {attempt}: {e}; retrying", request.component);
                    std::thread::sleep(self.config.retry.delay_after(attempt));
                    attempt += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay_after(1), Duration::from_millis(500));
        assert_eq!(p.delay_after(2), Duration::from_millis(1000));
        assert_eq!(p.delay_after(3), Duration::from_millis(2000));
        assert_eq!(p.delay_after(40), Duration::from_secs(8));
    }

    #[test]
    fn key_is_redacted_in_debug() {
        let c = HttpConfig::new("http://localhost:1/v1/chat/completions", Some("sk-secret".into()));
        assert!(!format!("{c:?}").contains("sk-secret"));
    }
}
