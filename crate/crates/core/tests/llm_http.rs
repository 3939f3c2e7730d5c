use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use webpilot_core::llm::{CompletionRequest, HttpBackend, HttpConfig, LlmBackend, LlmError, RetryPolicy};
use webpilot_core::ComponentId;

struct Stub {
    url: String,
    seen: Arc<Mutex<Vec<(String, Option<String>)>>>,
    handle: Option<thread::JoinHandle<()>>,
}

/// Serves the scripted (status, body) replies in order, then stops.
fn stub(replies: Vec<(u16, &'static str)>) -> Stub {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", server.server_addr().to_ip().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let handle = thread::spawn(move || {
        for (status, body) in replies {
            let Ok(mut req) = server.recv() else { return };
            let mut text = String::new();
            req.as_reader().read_to_string(&mut text).unwrap();
            let auth = req.headers().iter().find(|h| h.field.equiv("Authorization")).map(|h| h.value.to_string());
            log.lock().unwrap().push((text, auth));
            let resp = tiny_http::Response::from_string(body).with_status_code(status);
            req.respond(resp).unwrap();
        }
    });
    Stub { url, seen, handle: Some(handle) }
}

impl Drop for Stub {
    fn drop(&mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn backend(url: &str, attempts: u32) -> HttpBackend {
    let mut cfg = HttpConfig::new(url, Some("test-key".into()));
    cfg.retry = RetryPolicy { max_attempts: attempts, base_delay: Duration::from_millis(5), max_delay: Duration::from_millis(20) };
    cfg.timeout = Duration::from_secs(5);
    HttpBackend::new(cfg).unwrap()
}

fn request() -> CompletionRequest {
    CompletionRequest {
        component: ComponentId::ElementProposal,
        model_id: "gpt-3.5-turbo".into(),
        system_text: "sys".into(),
        user_text: "pick elements".into(),
        image: None,
        temperature: 0.0,
        max_output_tokens: 64,
    }
}

const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"ELEMENTS [3, 1]"}}],"usage":{"prompt_tokens":120,"completion_tokens":6}}"#;
const OK_NO_USAGE: &str = r#"{"choices":[{"message":{"role":"assistant","content":"abcdefgh"}}]}"#;

#[test]
fn rate_limit_then_success() {
    let s = stub(vec![(429, "slow down"), (200, OK)]);
    let r = backend(&s.url, 3).complete(&request()).unwrap();
    assert_eq!(r.text, "ELEMENTS [3, 1]");
    assert_eq!((r.input_tokens, r.output_tokens), (120, 6));
    assert!(r.latency >= Duration::from_millis(5), "latency includes the backoff");
    let seen = s.seen.lock().unwrap().clone();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[0].1.as_deref(), Some("Bearer test-key"));
    let body: serde_json::Value = serde_json::from_str(&seen[0].0).unwrap();
    assert_eq!(body["model"], "gpt-3.5-turbo");
    assert_eq!(body["messages"][1]["content"], "pick elements");
}

#[test]
fn server_errors_exhaust_after_exactly_n_attempts() {
    let s = stub(vec![(503, ""), (502, ""), (500, "")]);
    let err = backend(&s.url, 3).complete(&request()).unwrap_err();
    assert_eq!(err, LlmError::Server { status: 500, attempts: 3 });
    assert_eq!(s.seen.lock().unwrap().len(), 3);
}

#[test]
fn auth_failure_is_not_retried() {
    let s = stub(vec![(401, "bad key")]);
    assert_eq!(backend(&s.url, 3).complete(&request()).unwrap_err(), LlmError::Auth(401));
    assert_eq!(s.seen.lock().unwrap().len(), 1);
}

#[test]
fn missing_usage_falls_back_to_estimates() {
    let s = stub(vec![(200, OK_NO_USAGE)]);
    let r = backend(&s.url, 1).complete(&request()).unwrap();
    // "sys" -> 1, "pick elements" -> 4, "abcdefgh" -> 2
    assert_eq!((r.input_tokens, r.output_tokens), (5, 2));
}

#[test]
fn image_is_sent_as_data_url() {
    let s = stub(vec![(200, OK)]);
    let mut req = request();
    req.image = Some(vec![0x89, b'P', b'N', b'G']);
    backend(&s.url, 1).complete(&req).unwrap();
    let body: serde_json::Value = serde_json::from_str(&s.seen.lock().unwrap()[0].0).unwrap();
    let url = body["messages"][1]["content"][1]["image_url"]["url"].as_str().unwrap();
    assert!(url.starts_with("data:image/png;base64,"));
}
