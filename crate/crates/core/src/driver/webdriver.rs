use std::path::Path;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BrowserDriver, BrowserProfile, DriverAction, DriverError, PageSnapshot, SelectOption};
use crate::action::{ActionVerb, SecondaryParam};
use crate::distill::Locator;

const ELEMENT_KEY: &str = "element-6066-11e4-a52f-4abb-9a8c-91f5b70c1bf7";
const ENTER_KEY: &str = "\u{E007}";

const LOAD_PROBE: &str = "return [document.readyState, performance.getEntriesByType('resource').length];";
const OPTIONS_SCRIPT: &str = "return Array.from(arguments[0].options).map(o => [o.value, o.text]);";
const STORAGE_SCRIPT: &str = "const dump = s => Object.fromEntries(Object.keys(s).map(k => [k, s.getItem(k)]));\
                              return {local: dump(localStorage), session: dump(sessionStorage)};";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WebDriverConfig {
    /// Base URL of the WebDriver server, e.g. `http://127.0.0.1:9515`.
    pub server_url: String,
    pub browser_name: String,
    pub profile: BrowserProfile,
    pub proxy: Option<String>,
    /// Quiet period with no new requests that counts as loaded.
    #[serde(with = "crate::llm::duration_ms")]
    pub network_idle: Duration,
    #[serde(with = "crate::llm::duration_ms")]
    pub navigation_timeout: Duration,
    #[serde(with = "crate::llm::duration_ms")]
    pub poll_interval: Duration,
}

impl Default for WebDriverConfig {
    fn default() -> Self {
        Self {
            server_url: "http://127.0.0.1:9515".into(),
            browser_name: "chrome".into(),
            profile: BrowserProfile::default(),
            proxy: None,
            network_idle: Duration::from_millis(500),
            navigation_timeout: Duration::from_secs(30),
            poll_interval: Duration::from_millis(100),
        }
    }
}

impl WebDriverConfig {
    fn capabilities(&self) -> Value {
        let p = &self.profile;
        let mut args = vec![
            format!("--user-agent={}", p.user_agent),
            format!("--window-size={},{}", p.viewport.width, p.viewport.height),
            format!("--lang={}", p.locale),
            "--disable-blink-features=AutomationControlled".to_string(),
        ];
        if p.headless {
            args.push("--headless=new".into());
        }
        let mut caps = json!({
            "browserName": self.browser_name,
            "goog:chromeOptions": {
                "args": args,
                "excludeSwitches": ["enable-automation"],
                "prefs": {"intl.accept_languages": p.locale},
            },
        });
        if let Some(proxy) = &self.proxy {
            caps["proxy"] = json!({"proxyType": "manual", "httpProxy": proxy, "sslProxy": proxy});
        }
        json!({"capabilities": {"alwaysMatch": caps}})
    }
}

/// Live browser over the W3C WebDriver HTTP protocol.
pub struct WebDriver {
    config: WebDriverConfig,
    client: reqwest::blocking::Client,
    session: String,
    screenshots: Vec<Vec<u8>>,
}

impl std::fmt::Debug for WebDriver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WebDriver").field("server", &self.config.server_url).field("session", &self.session).finish()
    }
}

#[derive(Clone, Copy)]
enum Method {
    Get,
    Post,
    Delete,
}

fn map_error(status: u16, body: &Value) -> DriverError {
    let code = body.pointer("/value/error").and_then(Value::as_str).unwrap_or("");
    let message = body.pointer("/value/message").and_then(Value::as_str).unwrap_or("");
    match code {
        "no such window" | "invalid session id" => DriverError::PageClosed,
        "timeout" => DriverError::NavigationTimeout { url: message.to_string() },
        "no such element" | "stale element reference" => DriverError::ElementNotFound { locator: message.to_string() },
        _ => DriverError::Protocol(format!("HTTP {status} {code}: {message}")),
    }
}

impl WebDriver {
    /// Opens a new browser session.
    pub fn connect(config: WebDriverConfig) -> Result<Self, DriverError> {
        config.profile.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.navigation_timeout + Duration::from_secs(30))
            .build()
            .map_err(|e| DriverError::Protocol(e.to_string()))?;
        let mut driver = Self { config, client, session: String::new(), screenshots: Vec::new() };
        let value = driver.raw(Method::Post, "/session".into(), Some(driver.config.capabilities()))?;
        driver.session = value
            .get("sessionId")
            .and_then(Value::as_str)
            .ok_or_else(|| DriverError::Protocol("new session reply lacks sessionId".into()))?
            .to_string();
        if !driver.config.profile.extra_headers.is_empty() {
            let headers = driver.config.profile.extra_headers.clone();
            let set = driver
                .cmd(Method::Post, "/goog/cdp/execute", Some(json!({"cmd": "Network.enable", "params": {}})))
                .and_then(|_| {
                    driver.cmd(
                        Method::Post,
                        "/goog/cdp/execute",
                        Some(json!({"cmd": "Network.setExtraHTTPHeaders", "params": {"headers": headers}})),
                    )
                });
            if let Err(e) = set {
                log::warn!("browser does not accept extra headers: {e}");
            }
        }
        Ok(driver)
    }

    pub fn session_id(&self) -> &str {
        &self.session
    }

    fn raw(&self, method: Method, path: String, body: Option<Value>) -> Result<Value, DriverError> {
        let url = format!("{}{path}", self.config.server_url.trim_end_matches('/'));
        let req = match method {
            Method::Get => self.client.get(&url),
            Method::Post => self.client.post(&url).json(&body.unwrap_or_else(|| json!({}))),
            Method::Delete => self.client.delete(&url),
        };
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                DriverError::NavigationTimeout { url: url.clone() }
            } else {
                DriverError::Protocol(e.without_url().to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let value: Value = resp.json().map_err(|e| DriverError::Protocol(format!("bad reply: {e}")))?;
        if !(200..300).contains(&status) {
            return Err(map_error(status, &value));
        }
        Ok(value.get("value").cloned().unwrap_or(Value::Null))
    }

    fn cmd(&self, method: Method, path: &str, body: Option<Value>) -> Result<Value, DriverError> {
        self.raw(method, format!("/session/{}{path}", self.session), body)
    }

    fn script(&self, script: &str, args: Vec<Value>) -> Result<Value, DriverError> {
        self.cmd(Method::Post, "/execute/sync", Some(json!({"script": script, "args": args})))
    }

    fn find_all(&self, scope: Option<&str>, using: &str, value: &str) -> Result<Vec<String>, DriverError> {
        let path = match scope {
            Some(id) => format!("/element/{id}/elements"),
            None => "/elements".into(),
        };
        let found = self.cmd(Method::Post, &path, Some(json!({"using": using, "value": value})))?;
        Ok(found
            .as_array()
            .map(|a| a.iter().filter_map(|e| e.get(ELEMENT_KEY).and_then(Value::as_str)).map(str::to_string).collect())
            .unwrap_or_default())
    }

    fn locate(&self, locator: &Locator) -> Result<String, DriverError> {
        let (using, value) = match (locator.to_css(), locator.to_xpath()) {
            (Some(css), _) => ("css selector", css),
            (None, Some(xpath)) => ("xpath", xpath),
            (None, None) => return Err(DriverError::InvalidAction(format!("cannot address {locator}"))),
        };
        let mut found = self.find_all(None, using, &value)?;
        match found.len() {
            0 => Err(DriverError::ElementNotFound { locator: locator.to_string() }),
            1 => Ok(found.remove(0)),
            count => Err(DriverError::AmbiguousLocator { locator: locator.to_string(), count }),
        }
    }

    fn require_select(&self, id: &str, locator: &Locator) -> Result<(), DriverError> {
        let name = self.cmd(Method::Get, &format!("/element/{id}/name"), None)?;
        if name.as_str().is_some_and(|n| n.eq_ignore_ascii_case("select")) {
            Ok(())
        } else {
            Err(DriverError::NotASelect { locator: locator.to_string() })
        }
    }

    fn send_keys(&self, id: &str, text: &str) -> Result<(), DriverError> {
        self.cmd(Method::Post, &format!("/element/{id}/value"), Some(json!({"text": text}))).map(|_| ())
    }

    /// Waits until the document is complete and no new resources have
    /// started for the configured quiet period.
    fn wait_idle(&self, url: &str) -> Result<(), DriverError> {
        let deadline = Instant::now() + self.config.navigation_timeout;
        let mut last: Option<(i64, Instant)> = None;
        loop {
            let probe = self.script(LOAD_PROBE, vec![])?;
            let complete = probe.get(0).and_then(Value::as_str) == Some("complete");
            let count = probe.get(1).and_then(Value::as_i64).unwrap_or(-1);
            let now = Instant::now();
            match last {
                Some((c, since)) if complete && c == count => {
                    if now.duration_since(since) >= self.config.network_idle {
                        return Ok(());
                    }
                }
                _ => last = Some((count, now)),
            }
            if now >= deadline {
                return Err(DriverError::NavigationTimeout { url: url.to_string() });
            }
            std::thread::sleep(self.config.poll_interval);
        }
    }

    fn handles(&self) -> Result<Vec<String>, DriverError> {
        let v = self.cmd(Method::Get, "/window/handles", None)?;
        Ok(v.as_array().map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect()).unwrap_or_default())
    }

    fn handle_at(&self, secondary: &Option<SecondaryParam>) -> Result<(Vec<String>, String), DriverError> {
        let handles = self.handles()?;
        match secondary {
            Some(SecondaryParam::Tab(k)) if *k >= 1 && *k <= handles.len() => {
                let h = handles[k - 1].clone();
                Ok((handles, h))
            }
            Some(SecondaryParam::Tab(k)) => Err(DriverError::TabNotFound(*k)),
            _ => Err(DriverError::InvalidAction("tab verbs need a tab index".into())),
        }
    }

    fn switch_to(&self, handle: &str) -> Result<(), DriverError> {
        self.cmd(Method::Post, "/window", Some(json!({"handle": handle}))).map(|_| ())
    }

    fn perform(&self, action: &DriverAction) -> Result<(), DriverError> {
        match action.verb {
            ActionVerb::VisitUrl => {
                let Some(SecondaryParam::Url(url)) = &action.secondary else { unreachable!("validated") };
                self.cmd(Method::Post, "/url", Some(json!({"url": url})))?;
                return self.wait_idle(url);
            }
            ActionVerb::SwitchTab => {
                let (_, h) = self.handle_at(&action.secondary)?;
                return self.switch_to(&h);
            }
            ActionVerb::CloseTab => {
                let (handles, h) = self.handle_at(&action.secondary)?;
                let current = self.cmd(Method::Get, "/window", None)?.as_str().unwrap_or_default().to_string();
                self.switch_to(&h)?;
                self.cmd(Method::Delete, "/window", None)?;
                let next = if current != h { Some(current) } else { handles.into_iter().rev().find(|x| *x != h) };
                return match next {
                    Some(n) => self.switch_to(&n),
                    None => Err(DriverError::PageClosed),
                };
            }
            _ => {}
        }
        let locator = action.locator.as_ref().expect("validated");
        let id = self.locate(locator)?;
        match (action.verb, &action.secondary) {
            (ActionVerb::Click, _) => {
                self.cmd(Method::Post, &format!("/element/{id}/click"), None)?;
            }
            (ActionVerb::TypeText, Some(SecondaryParam::Text(t))) => {
                self.cmd(Method::Post, &format!("/element/{id}/clear"), None)?;
                self.send_keys(&id, t)?;
            }
            (ActionVerb::PressEnter, _) => self.send_keys(&id, ENTER_KEY)?,
            (ActionVerb::UploadFile, Some(SecondaryParam::FilePath(p))) => self.send_keys(&id, &p.to_string_lossy())?,
            (ActionVerb::SelectOption, Some(SecondaryParam::Options(picked))) => {
                self.require_select(&id, locator)?;
                let options = self.find_all(Some(&id), "css selector", "option")?;
                if let Some(&bad) = picked.iter().find(|&&k| k == 0 || k > options.len()) {
                    return Err(DriverError::OptionOutOfRange { index: bad, count: options.len() });
                }
                for k in picked {
                    self.cmd(Method::Post, &format!("/element/{}/click", options[k - 1]), None)?;
                }
            }
            _ => unreachable!("validated"),
        }
        // a click may or may not navigate; a slow settle is not an error here
        if let Err(e) = self.wait_idle("") {
            log::debug!("page did not settle after {}: {e}", action.verb);
        }
        Ok(())
    }

    fn screenshot(&self) -> Result<Vec<u8>, DriverError> {
        let b64 = self.cmd(Method::Get, "/screenshot", None)?;
        base64::engine::general_purpose::STANDARD
            .decode(b64.as_str().unwrap_or_default())
            .map_err(|e| DriverError::Protocol(format!("screenshot: {e}")))
    }
}

impl Drop for WebDriver {
    fn drop(&mut self) {
        if !self.session.is_empty() {
            let _ = self.raw(Method::Delete, format!("/session/{}", self.session), None);
        }
    }
}

impl BrowserDriver for WebDriver {
    fn execute(&mut self, action: &DriverAction) -> Result<PageSnapshot, DriverError> {
        action.validate()?;
        self.perform(action)?;
        self.snapshot()
    }

    fn snapshot(&mut self) -> Result<PageSnapshot, DriverError> {
        let text = |v: Value| v.as_str().unwrap_or_default().to_string();
        Ok(PageSnapshot {
            url: text(self.cmd(Method::Get, "/url", None)?),
            title: text(self.cmd(Method::Get, "/title", None)?),
            html: text(self.cmd(Method::Get, "/source", None)?),
            screenshot: Some(self.screenshot()?),
            placeholder_screenshot: false,
        })
    }

    fn list_options(&mut self, locator: &Locator) -> Result<Vec<SelectOption>, DriverError> {
        let id = self.locate(locator)?;
        self.require_select(&id, locator)?;
        let pairs = self.script(OPTIONS_SCRIPT, vec![json!({ELEMENT_KEY: id})])?;
        Ok(pairs
            .as_array()
            .map(|a| {
                a.iter()
                    .map(|p| SelectOption {
                        value: p.get(0).and_then(Value::as_str).unwrap_or_default().to_string(),
                        text: p.get(1).and_then(Value::as_str).unwrap_or_default().trim().to_string(),
                    })
                    .collect()
            })
            .unwrap_or_default())
    }

    fn tabs(&mut self) -> Result<Vec<String>, DriverError> {
        let current = self.cmd(Method::Get, "/window", None)?.as_str().unwrap_or_default().to_string();
        let mut titles = Vec::new();
        for h in self.handles()? {
            self.switch_to(&h)?;
            titles.push(self.cmd(Method::Get, "/title", None)?.as_str().unwrap_or_default().to_string());
        }
        self.switch_to(&current)?;
        Ok(titles)
    }

    fn record_state(&mut self) -> Result<(), DriverError> {
        let png = self.screenshot()?;
        self.screenshots.push(png);
        Ok(())
    }

    /// Writes cookies, web storage and one screenshot per recorded action.
    fn save_session(&mut self, dir: &Path) -> Result<(), DriverError> {
        let shots = dir.join("screenshots");
        std::fs::create_dir_all(&shots).map_err(|e| DriverError::io(&shots, e))?;
        for (i, png) in self.screenshots.iter().enumerate() {
            let p = shots.join(format!("step_{:03}.png", i + 1));
            std::fs::write(&p, png).map_err(|e| DriverError::io(&p, e))?;
        }
        let cookies = self.cmd(Method::Get, "/cookie", None)?;
        let storage = self.script(STORAGE_SCRIPT, vec![])?;
        for (name, value) in [("cookies.json", cookies), ("storage.json", storage)] {
            let p = dir.join(name);
            let text = serde_json::to_string_pretty(&value).expect("json value serializes");
            std::fs::write(&p, text).map_err(|e| DriverError::io(&p, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capabilities_follow_profile() {
        let mut cfg = WebDriverConfig::default();
        cfg.profile.headless = true;
        cfg.proxy = Some("http://proxy:3128".into());
        let caps = cfg.capabilities();
        let args = caps.pointer("/capabilities/alwaysMatch/goog:chromeOptions/args").unwrap().as_array().unwrap();
        assert!(args.iter().any(|a| a.as_str().unwrap().starts_with("--user-agent=Mozilla/5.0")));
        assert!(args.iter().any(|a| a == "--headless=new"));
        assert!(args.iter().any(|a| a == "--window-size=1366,768"));
        assert_eq!(caps.pointer("/capabilities/alwaysMatch/proxy/httpProxy").unwrap(), "http://proxy:3128");
    }

    #[test]
    fn error_codes() {
        let body = json!({"value": {"error": "no such window", "message": "gone"}});
        assert_eq!(map_error(404, &body).kind(), "page_closed");
        let body = json!({"value": {"error": "unknown error", "message": "x"}});
        assert_eq!(map_error(500, &body).kind(), "protocol");
    }
}
