use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};
use webpilot_core::driver::{BrowserDriver, DriverAction, WebDriver, WebDriverConfig};
use webpilot_core::distill::Locator;
use webpilot_core::{ActionVerb, SecondaryParam};

const KEY: &str = "element-6066-11e4-a52f-4abb-9a8c-91f5b70c1bf7";

type Log = Arc<Mutex<Vec<(String, String, Value)>>>;

/// A fake WebDriver server with one page and two windows.
struct Fake {
    url: String,
    log: Log,
    stop: Arc<AtomicBool>,
    handle: Option<thread::JoinHandle<()>>,
}

fn element(id: &str) -> Value {
    json!({ KEY: id })
}

fn route(method: &str, path: &str, body: &Value) -> (u16, Value) {
    let p = path.strip_prefix("/session/s1").unwrap_or(path);
    let v = match (method, p) {
        ("POST", "/session") => json!({"sessionId": "s1", "capabilities": {}}),
        ("POST", "/execute/sync") => {
            let script = body["script"].as_str().unwrap_or("");
            if script.contains("readyState") {
                json!(["complete", 4])
            } else if script.contains("options") {
                json!([["0", "Featured Items"], ["1", " Lowest Price "]])
            } else {
                json!({"local": {"cart": "1"}, "session": {}})
            }
        }
        ("POST", "/elements") => match body["value"].as_str().unwrap_or("") {
            "[id=\"go\"]" => json!([element("e-go")]),
            "select[name=\"sort\"]" => json!([element("e-sel")]),
            "a" => json!([element("e-a1"), element("e-a2")]),
            v if v.starts_with("//button") => json!([element("e-go")]),
            _ => json!([]),
        },
        ("POST", "/element/e-sel/elements") => json!([element("o1"), element("o2")]),
        ("GET", "/element/e-sel/name") => json!("select"),
        ("GET", p) if p.ends_with("/name") => json!("button"),
        ("GET", "/url") => json!("https://shop.test/"),
        ("GET", "/title") => json!("Shop"),
        ("GET", "/source") => json!("<html><body><button id=go>Go</button></body></html>"),
        ("GET", "/screenshot") => json!("iVBORw0KGgo="),
        ("GET", "/window/handles") => json!(["w1", "w2"]),
        ("GET", "/window") => json!("w1"),
        ("DELETE", "/window") => json!(["w1"]),
        ("GET", "/cookie") => json!([{"name": "sid", "value": "abc"}]),
        ("POST", "/url") if body["url"] == "https://slow.test/" => {
            return (500, json!({"value": {"error": "timeout", "message": "page load"}}))
        }
        (_, _) => Value::Null,
    };
    (200, json!({ "value": v }))
}

fn fake() -> Fake {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}", server.server_addr().to_ip().unwrap());
    let log: Log = Arc::default();
    let stop = Arc::new(AtomicBool::new(false));
    let (l, s) = (log.clone(), stop.clone());
    let handle = thread::spawn(move || {
        while !s.load(Ordering::SeqCst) {
            let Ok(Some(mut req)) = server.recv_timeout(Duration::from_millis(20)) else { continue };
            let mut text = String::new();
            req.as_reader().read_to_string(&mut text).unwrap();
            let body: Value = serde_json::from_str(&text).unwrap_or(Value::Null);
            let method = req.method().to_string().to_uppercase();
            let path = req.url().to_string();
            let (status, reply) = route(&method, &path, &body);
            l.lock().unwrap().push((method, path, body));
            let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
            req.respond(tiny_http::Response::from_string(reply.to_string()).with_status_code(status).with_header(header))
                .unwrap();
        }
    });
    Fake { url, log, stop, handle: Some(handle) }
}

impl Drop for Fake {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn connect(f: &Fake) -> WebDriver {
    let cfg = WebDriverConfig {
        server_url: f.url.clone(),
        network_idle: Duration::from_millis(10),
        navigation_timeout: Duration::from_secs(2),
        poll_interval: Duration::from_millis(5),
        ..WebDriverConfig::default()
    };
    WebDriver::connect(cfg).unwrap()
}

fn calls(f: &Fake, method: &str, suffix: &str) -> Vec<Value> {
    f.log.lock().unwrap().iter().filter(|(m, p, _)| m == method && p.ends_with(suffix)).map(|(_, _, b)| b.clone()).collect()
}

#[test]
fn visit_click_and_type() {
    let f = fake();
    let mut d = connect(&f);
    assert_eq!(d.session_id(), "s1");
    let snap = d.execute(&DriverAction::visit("https://shop.test/")).unwrap();
    assert_eq!((snap.title.as_str(), snap.screenshot.as_deref().map(<[u8]>::len)), ("Shop", Some(8)));
    d.execute(&DriverAction::on(ActionVerb::Click, Locator::Css { expression: "[id=\"go\"]".into() })).unwrap();
    assert_eq!(calls(&f, "POST", "/element/e-go/click").len(), 1);
    let text = Locator::Text { tag: "button".into(), text: "Go".into() };
    d.execute(&DriverAction::on(ActionVerb::TypeText, text.clone()).with_secondary(SecondaryParam::Text("tents".into())))
        .unwrap();
    assert_eq!(calls(&f, "POST", "/element/e-go/value")[0]["text"], "tents");
    d.execute(&DriverAction::on(ActionVerb::PressEnter, text)).unwrap();
    assert_eq!(calls(&f, "POST", "/element/e-go/value")[1]["text"], "\u{E007}");
    let new_session = &calls(&f, "POST", "/session")[0];
    assert!(new_session.pointer("/capabilities/alwaysMatch/goog:chromeOptions/args").is_some());
}

#[test]
fn locator_failures() {
    let f = fake();
    let mut d = connect(&f);
    let e = d.execute(&DriverAction::on(ActionVerb::Click, Locator::Css { expression: "#none".into() })).unwrap_err();
    assert_eq!(e.kind(), "element_not_found");
    let e = d.execute(&DriverAction::on(ActionVerb::Click, Locator::Css { expression: "a".into() })).unwrap_err();
    assert_eq!(e.kind(), "ambiguous_locator");
    let e = d.execute(&DriverAction::visit("https://slow.test/")).unwrap_err();
    assert_eq!(e.kind(), "navigation_timeout");
    let e = d.list_options(&Locator::Css { expression: "[id=\"go\"]".into() }).unwrap_err();
    assert_eq!(e.kind(), "not_a_select");
}

#[test]
fn select_by_position() {
    let f = fake();
    let mut d = connect(&f);
    let sel = Locator::Attributes { tag: "select".into(), attributes: vec![("name".into(), "sort".into())] };
    let opts = d.list_options(&sel).unwrap();
    assert_eq!(opts[1].text, "Lowest Price");
    d.execute(&DriverAction::on(ActionVerb::SelectOption, sel.clone()).with_secondary(SecondaryParam::Options(vec![2])))
        .unwrap();
    assert_eq!(calls(&f, "POST", "/element/o2/click").len(), 1);
    let e = d
        .execute(&DriverAction::on(ActionVerb::SelectOption, sel).with_secondary(SecondaryParam::Options(vec![3])))
        .unwrap_err();
    assert_eq!(e.kind(), "option_out_of_range");
}

#[test]
fn tabs_and_session_files() {
    let f = fake();
    let mut d = connect(&f);
    assert_eq!(d.tabs().unwrap(), vec!["Shop", "Shop"]);
    d.execute(&DriverAction::tab(ActionVerb::CloseTab, 2)).unwrap();
    assert_eq!(calls(&f, "DELETE", "/window").len(), 1);
    assert_eq!(d.execute(&DriverAction::tab(ActionVerb::SwitchTab, 5)).unwrap_err().kind(), "tab_not_found");
    d.record_state().unwrap();
    d.record_state().unwrap();
    let dir = tempfile::tempdir().unwrap();
    d.save_session(dir.path()).unwrap();
    assert!(dir.path().join("screenshots/step_002.png").exists());
    let cookies = std::fs::read_to_string(dir.path().join("cookies.json")).unwrap();
    assert!(cookies.contains("sid"));
    assert!(dir.path().join("storage.json").exists());
}

#[test]
fn session_closed_on_drop() {
    let f = fake();
    drop(connect(&f));
    assert_eq!(calls(&f, "DELETE", "/session/s1").len(), 1);
}
