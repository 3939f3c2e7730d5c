use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn webpilot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_webpilot"))
        .args(args)
        .env_remove("WEBPILOT_CONFIG")
        .env_remove("WEBPILOT_API_KEY")
        .env_remove("WEBPILOT_MODELS")
        .env_remove("WEBPILOT_MAX_COST")
        .output()
        .unwrap()
}

fn goal(task: &str) -> String {
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("tasks").join(task).join("task.json")).unwrap())
            .unwrap();
    v["goal"].as_str().unwrap().to_string()
}

fn replay_args(task: &str, out: &Path) -> Vec<String> {
    let dir = fixtures().join("tasks").join(task);
    [
        "run",
        "--goal",
        &goal(task),
        "--driver",
        "replay",
        "--graph",
        dir.to_str().unwrap(),
        "--backend",
        "scripted",
        "--script",
        dir.join("script.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]
    .map(String::from)
    .to_vec()
}

fn run(args: &[String]) -> Output {
    webpilot(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn replay_fixture_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&replay_args("cabelas", &out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let result: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(result["success"], true);
    assert_eq!(result["steps"].as_array().unwrap().len(), 4);
    let transcript = std::fs::read_to_string(out.join("transcript.jsonl")).unwrap();
    assert!(transcript.lines().count() > 4);
    assert!(out.join("result.json").exists());
    assert!(out.join("session").is_dir());
}

#[test]
fn replay_without_graph_is_a_usage_error() {
    let o = webpilot(&["run", "--goal", "g", "--driver", "replay", "--backend", "scripted", "--script", "x.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--graph"));
}

#[test]
fn exhausted_budget_is_a_task_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = replay_args("cabelas", &tmp.path().join("out"));
    args.extend(["--budget-steps".to_string(), "1".to_string()]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2));
    let result: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(result["failure"]["reason"], "budget_exhausted");
}

#[test]
fn config_file_then_env_then_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("webpilot.toml");
    std::fs::write(&cfg, "budget_steps = 1\nmax_cost = 0.000001\n").unwrap();
    let mut args = replay_args("cabelas", &tmp.path().join("out"));
    args.extend(["--config".to_string(), cfg.to_str().unwrap().to_string()]);
    // The file's tiny cost cap ends the run after one step.
    let o = run(&args);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["steps"].as_array().unwrap().len(), 1);
    // The environment lifts the cost cap; the file's step limit still applies.
    let o = Command::new(env!("CARGO_BIN_EXE_webpilot")).args(&args).env("WEBPILOT_MAX_COST", "5").output().unwrap();
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["failure"]["message"], "step limit of 1 reached");
    // A flag beats both.
    args.extend(["--budget-steps".to_string(), "10".to_string(), "--max-cost".to_string(), "5".to_string()]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn api_key_in_config_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("webpilot.toml");
    std::fs::write(&cfg, "api_key = \"sk-live-abc\"\n").unwrap();
    let o = webpilot(&["--config", cfg.to_str().unwrap(), "distill", fixtures().join("bargain_cave.html").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("WEBPILOT_API_KEY") && !err.contains("sk-live-abc"));
}

#[test]
fn http_backend_needs_the_env_key() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = replay_args("cabelas", &tmp.path().join("out"));
    let i = args.iter().position(|a| a == "scripted").unwrap();
    args[i] = "http".into();
    let o = run(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("WEBPILOT_API_KEY"));
}

#[test]
fn distill_prints_the_prompt_block() {
    let o = webpilot(&["distill", fixtures().join("bargain_cave.html").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("(1)\n<li class=\"hidden\" role=\"menuitem\">Bargain Cave</li>\n\n(2)\n<a "), "{text}");
    let o = webpilot(&["distill", "--json", "--search", "bargain", fixtures().join("bargain_cave.html").to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["counts"]["interactables"], 2);
    assert!(v["distilled_tokens"].as_u64().unwrap() < v["raw_tokens"].as_u64().unwrap());
}

#[test]
fn eval_writes_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = webpilot(&[
        "eval",
        "--trace",
        fixtures().join("traces/tasks.json").to_str().unwrap(),
        "--backend",
        "scripted",
        "--scripts",
        fixtures().join("tasks").to_str().unwrap(),
        "--jobs",
        "2",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["steps"], 11);
    assert_eq!(report["top1_rate"], 1.0);
    let on_disk: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(on_disk, report);
}

#[test]
fn eval_reports_trace_errors_with_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"[{"confirmed_task": "g"}]"#).unwrap();
    let o = webpilot(&["eval", "--trace", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json") && err.contains("/0/actions"), "{err}");
}

#[test]
fn cache_list_and_clear() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache.json");
    let o = webpilot(&["cache", "list", "--cache", cache.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap(), serde_json::json!([]));
    assert!(String::from_utf8_lossy(&o.stderr).contains("base url"));

    let mut args = replay_args("cabelas", &tmp.path().join("out"));
    args.extend(["--cache".to_string(), cache.to_str().unwrap().to_string()]);
    assert_eq!(run(&args).status.code(), Some(0));
    let o = webpilot(&["cache", "list", "--cache", cache.to_str().unwrap()]);
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap().as_array().unwrap().len(), 4);

    assert_eq!(webpilot(&["cache", "clear", "--cache", cache.to_str().unwrap()]).status.code(), Some(0));
    let o = webpilot(&["cache", "list", "--cache", cache.to_str().unwrap()]);
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap(), serde_json::json!([]));
}

#[test]
fn help_exits_zero_and_bad_usage_one() {
    assert_eq!(webpilot(&["--help"]).status.code(), Some(0));
    assert_eq!(webpilot(&["run", "--budget-steps", "lots"]).status.code(), Some(1));
}
