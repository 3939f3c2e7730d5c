use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use webpilot_core::agent::{Agent, AgentConfig, RunBudget, TaskResult};
use webpilot_core::cache::{ActionCache, EvictionPolicy};
use webpilot_core::clock::SystemClock;
use webpilot_core::distill::{count_tokens, distill_document, render_indexed, ApproxTokenizer, DistillerConfig, Document, Locator};
use webpilot_core::driver::{
    BrowserDriver, DriverAction, DriverError, PageSnapshot, ReplayDriver, SelectOption, WebDriver, WebDriverConfig,
};
use webpilot_core::eval::{evaluate, load_trace, AgentPipeline, EvalOptions, LexicalPolicy, OraclePolicy, ProposalPolicy, TraceTask};
use webpilot_core::llm::{HttpBackend, HttpConfig, LlmBackend, ModelMap, ScriptedBackend};
use webpilot_core::pricing::PricingTable;
use webpilot_core::state::TemplateSet;

use crate::settings::{self, config_error, FileConfig};
use crate::{BackendArgs, BackendKind, DistillArgs, DriverKind, EvalArgs, ProposalKind, RunArgs};

const EXIT_OK: u8 = 0;
const EXIT_TASK_FAILED: u8 = 2;

fn distiller(file: &FileConfig) -> anyhow::Result<DistillerConfig> {
    match (&file.distiller, &file.path) {
        (Some(_), Some(path)) => DistillerConfig::load(path).map_err(|e| config_error(e.to_string())),
        _ => Ok(DistillerConfig::default()),
    }
}

fn agent_config(args: &BackendArgs, file: &FileConfig) -> anyhow::Result<AgentConfig> {
    let mut config = AgentConfig { distiller: distiller(file)?, ..AgentConfig::default() };
    if let Some(spec) = args.models.as_ref().or(file.models.as_ref()) {
        config.models = ModelMap::parse_pairs(spec).map_err(|e| config_error(format!("models: {e}")))?;
    }
    if let Some(path) = args.pricing.as_ref().or(file.pricing.as_ref()) {
        config.pricing = PricingTable::load(path).map_err(|e| config_error(e.to_string()))?;
    }
    if let Some(dir) = &file.templates {
        config.templates = TemplateSet::with_overrides(dir).map_err(|e| config_error(format!("{}: {e}", dir.display())))?;
    }
    config.upload_file = file.upload_file.clone();
    Ok(config)
}

fn backend(kind: BackendKind, script: Option<&Path>, file: &FileConfig) -> anyhow::Result<Arc<dyn LlmBackend>> {
    match kind {
        BackendKind::Scripted => {
            let path = script.ok_or_else(|| config_error("--backend scripted needs --script"))?;
            let b = ScriptedBackend::load(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            Ok(Arc::new(b))
        }
        BackendKind::Http => {
            let key = settings::env(settings::API_KEY_ENV)
                .ok_or_else(|| config_error(format!("the http backend needs {} in the environment", settings::API_KEY_ENV)))?;
            let endpoint = settings::env(settings::API_URL_ENV)
                .or_else(|| file.api_url.clone())
                .unwrap_or_else(|| settings::DEFAULT_API_URL.to_string());
            log::info!("chat endpoint {endpoint}");
            let b = HttpBackend::new(HttpConfig::new(endpoint, Some(key))).map_err(|e| config_error(e.to_string()))?;
            Ok(Arc::new(b))
        }
    }
}

fn backend_kind(args: &BackendArgs, file: &FileConfig) -> anyhow::Result<Option<BackendKind>> {
    if let Some(k) = args.backend {
        return Ok(Some(k));
    }
    file.backend
        .as_deref()
        .map(|s| match s {
            "http" => Ok(BackendKind::Http),
            "scripted" => Ok(BackendKind::Scripted),
            other => Err(config_error(format!("backend {other:?}: expected http or scripted"))),
        })
        .transpose()
}

/// Writes every real screenshot the agent sees into `dir`.
struct ScreenshotRecorder<D> {
    inner: D,
    dir: PathBuf,
    seq: usize,
}

impl<D: BrowserDriver> ScreenshotRecorder<D> {
    fn keep(&mut self, snap: &PageSnapshot) {
        let Some(png) = snap.screenshot.as_ref().filter(|_| !snap.placeholder_screenshot) else { return };
        self.seq += 1;
        let path = self.dir.join(format!("{:03}.png", self.seq));
        if let Err(e) = std::fs::create_dir_all(&self.dir).and_then(|_| std::fs::write(&path, png)) {
            log::warn!("{}: {e}", path.display());
        }
    }
}

impl<D: BrowserDriver> BrowserDriver for ScreenshotRecorder<D> {
    fn execute(&mut self, action: &DriverAction) -> Result<PageSnapshot, DriverError> {
        let snap = self.inner.execute(action)?;
        self.keep(&snap);
        Ok(snap)
    }
    fn snapshot(&mut self) -> Result<PageSnapshot, DriverError> {
        let snap = self.inner.snapshot()?;
        self.keep(&snap);
        Ok(snap)
    }
    fn list_options(&mut self, locator: &Locator) -> Result<Vec<SelectOption>, DriverError> {
        self.inner.list_options(locator)
    }
    fn tabs(&mut self) -> Result<Vec<String>, DriverError> {
        self.inner.tabs()
    }
    fn record_state(&mut self) -> Result<(), DriverError> {
        self.inner.record_state()
    }
    fn save_session(&mut self, dir: &Path) -> Result<(), DriverError> {
        self.inner.save_session(dir)
    }
}

fn open_cache(path: &Path, policy: Option<&str>) -> anyhow::Result<ActionCache> {
    let cache = ActionCache::load(path, Arc::new(SystemClock)).map_err(|e| config_error(e.to_string()))?;
    if let Some(p) = policy {
        let p: EvictionPolicy = p.parse().map_err(|e| config_error(format!("policy: {e}")))?;
        cache.set_policy(p);
    }
    Ok(cache)
}

pub fn run(args: RunArgs, file: &FileConfig) -> anyhow::Result<u8> {
    let goal = args.goal.clone().or_else(|| file.goal.clone()).ok_or_else(|| config_error("--goal is required"))?;
    let driver_kind = match (args.driver, file.driver.as_deref()) {
        (Some(d), _) => d,
        (None, Some("replay")) => DriverKind::Replay,
        (None, Some("live") | None) => DriverKind::Live,
        (None, Some(other)) => return Err(config_error(format!("driver {other:?}: expected live or replay"))),
    };
    let kind = backend_kind(&args.backend, file)?.unwrap_or(BackendKind::Http);
    let script = args.backend.script.clone().or_else(|| file.script.clone());
    let out = args.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("webpilot-out"));

    let mut config = agent_config(&args.backend, file)?;
    let defaults = RunBudget::default();
    config.budget = RunBudget {
        max_steps: args.budget_steps.or(file.budget_steps).unwrap_or(defaults.max_steps),
        max_retries_per_step: args.retries.or(file.retries).unwrap_or(defaults.max_retries_per_step),
        max_cost: args.max_cost.or(file.max_cost).unwrap_or(defaults.max_cost),
        wall_clock_limit: file.wall_clock_secs.map(Duration::from_secs).unwrap_or(defaults.wall_clock_limit),
    };

    let (driver, url): (Box<dyn BrowserDriver>, String) = match driver_kind {
        DriverKind::Replay => {
            let graph = args
                .graph
                .clone()
                .or_else(|| file.graph.clone())
                .ok_or_else(|| config_error("--driver replay needs --graph"))?;
            let d = ReplayDriver::load(&graph).map_err(|e| config_error(e.to_string()))?;
            let start = d.graph().nodes[&d.graph().start].url.clone();
            let url = args.url.clone().or_else(|| file.url.clone()).unwrap_or(start);
            (Box::new(d), url)
        }
        DriverKind::Live => {
            let url = args.url.clone().or_else(|| file.url.clone()).ok_or_else(|| config_error("--url is required"))?;
            let mut wd = WebDriverConfig::default();
            if let Some(server) = settings::env(settings::WEBDRIVER_ENV).or_else(|| file.webdriver_url.clone()) {
                wd.server_url = server;
            }
            wd.profile.headless = !args.headed && file.headless.unwrap_or(true);
            let d = WebDriver::connect(wd).map_err(|e| config_error(format!("webdriver: {e}")))?;
            (Box::new(d), url)
        }
    };
    let backend = backend(kind, script.as_deref(), file)?;

    std::fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
    let mut agent = Agent::new(backend, config)
        .map_err(|e| config_error(e.to_string()))?
        .write_transcript_to(out.join("transcript.jsonl"));
    if let Some(path) = args.cache.clone().or_else(|| file.cache.clone()) {
        let cache = open_cache(&path, args.policy.as_deref().or(file.policy.as_deref()))?;
        agent = agent.with_cache(Arc::new(cache)).persist_cache_to(path);
    }

    let mut recorder = ScreenshotRecorder { inner: driver, dir: out.join("screenshots"), seq: 0 };
    let result = agent.run_task(&mut recorder, &goal, &url);
    if let Err(e) = recorder.save_session(&out.join("session")) {
        log::warn!("session: {e}");
    }
    let json = serde_json::to_string_pretty(&result)?;
    std::fs::write(out.join("result.json"), format!("{json}\n")).with_context(|| out.display().to_string())?;
    println!("{json}");
    summarize(&result);
    Ok(if result.success { EXIT_OK } else { EXIT_TASK_FAILED })
}

fn summarize(result: &TaskResult) {
    for s in &result.steps {
        let what = s.description.as_deref().unwrap_or("-");
        eprintln!("step {:>2}  {:<5}  ${:.5}  {what}", s.step, format!("{:?}", s.source).to_lowercase(), s.cost.total_cost());
    }
    match &result.failure {
        None => eprintln!("done in {} steps, ${:.5}", result.steps.len(), result.total_cost),
        Some(f) => eprintln!("failed at step {}: {} ({}), ${:.5}", f.step, f.reason, f.message, result.total_cost),
    }
}

pub fn eval(args: EvalArgs, file: &FileConfig) -> anyhow::Result<u8> {
    let tasks = load_trace(&args.trace).map_err(|e| config_error(e.to_string()))?;
    let config = agent_config(&args.backend, file)?;
    let opts = EvalOptions {
        jobs: args.jobs.or(file.jobs).unwrap_or(1).max(1),
        distiller: config.distiller.clone(),
        ..EvalOptions::default()
    };
    let pipeline = match backend_kind(&args.backend, file)? {
        None => None,
        Some(BackendKind::Scripted) => {
            let per_task = args.scripts.clone();
            let shared = match &per_task {
                Some(_) => None,
                None => Some(backend(BackendKind::Scripted, args.backend.script.as_deref().or(file.script.as_deref()), file)?),
            };
            if let Some(dir) = &per_task {
                for t in &tasks {
                    let p = dir.join(&t.id).join("script.json");
                    ScriptedBackend::load(&p).map_err(|e| config_error(format!("{}: {e}", p.display())))?;
                }
            }
            Some(AgentPipeline::new(config, move |t: &TraceTask| match (&shared, &per_task) {
                (Some(b), _) => b.clone(),
                (None, Some(dir)) => {
                    Arc::new(ScriptedBackend::load(&dir.join(&t.id).join("script.json")).expect("checked above")) as Arc<dyn LlmBackend>
                }
                (None, None) => unreachable!(),
            }))
        }
        Some(BackendKind::Http) => {
            let b = backend(BackendKind::Http, None, file)?;
            Some(AgentPipeline::new(config, move |_: &TraceTask| b.clone()))
        }
    };
    let policy: &dyn ProposalPolicy = match args.proposals {
        ProposalKind::Lexical => &LexicalPolicy,
        ProposalKind::Oracle => &OraclePolicy,
    };
    let report = evaluate(&tasks, pipeline.as_ref().map(|p| p as _), policy, &opts);
    let json = report.to_json();
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).with_context(|| out.display().to_string())?;
        std::fs::write(out.join("report.json"), format!("{json}\n")).with_context(|| out.display().to_string())?;
    }
    println!("{json}");
    eprint!("{}", report.to_table());
    Ok(EXIT_OK)
}

pub fn distill(args: DistillArgs, file: &FileConfig) -> anyhow::Result<u8> {
    let config = distiller(file)?;
    let html = std::fs::read_to_string(&args.html).map_err(|e| config_error(format!("{}: {e}", args.html.display())))?;
    let doc = Document::parse(&html).map_err(|e| config_error(format!("{}: {e}", args.html.display())))?;
    let search = (!args.search.is_empty()).then_some(args.search.as_slice());
    let (elements, counts) = distill_document(&doc, search, &config).map_err(|e| anyhow::anyhow!("{e}"))?;
    let block = render_indexed(&elements);
    let raw_tokens = count_tokens(&html, &ApproxTokenizer);
    let distilled_tokens = count_tokens(&block, &ApproxTokenizer);
    if args.json {
        let v = serde_json::json!({
            "elements": elements,
            "counts": counts,
            "raw_chars": html.chars().count(),
            "raw_tokens": raw_tokens,
            "distilled_tokens": distilled_tokens,
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!("{}", block.trim_end_matches('\n'));
    }
    eprintln!(
        "{} elements ({} interactable), {raw_tokens} raw tokens -> {distilled_tokens} distilled",
        counts.distilled, counts.interactables
    );
    Ok(EXIT_OK)
}

fn cache_path(flag: Option<PathBuf>, file: &FileConfig) -> anyhow::Result<PathBuf> {
    flag.or_else(|| file.cache.clone()).ok_or_else(|| config_error("--cache is required"))
}

pub fn cache_list(flag: Option<PathBuf>, file: &FileConfig) -> anyhow::Result<u8> {
    let path = cache_path(flag, file)?;
    let cache = open_cache(&path, None)?;
    let entries = cache.entries();
    eprintln!("{:<28} {:<40} {:<14} {:>5}  last read", "base url", "description", "verb", "hits");
    for e in &entries {
        let desc: String = e.description.chars().take(40).collect();
        let verb = serde_json::to_value(e.verb)?.as_str().unwrap_or_default().to_string();
        eprintln!("{:<28} {desc:<40} {verb:<14} {:>5}  {}", e.base_url, e.hit_count, e.last_read_at.to_rfc3339());
    }
    eprintln!("{} of {} entries ({:?})", entries.len(), cache.cap(), cache.policy());
    println!("{}", serde_json::to_string_pretty(&entries)?);
    Ok(EXIT_OK)
}

pub fn cache_clear(flag: Option<PathBuf>, file: &FileConfig) -> anyhow::Result<u8> {
    let path = cache_path(flag, file)?;
    let cache = open_cache(&path, None)?;
    let n = cache.len();
    cache.clear();
    cache.persist(&path)?;
    eprintln!("removed {n} entries from {}", path.display());
    Ok(EXIT_OK)
}
