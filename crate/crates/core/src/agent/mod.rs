//! The per-step decision loop and the task runner around it.

mod components;
mod transcript;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::action::{ActionCommand, ActionVerb, SecondaryParam};
use crate::cache::{strip_base_url, ActionCache, CacheValue, StoreOutcome};
use crate::clock::{Clock, SystemClock};
use crate::component::ComponentId;
use crate::distill::{
    distill_document, extract_page_text, ApproxTokenizer, DistilledElement, DistillError, DistillerConfig, Document,
    Locator, Tokenizer,
};
use crate::driver::{placeholder_png, BrowserDriver, DriverAction, DriverError, SelectOption};
use crate::llm::{duration_ms, LlmBackend, ModelMap};
use crate::pricing::{PricingError, PricingTable};
use crate::state::{ActionDescription, PageState, TemplateSet};

pub use components::{fallback_keys, ComponentError, Components};
use components::{LlmMatcher, LlmValidator};
pub use transcript::{
    to_jsonl, write_jsonl, ActionSource, CallRecord, ComponentCost, CostLedger, Transcript, TranscriptEvent,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBudget {
    pub max_steps: usize,
    /// Proposal rounds allowed per step.
    pub max_retries_per_step: usize,
    /// USD.
    pub max_cost: f64,
    #[serde(with = "duration_ms", rename = "wall_clock_limit_ms")]
    pub wall_clock_limit: Duration,
}

impl Default for RunBudget {
    fn default() -> Self {
        Self { max_steps: 20, max_retries_per_step: 3, max_cost: 1.0, wall_clock_limit: Duration::from_secs(600) }
    }
}

impl RunBudget {
    /// `max_steps` may be zero, which ends a run right after the first visit.
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.max_retries_per_step == 0 {
            return Err(AgentError::Budget("max_retries_per_step must be positive".into()));
        }
        if !(self.max_cost.is_finite() && self.max_cost > 0.0) {
            return Err(AgentError::Budget("max_cost must be positive".into()));
        }
        if self.wall_clock_limit.is_zero() {
            return Err(AgentError::Budget("wall_clock_limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error("budget: {0}")]
    Budget(String),
}

#[derive(Clone)]
pub struct AgentConfig {
    pub distiller: DistillerConfig,
    pub templates: TemplateSet,
    pub models: ModelMap,
    pub pricing: PricingTable,
    pub budget: RunBudget,
    pub max_output_tokens: u32,
    pub max_search_keys: usize,
    pub max_proposals: usize,
    /// Characters of page text given to the page-context call.
    pub page_text_budget: usize,
    /// Above this many tokens the proposal prompt is split.
    pub prompt_token_budget: usize,
    /// File offered to upload_file actions.
    pub upload_file: Option<PathBuf>,
    pub tokenizer: Arc<dyn Tokenizer>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            distiller: DistillerConfig::default(),
            templates: TemplateSet::bundled(),
            models: ModelMap::default(),
            pricing: PricingTable::bundled(),
            budget: RunBudget::default(),
            max_output_tokens: 256,
            max_search_keys: 8,
            max_proposals: 15,
            page_text_budget: 4000,
            prompt_token_budget: 16_000,
            upload_file: None,
            tokenizer: Arc::new(ApproxTokenizer),
        }
    }
}

impl std::fmt::Debug for AgentConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentConfig")
            .field("models", &self.models)
            .field("budget", &self.budget)
            .field("max_proposals", &self.max_proposals)
            .field("upload_file", &self.upload_file)
            .finish_non_exhaustive()
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        self.distiller.validate()?;
        self.pricing.covers(&self.models)?;
        self.budget.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    ElementNotFound,
    ProposalEmpty,
    DoubleCheckRejected,
    ParseFailure,
    DriverError,
    BudgetExhausted,
    BackendError,
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| std::fmt::Error)?;
        f.write_str(v.as_str().unwrap_or("unknown"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("step {step} failed ({reason}): {message}")]
pub struct StepFailure {
    pub step: usize,
    pub reason: FailureReason,
    pub message: String,
    pub retries_used: usize,
    pub cost: CostLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutcome {
    pub step: usize,
    /// Element indexes refer to this step's distilled list; absent on hits.
    pub command: Option<ActionCommand>,
    pub action: Option<DriverAction>,
    pub description: Option<String>,
    pub source: ActionSource,
    pub terminal: bool,
    pub retries_used: usize,
    pub cost: CostLedger,
    #[serde(with = "duration_ms", rename = "elapsed_ms")]
    pub elapsed: Duration,
    pub llm_calls: usize,
    pub url_after: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskResult {
    pub goal: String,
    pub start_url: String,
    pub steps: Vec<StepOutcome>,
    pub success: bool,
    pub failure: Option<StepFailure>,
    pub total_cost: f64,
    pub cost: CostLedger,
    #[serde(skip)]
    pub transcript: Vec<TranscriptEvent>,
}

impl TaskResult {
    pub fn transcript_jsonl(&self) -> String {
        to_jsonl(&self.transcript)
    }
}

pub struct Agent {
    backend: Arc<dyn LlmBackend>,
    config: AgentConfig,
    cache: Option<Arc<ActionCache>>,
    cache_file: Option<PathBuf>,
    transcript_file: Option<PathBuf>,
    clock: Arc<dyn Clock>,
}

pub(crate) struct Failed {
    pub(crate) reason: FailureReason,
    pub(crate) message: String,
    pub(crate) retries_used: usize,
}

pub(crate) struct Decision {
    pub(crate) command: ActionCommand,
    pub(crate) element: DistilledElement,
    pub(crate) action: DriverAction,
    pub(crate) option_texts: Vec<String>,
    pub(crate) attempts: usize,
}

impl Failed {
    fn new(reason: FailureReason, message: impl Into<String>) -> Self {
        Self { reason, message: message.into(), retries_used: 0 }
    }

    fn retries(mut self, n: usize) -> Self {
        self.retries_used = n;
        self
    }
}

impl From<ComponentError> for Failed {
    fn from(e: ComponentError) -> Self {
        let reason = match &e {
            ComponentError::Llm(_) => FailureReason::BackendError,
            ComponentError::Parse { .. } | ComponentError::Empty(_) => FailureReason::ParseFailure,
            ComponentError::Template(_) | ComponentError::State(_) => FailureReason::ParseFailure,
        };
        Failed::new(reason, e.to_string())
    }
}

fn driver_failure(e: &DriverError) -> Failed {
    let reason = match e {
        DriverError::ElementNotFound { .. } => FailureReason::ElementNotFound,
        _ => FailureReason::DriverError,
    };
    Failed::new(reason, e.to_string())
}

/// The description recorded in the history: the candidate action plus any
/// typed or chosen value it does not already mention.
pub(crate) fn history_entry(candidate: &ActionDescription, secondary: Option<&SecondaryParam>, options: &[String]) -> ActionDescription {
    let mut d = candidate.clone();
    let value = match secondary {
        Some(SecondaryParam::Text(t)) => Some(t.clone()),
        Some(SecondaryParam::Options(ks)) => {
            ks.first().and_then(|k| options.get(k.wrapping_sub(1))).map(|s| s.trim().to_string())
        }
        _ => None,
    };
    if let Some(v) = value.filter(|v| !v.is_empty() && !d.description.contains(v.as_str())) {
        d.description = format!("{} \"{v}\"", d.description);
    }
    d
}

impl Agent {
    pub fn new(backend: Arc<dyn LlmBackend>, config: AgentConfig) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(Self { backend, config, cache: None, cache_file: None, transcript_file: None, clock: Arc::new(SystemClock) })
    }

    pub fn with_cache(mut self, cache: Arc<ActionCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Where the cache is written after each run.
    pub fn persist_cache_to(mut self, path: impl Into<PathBuf>) -> Self {
        self.cache_file = Some(path.into());
        self
    }

    pub fn write_transcript_to(mut self, path: impl Into<PathBuf>) -> Self {
        self.transcript_file = Some(path.into());
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub(crate) fn components<'a>(&'a self, transcript: &'a Transcript, step: usize) -> Components<'a> {
        Components { backend: self.backend.as_ref(), config: &self.config, transcript, step }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn cache(&self) -> Option<&Arc<ActionCache>> {
        self.cache.as_ref()
    }

    /// Visits `start_url`, then steps until the end-state check says yes,
    /// a step fails, or the budget runs out.
    pub fn run_task(&self, driver: &mut dyn BrowserDriver, goal: &str, start_url: &str) -> TaskResult {
        let transcript = Transcript::new(self.clock.clone());
        let started = Instant::now();
        let budget = self.config.budget;
        let mut steps: Vec<StepOutcome> = Vec::new();
        let mut failure = None;
        let mut state = PageState::new(goal, "", start_url);

        let visit = DriverAction::visit(start_url);
        let opened = match strip_base_url(start_url) {
            Err(e) => Err(Failed::new(FailureReason::DriverError, e.to_string())),
            Ok(_) => driver.execute(&visit).map_err(|e| {
                transcript.action(0, ActionSource::Llm, &visit, None, Some(e.to_string()));
                Failed::new(FailureReason::DriverError, e.to_string())
            }),
        };
        match opened {
            Ok(snap) => {
                transcript.action(0, ActionSource::Llm, &visit, Some(snap.url), None);
                if let Err(e) = driver.record_state() {
                    log::warn!("could not record page state: {e}");
                }
            }
            Err(f) => failure = Some(self.failure(0, f, &transcript)),
        }

        while failure.is_none() {
            let n = steps.len() + 1;
            let spent = transcript.events().iter().map(event_cost).sum::<f64>();
            let exhausted = if steps.len() >= budget.max_steps {
                Some(format!("step limit of {} reached", budget.max_steps))
            } else if spent >= budget.max_cost {
                Some(format!("cost ${spent:.4} reached the limit of ${:.4}", budget.max_cost))
            } else if started.elapsed() >= budget.wall_clock_limit {
                Some(format!("wall clock limit of {:?} reached", budget.wall_clock_limit))
            } else {
                None
            };
            if let Some(message) = exhausted {
                failure = Some(self.failure(n, Failed::new(FailureReason::BudgetExhausted, message), &transcript));
                break;
            }
            match self.step(driver, &mut state, &transcript, n) {
                Ok(outcome) => {
                    let terminal = outcome.terminal;
                    steps.push(outcome);
                    if terminal {
                        break;
                    }
                }
                Err(f) => failure = Some(self.failure(n, f, &transcript)),
            }
        }

        let success = failure.is_none() && steps.last().is_some_and(|s| s.terminal);
        if let (Some(cache), Some(path)) = (&self.cache, &self.cache_file) {
            if let Err(e) = cache.persist(path) {
                log::warn!("could not persist the action cache: {e}");
            }
        }
        let events = transcript.events();
        if let Some(path) = &self.transcript_file {
            if let Err(e) = write_jsonl(&events, path) {
                log::warn!("could not write the transcript to {}: {e}", path.display());
            }
        }
        let mut cost = CostLedger::default();
        for e in &events {
            if let TranscriptEvent::Llm { call, .. } = e {
                cost.add(call);
            }
        }
        TaskResult {
            goal: goal.to_string(),
            start_url: start_url.to_string(),
            steps,
            success,
            failure,
            total_cost: cost.total_cost(),
            cost,
            transcript: events,
        }
    }

    fn failure(&self, step: usize, f: Failed, transcript: &Transcript) -> StepFailure {
        StepFailure {
            step,
            reason: f.reason,
            message: f.message,
            retries_used: f.retries_used,
            cost: transcript.ledger_for(step),
        }
    }

    fn step(
        &self,
        driver: &mut dyn BrowserDriver,
        state: &mut PageState,
        transcript: &Transcript,
        n: usize,
    ) -> Result<StepOutcome, Failed> {
        let started = Instant::now();
        let cx = self.components(transcript, n);
        let snap = driver.snapshot().map_err(|e| driver_failure(&e))?;
        let url = snap.url.clone();
        state.current_url = url.clone();
        state.website = strip_base_url(&url).unwrap_or_else(|_| url.clone());
        state.candidate_action = None;
        state.candidate_elements.clear();
        let doc = Document::parse(&snap.html).map_err(|e| Failed::new(FailureReason::DriverError, e.to_string()))?;
        let page_text = extract_page_text(&doc, self.config.page_text_budget);
        let png = snap.screenshot.unwrap_or_else(placeholder_png);

        let outcome = |command, action, description, source, terminal, retries_used, url_after| StepOutcome {
            step: n,
            command,
            action,
            description,
            source,
            terminal,
            retries_used,
            cost: transcript.ledger_for(n),
            elapsed: started.elapsed(),
            llm_calls: transcript.ledger_for(n).calls(),
            url_after,
        };

        if let Some(cache) = &self.cache {
            let candidate = cx.screenshot_response(state, png)?;
            state.candidate_action = Some(candidate.clone());
            let hit = cache.lookup(&url, &candidate.description, &LlmMatcher { components: &cx, state });
            match hit {
                Some(hit) => {
                    transcript.cache(n, "hit", &hit.key.action_description);
                    let action =
                        DriverAction { verb: hit.verb, locator: Some(hit.locator.clone()), secondary: hit.secondary.clone() };
                    match driver.execute(&action) {
                        Ok(after) => {
                            transcript.action(n, ActionSource::Cache, &action, Some(after.url.clone()), None);
                            if let Err(e) = driver.record_state() {
                                log::warn!("could not record page state: {e}");
                            }
                            state.prior_actions.push(history_entry(&candidate, action.secondary.as_ref(), &[]));
                            let terminal = hit.terminal_for.iter().any(|g| *g == state.goal);
                            return Ok(outcome(
                                None,
                                Some(action),
                                Some(candidate.description),
                                ActionSource::Cache,
                                terminal,
                                0,
                                Some(after.url),
                            ));
                        }
                        Err(e) => {
                            transcript.action(n, ActionSource::Cache, &action, None, Some(e.to_string()));
                            if !matches!(e, DriverError::ElementNotFound { .. } | DriverError::AmbiguousLocator { .. }) {
                                return Err(driver_failure(&e));
                            }
                            cache.remove(&hit.key);
                            transcript.cache(n, "invalidated", &hit.key.action_description);
                        }
                    }
                }
                None => transcript.cache(n, "miss", &candidate.description),
            }
            state.page_context = cx.summarize_page_context(state, &page_text)?;
        } else {
            self.observe(&cx, state, &page_text, png)?;
        }
        let candidate = state.candidate_action.clone().expect("candidate set above");
        let Decision { command, element, action, option_texts, attempts } =
            self.decide(&cx, state, &doc, &mut |l| driver.list_options(l))?;
        let after = match driver.execute(&action) {
            Ok(a) => a,
            Err(e) => {
                transcript.action(n, ActionSource::Llm, &action, None, Some(e.to_string()));
                return Err(driver_failure(&e).retries(attempts));
            }
        };
        transcript.action(n, ActionSource::Llm, &action, Some(after.url.clone()), None);
        if let Err(e) = driver.record_state() {
            log::warn!("could not record page state: {e}");
        }
        state.prior_actions.push(history_entry(&candidate, action.secondary.as_ref(), &option_texts));

        let mut stored = false;
        if let Some(cache) = &self.cache {
            let value = CacheValue { verb: action.verb, locator: element.locator.clone(), secondary: action.secondary.clone() };
            match cache.store(&url, &candidate.description, value, &element.render(), &LlmValidator { components: &cx }) {
                Ok(StoreOutcome::Stored) => {
                    stored = true;
                    transcript.cache(n, "stored", &candidate.description);
                }
                Ok(StoreOutcome::Rejected) => transcript.cache(n, "rejected", &candidate.description),
                Err(e) => log::warn!("could not store the action: {e}"),
            }
        }

        let terminal = cx.check_end_state(state).map_err(|e| Failed::from(e).retries(attempts))?;
        if terminal && stored {
            if let Some(cache) = &self.cache {
                cache.mark_terminal(&url, &candidate.description, &state.goal);
            }
        }
        Ok(outcome(
            Some(command),
            Some(action),
            Some(candidate.description),
            ActionSource::Llm,
            terminal,
            attempts,
            Some(after.url),
        ))
    }

    /// Page context and candidate action, requested concurrently and
    /// logged in that order.
    pub(crate) fn observe(&self, cx: &Components, state: &mut PageState, page_text: &str, png: Vec<u8>) -> Result<(), Failed> {
        let context_prompt = cx.page_context_prompt(state, page_text)?;
        let shot_prompt = cx.screenshot_prompt(state)?;
        let (context, shot) = std::thread::scope(|s| {
            let c = s.spawn(|| cx.call_unlogged(ComponentId::PageContext, context_prompt, None));
            let r = cx.call_unlogged(ComponentId::ScreenshotResponse, shot_prompt, Some(png));
            (c.join().expect("page-context call panicked"), r)
        });
        let log = |r: Result<(String, CallRecord), _>| {
            r.map(|(text, rec)| {
                cx.transcript.llm(cx.step, rec);
                text
            })
        };
        let context = log(context);
        let shot = log(shot);
        state.page_context = Components::read_page_context(&context.map_err(ComponentError::from)?);
        state.candidate_action = Some(Components::read_screenshot_response(&shot.map_err(ComponentError::from)?)?);
        Ok(())
    }

    /// Everything from search keys to the secondary parameter, for the
    /// candidate action already in `state`. Nothing is executed.
    pub(crate) fn decide(
        &self,
        cx: &Components,
        state: &mut PageState,
        doc: &Document,
        list_options: &mut dyn FnMut(&Locator) -> Result<Vec<SelectOption>, DriverError>,
    ) -> Result<Decision, Failed> {
        let keys = cx.generate_search_keys(state)?;
        let (mut elements, _) = distill_document(doc, Some(&keys), &self.config.distiller)
            .map_err(|e| Failed::new(FailureReason::DriverError, e.to_string()))?;
        if elements.is_empty() {
            elements = distill_document(doc, None, &self.config.distiller)
                .map_err(|e| Failed::new(FailureReason::DriverError, e.to_string()))?
                .0;
        }
        if elements.is_empty() {
            return Err(Failed::new(FailureReason::ProposalEmpty, "the page has no interactable elements"));
        }
        state.candidate_elements = elements;

        let (mut command, attempts) = self.choose(cx, state)?;
        let element: DistilledElement = state
            .candidate_elements
            .iter()
            .find(|e| Some(e.index) == command.element_index)
            .cloned()
            .expect("selection is restricted to distilled indexes");

        let mut option_texts = Vec::new();
        let secondary = match command.verb {
            ActionVerb::TypeText => Some(SecondaryParam::Text(
                cx.secondary_text(state, &element).map_err(|e| Failed::from(e).retries(attempts))?,
            )),
            ActionVerb::SelectOption => {
                let options = list_options(&element.locator).map_err(|e| driver_failure(&e).retries(attempts))?;
                let k = cx.secondary_option(state, &options).map_err(|e| Failed::from(e).retries(attempts))?;
                option_texts = options.into_iter().map(|o| o.text).collect();
                Some(SecondaryParam::Options(vec![k]))
            }
            ActionVerb::UploadFile => match &self.config.upload_file {
                Some(p) => Some(SecondaryParam::FilePath(p.clone())),
                None => {
                    return Err(Failed::new(FailureReason::DriverError, "no upload file configured").retries(attempts))
                }
            },
            _ => None,
        };
        command.secondary = secondary.clone();
        let action = DriverAction { verb: command.verb, locator: Some(element.locator.clone()), secondary };
        Ok(Decision { command, element, action, option_texts, attempts })
    }

    /// Proposal rounds: propose, double-check, select. Each round uses one
    /// of the `n` attempts. Returns the command and the rounds used.
    fn choose(&self, cx: &Components, state: &PageState) -> Result<(ActionCommand, usize), Failed> {
        let n = self.config.budget.max_retries_per_step;
        let mut last = Failed::new(FailureReason::ProposalEmpty, "no proposal was made");
        for attempt in 1..=n {
            let proposed = match cx.propose_elements(state) {
                Ok(p) if !p.is_empty() => p,
                Ok(_) => {
                    last = Failed::new(FailureReason::ProposalEmpty, "the proposal named no valid element");
                    continue;
                }
                Err(ComponentError::Parse { source, .. }) => {
                    last = Failed::new(FailureReason::ProposalEmpty, format!("unreadable proposal: {source}"));
                    continue;
                }
                Err(e) => return Err(Failed::from(e).retries(attempt)),
            };
            match cx.double_check(state, &proposed) {
                Ok(true) => {}
                Ok(false) => {
                    last = Failed::new(FailureReason::DoubleCheckRejected, "the double check rejected the proposal");
                    continue;
                }
                Err(ComponentError::Parse { source, .. }) => {
                    last = Failed::new(FailureReason::ParseFailure, format!("unreadable double check: {source}"));
                    continue;
                }
                Err(e) => return Err(Failed::from(e).retries(attempt)),
            }
            match cx.select_action(state, &proposed) {
                Ok(Some(cmd)) => return Ok((cmd, attempt)),
                Ok(None) => last = Failed::new(FailureReason::ProposalEmpty, "selection declined every proposed element"),
                Err(e) => return Err(Failed::from(e).retries(attempt)),
            }
        }
        Err(last.retries(n))
    }
}

fn event_cost(e: &TranscriptEvent) -> f64 {
    match e {
        TranscriptEvent::Llm { call, .. } => call.cost,
        _ => 0.0,
    }
}
