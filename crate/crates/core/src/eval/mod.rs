//! Offline evaluation over recorded traces.

mod report;
mod trace;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::action::{ActionVerb, SecondaryParam};
use crate::agent::{history_entry, Agent, AgentConfig, Transcript};
use crate::cache::strip_base_url;
use crate::clock::LogicalClock;
use crate::distill::{
    distill_document, extract_page_text, render_indexed, ApproxTokenizer, DistilledElement, DistillerConfig, Document,
    NodePath, Tokenizer,
};
use crate::driver::{placeholder_png, select_options};
use crate::llm::LlmBackend;
use crate::state::PageState;

pub use report::{Distribution, MetricsReport, StepRecord, TokenStats};
pub use trace::{ground_truth_path, load_trace, parse_trace, TraceError, TraceStep, TraceTask};

/// Ranks distilled elements for one step, best first, by element index.
pub trait ProposalPolicy: Sync {
    fn rank(&self, step: &TraceStep, doc: &Document, elements: &[DistilledElement]) -> Vec<usize>;
}

fn gt_index(step: &TraceStep, doc: &Document, elements: &[DistilledElement]) -> Option<usize> {
    let path = ground_truth_path(doc, step)?;
    elements.iter().find(|e| e.node_path == path).map(|e| e.index)
}

/// Puts the ground truth first.
pub struct OraclePolicy;

impl ProposalPolicy for OraclePolicy {
    fn rank(&self, step: &TraceStep, doc: &Document, elements: &[DistilledElement]) -> Vec<usize> {
        let gt = gt_index(step, doc, elements);
        gt.into_iter().chain(elements.iter().map(|e| e.index).filter(|i| Some(*i) != gt)).collect()
    }
}

/// Ranks everything except the ground truth.
pub struct AdversarialPolicy;

impl ProposalPolicy for AdversarialPolicy {
    fn rank(&self, step: &TraceStep, doc: &Document, elements: &[DistilledElement]) -> Vec<usize> {
        let gt = gt_index(step, doc, elements);
        elements.iter().map(|e| e.index).filter(|i| Some(*i) != gt).collect()
    }
}

/// Rankings given per action uid. Steps without one rank nothing.
#[derive(Debug, Clone, Default)]
pub struct FixedPolicy(pub BTreeMap<String, Vec<usize>>);

impl ProposalPolicy for FixedPolicy {
    fn rank(&self, step: &TraceStep, _doc: &Document, _elements: &[DistilledElement]) -> Vec<usize> {
        self.0.get(&step.action_uid).cloned().unwrap_or_default()
    }
}

/// Word overlap between the task and the rendered element. Ties keep
/// document order.
pub struct LexicalPolicy;

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| w.len() > 2).map(str::to_lowercase).collect()
}

impl ProposalPolicy for LexicalPolicy {
    fn rank(&self, step: &TraceStep, _doc: &Document, elements: &[DistilledElement]) -> Vec<usize> {
        let goal = words(&step.task);
        let mut scored: Vec<(usize, usize)> = elements
            .iter()
            .map(|e| {
                let hay = e.render().to_lowercase();
                (goal.iter().filter(|w| hay.contains(w.as_str())).count(), e.index)
            })
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.into_iter().map(|(_, i)| i).collect()
    }
}

/// What a pipeline chose for one step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Prediction {
    pub verb: Option<ActionVerb>,
    pub path: Option<NodePath>,
    /// Typed text, or the text of the chosen option.
    pub text: Option<String>,
    pub cost: f64,
    pub runtime: Duration,
    pub llm_calls: usize,
    pub failure: Option<String>,
}

pub trait Pipeline: Sync {
    /// One prediction per step, in order.
    fn predict(&self, task: &TraceTask) -> Vec<Prediction>;
}

type BackendFactory = dyn Fn(&TraceTask) -> Arc<dyn LlmBackend> + Send + Sync;

/// The agent's decision path without a browser: each recorded page is
/// observed and decided on, and the decision joins the history.
pub struct AgentPipeline {
    config: AgentConfig,
    backend_for: Box<BackendFactory>,
}

impl AgentPipeline {
    pub fn new(config: AgentConfig, backend_for: impl Fn(&TraceTask) -> Arc<dyn LlmBackend> + Send + Sync + 'static) -> Self {
        Self { config, backend_for: Box::new(backend_for) }
    }
}

impl Pipeline for AgentPipeline {
    fn predict(&self, task: &TraceTask) -> Vec<Prediction> {
        let agent = match Agent::new((self.backend_for)(task), self.config.clone()) {
            Ok(a) => a,
            Err(e) => {
                let p = Prediction { failure: Some(e.to_string()), ..Default::default() };
                return vec![p; task.steps.len()];
            }
        };
        let transcript = Transcript::new(Arc::new(LogicalClock::fixed()));
        let mut state = PageState::new(&task.goal, "", "");
        let mut out = Vec::with_capacity(task.steps.len());
        for (i, step) in task.steps.iter().enumerate() {
            let n = i + 1;
            let started = Instant::now();
            let cx = agent.components(&transcript, n);
            let url = step.url.clone().unwrap_or_default();
            state.website = strip_base_url(&url).unwrap_or_else(|_| task.website.clone());
            state.current_url = url;
            state.candidate_action = None;
            state.candidate_elements.clear();
            let mut p = Prediction::default();
            match Document::parse(&step.raw_html) {
                Err(e) => p.failure = Some(e.to_string()),
                Ok(doc) => {
                    let page_text = extract_page_text(&doc, self.config.page_text_budget);
                    let decided = agent
                        .observe(&cx, &mut state, &page_text, placeholder_png())
                        .and_then(|_| agent.decide(&cx, &mut state, &doc, &mut |l| select_options(&doc, l)));
                    match decided {
                        Ok(d) => {
                            p.verb = Some(d.command.verb);
                            p.path = Some(d.element.node_path.clone());
                            p.text = match &d.action.secondary {
                                Some(SecondaryParam::Text(t)) => Some(t.clone()),
                                Some(SecondaryParam::Options(ks)) => {
                                    ks.first().and_then(|k| d.option_texts.get(k.wrapping_sub(1))).cloned()
                                }
                                _ => None,
                            };
                            let candidate = state.candidate_action.clone().expect("decided on a candidate");
                            state.prior_actions.push(history_entry(&candidate, d.action.secondary.as_ref(), &d.option_texts));
                        }
                        Err(f) => p.failure = Some(format!("{}: {}", f.reason, f.message)),
                    }
                }
            }
            let ledger = transcript.ledger_for(n);
            p.cost = ledger.total_cost();
            p.llm_calls = ledger.calls();
            p.runtime = started.elapsed();
            out.push(p);
        }
        out
    }
}

#[derive(Clone)]
pub struct EvalOptions {
    pub recall_at: Vec<usize>,
    /// Tasks evaluated at once.
    pub jobs: usize,
    pub distiller: DistillerConfig,
    pub tokenizer: Arc<dyn Tokenizer>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            recall_at: vec![1, 5, 10, 15, 50],
            jobs: 1,
            distiller: DistillerConfig::default(),
            tokenizer: Arc::new(ApproxTokenizer),
        }
    }
}

/// Whether the ground-truth element survives distillation of the step's
/// page (no search-string limiting).
pub fn eval_filtering(step: &TraceStep, config: &DistillerConfig) -> bool {
    let Ok(doc) = Document::parse(&step.raw_html) else { return false };
    let Ok((elements, _)) = distill_document(&doc, None, config) else { return false };
    gt_index(step, &doc, &elements).is_some()
}

/// Fraction of steps whose ground truth is among the policy's first `n`.
pub fn eval_proposal_recall(steps: &[TraceStep], policy: &dyn ProposalPolicy, n: usize, config: &DistillerConfig) -> f64 {
    if steps.is_empty() {
        return 0.0;
    }
    let hits = steps
        .iter()
        .filter(|step| {
            let Ok(doc) = Document::parse(&step.raw_html) else { return false };
            let Ok((elements, _)) = distill_document(&doc, None, config) else { return false };
            match gt_index(step, &doc, &elements) {
                Some(gt) => policy.rank(step, &doc, &elements).iter().take(n).any(|i| *i == gt),
                None => false,
            }
        })
        .count();
    hits as f64 / steps.len() as f64
}

pub fn eval_top1(records: &[StepRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.top1).count() as f64 / records.len() as f64
}

pub fn eval_text_match(records: &[StepRecord]) -> f64 {
    let with: Vec<_> = records.iter().filter_map(|r| r.text_match).collect();
    if with.is_empty() {
        return 0.0;
    }
    with.iter().filter(|m| **m).count() as f64 / with.len() as f64
}

/// Character count, raw tokens and distilled tokens of one page.
pub fn page_token_counts(html: &str, config: &DistillerConfig, tokenizer: &dyn Tokenizer) -> (usize, usize, usize) {
    let distilled = Document::parse(html)
        .ok()
        .and_then(|doc| distill_document(&doc, None, config).ok())
        .map(|(els, _)| tokenizer.count(&render_indexed(&els)))
        .unwrap_or(0);
    (html.chars().count(), tokenizer.count(html), distilled)
}

fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap_or_else(|p| p.into_inner()).into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn record_task(
    task: &TraceTask,
    pipeline: Option<&dyn Pipeline>,
    policy: &dyn ProposalPolicy,
    opts: &EvalOptions,
) -> Vec<StepRecord> {
    let predictions = pipeline.map(|p| p.predict(task)).unwrap_or_default();
    task.steps
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let pred = predictions.get(i).cloned().unwrap_or_default();
            let doc = Document::parse(&step.raw_html).ok();
            let gt_path = doc.as_ref().and_then(|d| ground_truth_path(d, step));
            let elements = doc
                .as_ref()
                .and_then(|d| distill_document(d, None, &opts.distiller).ok())
                .map(|(e, _)| e)
                .unwrap_or_default();
            let gt = doc.as_ref().and_then(|d| gt_index(step, d, &elements));
            let gt_rank = match (gt, &doc) {
                (Some(g), Some(d)) => policy.rank(step, d, &elements).iter().position(|i| *i == g).map(|p| p + 1),
                _ => None,
            };
            let top1 = gt_path.is_some() && pred.path == gt_path && pred.verb == Some(step.gt_verb);
            let (near_miss_parent, near_miss_child) = match (&pred.path, &gt_path) {
                (Some(p), Some(g)) if p != g && p.is_adjacent_to(g) => (p.is_ancestor_of(g), g.is_ancestor_of(p)),
                _ => (false, false),
            };
            let text_match = step.gt_text.as_ref().map(|t| pred.text.as_ref().is_some_and(|p| p.trim() == t.trim()));
            StepRecord {
                task_id: task.id.clone(),
                step_index: step.step_index,
                action_uid: step.action_uid.clone(),
                gt_found: gt_path.is_some(),
                gt_in_filtered: gt.is_some(),
                gt_rank,
                gt_verb: step.gt_verb,
                predicted_verb: pred.verb,
                predicted_path: pred.path.map(|p| p.0),
                top1,
                text_expected: step.gt_text.clone(),
                text_predicted: pred.text,
                text_match,
                near_miss_parent,
                near_miss_child,
                cost: pred.cost,
                runtime_ms: pred.runtime.as_millis() as u64,
                llm_calls: pred.llm_calls,
                raw_chars: step.raw_html.chars().count(),
                raw_tokens: opts.tokenizer.count(&step.raw_html),
                distilled_tokens: opts.tokenizer.count(&render_indexed(&elements)),
                failure: pred.failure,
            }
        })
        .collect()
}

/// Evaluates every task, `opts.jobs` at a time, and aggregates in task
/// order. Without a pipeline only filtering, recall and token figures are
/// meaningful.
pub fn evaluate(
    tasks: &[TraceTask],
    pipeline: Option<&dyn Pipeline>,
    policy: &dyn ProposalPolicy,
    opts: &EvalOptions,
) -> MetricsReport {
    let per_task = par_map(tasks, opts.jobs, |t| record_task(t, pipeline, policy, opts));
    MetricsReport::from_records(tasks.len(), per_task.into_iter().flatten().collect(), &opts.recall_at)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(html: &str, id: &str) -> TraceStep {
        TraceStep {
            task: "open the menu".into(),
            step_index: 0,
            action_uid: "u".into(),
            url: None,
            raw_html: html.into(),
            gt_node_id: id.into(),
            gt_verb: ActionVerb::Click,
            gt_text: None,
        }
    }

    #[test]
    fn filtering() {
        let c = DistillerConfig::default();
        assert!(eval_filtering(&step(r#"<button backend_node_id="1">Menu</button>"#, "1"), &c));
        assert!(!eval_filtering(&step(r#"<div backend_node_id="1">Menu</div>"#, "1"), &c));
    }

    #[test]
    fn oracle_and_adversary() {
        let c = DistillerConfig::default();
        let s = vec![step(r#"<a href="/a" backend_node_id="1">A</a><a href="/b" backend_node_id="2">B</a>"#, "2")];
        assert_eq!(eval_proposal_recall(&s, &OraclePolicy, 1, &c), 1.0);
        assert_eq!(eval_proposal_recall(&s, &AdversarialPolicy, 15, &c), 0.0);
    }

    #[test]
    fn pool_keeps_order() {
        let v: Vec<usize> = (0..50).collect();
        assert_eq!(par_map(&v, 4, |x| x * 2), v.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
