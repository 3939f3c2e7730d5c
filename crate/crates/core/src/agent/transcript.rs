use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::component::ComponentId;
use crate::driver::DriverAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSource {
    Llm,
    Cache,
}

/// One served completion, before it gets a place in the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub component: ComponentId,
    pub model: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost: f64,
    pub latency_ms: u64,
    pub response: String,
}

fn rfc3339<S: serde::Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptEvent {
    Llm {
        seq: usize,
        #[serde(serialize_with = "rfc3339")]
        ts: DateTime<Utc>,
        step: usize,
        #[serde(flatten)]
        call: CallRecord,
    },
    Action {
        seq: usize,
        #[serde(serialize_with = "rfc3339")]
        ts: DateTime<Utc>,
        step: usize,
        source: ActionSource,
        action: DriverAction,
        #[serde(skip_serializing_if = "Option::is_none")]
        url_after: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Cache {
        seq: usize,
        #[serde(serialize_with = "rfc3339")]
        ts: DateTime<Utc>,
        step: usize,
        event: &'static str,
        description: String,
    },
}

/// Running totals per component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ComponentCost {
    pub calls: usize,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost: f64,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CostLedger {
    pub by_component: BTreeMap<ComponentId, ComponentCost>,
}

impl CostLedger {
    pub fn add(&mut self, call: &CallRecord) {
        let c = self.by_component.entry(call.component).or_default();
        c.calls += 1;
        c.input_tokens += call.input_tokens;
        c.output_tokens += call.output_tokens;
        c.cost += call.cost;
        c.latency_ms += call.latency_ms;
    }

    pub fn total_cost(&self) -> f64 {
        self.by_component.values().map(|c| c.cost).sum()
    }

    pub fn calls(&self) -> usize {
        self.by_component.values().map(|c| c.calls).sum()
    }

    pub fn merge(&mut self, other: &CostLedger) {
        for (k, v) in &other.by_component {
            let c = self.by_component.entry(*k).or_default();
            c.calls += v.calls;
            c.input_tokens += v.input_tokens;
            c.output_tokens += v.output_tokens;
            c.cost += v.cost;
            c.latency_ms += v.latency_ms;
        }
    }
}

/// Ordered log of everything a run did. Timestamps come from the clock
/// when an event is appended, so appending order alone fixes them.
pub struct Transcript {
    clock: Arc<dyn Clock>,
    events: Mutex<Vec<TranscriptEvent>>,
}

impl std::fmt::Debug for Transcript {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transcript").field("events", &self.len()).finish()
    }
}

impl Transcript {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self { clock, events: Mutex::new(Vec::new()) }
    }

    fn push(&self, make: impl FnOnce(usize, DateTime<Utc>) -> TranscriptEvent) {
        let mut ev = self.events.lock().unwrap_or_else(|p| p.into_inner());
        let seq = ev.len();
        let ts = self.clock.now();
        ev.push(make(seq, ts));
    }

    pub fn llm(&self, step: usize, call: CallRecord) {
        self.push(|seq, ts| TranscriptEvent::Llm { seq, ts, step, call });
    }

    pub fn action(
        &self,
        step: usize,
        source: ActionSource,
        action: &DriverAction,
        url_after: Option<String>,
        error: Option<String>,
    ) {
        self.push(|seq, ts| TranscriptEvent::Action { seq, ts, step, source, action: action.clone(), url_after, error });
    }

    pub fn cache(&self, step: usize, event: &'static str, description: &str) {
        self.push(|seq, ts| TranscriptEvent::Cache { seq, ts, step, event, description: description.to_string() });
    }

    pub fn len(&self) -> usize {
        self.events.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn events(&self) -> Vec<TranscriptEvent> {
        self.events.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Cost of the LLM calls logged for `step`.
    pub fn ledger_for(&self, step: usize) -> CostLedger {
        let mut l = CostLedger::default();
        for e in self.events.lock().unwrap_or_else(|p| p.into_inner()).iter() {
            if let TranscriptEvent::Llm { step: s, call, .. } = e {
                if *s == step {
                    l.add(call);
                }
            }
        }
        l
    }

    pub fn to_jsonl(&self) -> String {
        to_jsonl(&self.events())
    }
}

pub fn to_jsonl(events: &[TranscriptEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("transcript event serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(events: &[TranscriptEvent], path: &Path) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, to_jsonl(events))
}
