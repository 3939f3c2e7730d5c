use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::action::ActionVerb;

/// Everything measured for one trace step. Report rates are recomputable
/// from these records alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub task_id: String,
    pub step_index: usize,
    pub action_uid: String,
    /// The ground-truth node exists in the recorded HTML.
    pub gt_found: bool,
    pub gt_in_filtered: bool,
    /// 1-based position of the ground truth in the proposal ranking.
    pub gt_rank: Option<usize>,
    pub gt_verb: ActionVerb,
    pub predicted_verb: Option<ActionVerb>,
    pub predicted_path: Option<Vec<usize>>,
    pub top1: bool,
    /// Present when the step has an expected text or option.
    pub text_expected: Option<String>,
    pub text_predicted: Option<String>,
    pub text_match: Option<bool>,
    pub near_miss_parent: bool,
    pub near_miss_child: bool,
    pub cost: f64,
    pub runtime_ms: u64,
    pub llm_calls: usize,
    pub raw_chars: usize,
    pub raw_tokens: usize,
    pub distilled_tokens: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Distribution {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl Distribution {
    /// Summary of `values`; the median of an even count is the mean of the
    /// two middle values. All zero when empty.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        Self { count: n, min: v[0], median, mean: v.iter().sum::<f64>() / n as f64, max: v[n - 1] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TokenStats {
    pub pages: usize,
    pub median_raw_chars: f64,
    pub median_raw_tokens: f64,
    pub median_distilled_tokens: f64,
    /// Median over pages of raw tokens divided by distilled tokens.
    pub median_reduction: f64,
}

impl TokenStats {
    /// From (raw chars, raw tokens, distilled tokens) per page.
    pub fn of(pages: &[(usize, usize, usize)]) -> Self {
        let col = |f: fn(&(usize, usize, usize)) -> f64| Distribution::of(&pages.iter().map(f).collect::<Vec<_>>()).median;
        Self {
            pages: pages.len(),
            median_raw_chars: col(|p| p.0 as f64),
            median_raw_tokens: col(|p| p.1 as f64),
            median_distilled_tokens: col(|p| p.2 as f64),
            median_reduction: col(|p| p.1 as f64 / p.2.max(1) as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: u32,
    pub tasks: usize,
    pub steps: usize,
    /// Set when nothing was evaluated; every rate is then 0.
    pub empty: bool,
    pub gt_in_filtered_rate: f64,
    pub recall_at: BTreeMap<usize, f64>,
    pub top1_rate: f64,
    pub text_steps: usize,
    pub text_match_rate: f64,
    pub near_miss_parent: usize,
    pub near_miss_child: usize,
    pub per_step_cost: Distribution,
    pub per_step_runtime_ms: Distribution,
    pub tokens: TokenStats,
    pub records: Vec<StepRecord>,
}

fn rate(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

impl MetricsReport {
    pub fn from_records(tasks: usize, records: Vec<StepRecord>, recall_ns: &[usize]) -> Self {
        let n = records.len();
        let count = |f: &dyn Fn(&StepRecord) -> bool| records.iter().filter(|r| f(r)).count();
        let text: Vec<&StepRecord> = records.iter().filter(|r| r.text_match.is_some()).collect();
        let recall_at = recall_ns
            .iter()
            .map(|&k| (k, rate(count(&|r| r.gt_rank.is_some_and(|g| g <= k)), n)))
            .collect();
        let tokens: Vec<_> = records.iter().map(|r| (r.raw_chars, r.raw_tokens, r.distilled_tokens)).collect();
        Self {
            version: 1,
            tasks,
            steps: n,
            empty: n == 0,
            gt_in_filtered_rate: rate(count(&|r| r.gt_in_filtered), n),
            recall_at,
            top1_rate: rate(count(&|r| r.top1), n),
            text_steps: text.len(),
            text_match_rate: rate(text.iter().filter(|r| r.text_match == Some(true)).count(), text.len()),
            near_miss_parent: count(&|r| r.near_miss_parent),
            near_miss_child: count(&|r| r.near_miss_child),
            per_step_cost: Distribution::of(&records.iter().map(|r| r.cost).collect::<Vec<_>>()),
            per_step_runtime_ms: Distribution::of(&records.iter().map(|r| r.runtime_ms as f64).collect::<Vec<_>>()),
            tokens: TokenStats::of(&tokens),
            records,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text summary table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let pct = |x: f64| format!("{:.2}%", x * 100.0);
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k:<32} {v:>12}");
        };
        row("tasks", self.tasks.to_string());
        row("steps", self.steps.to_string());
        row("GT element in filtered list", pct(self.gt_in_filtered_rate));
        for (k, v) in &self.recall_at {
            row(&format!("recall@{k}"), format!("{v:.4}"));
        }
        row("element + action (top-1)", pct(self.top1_rate));
        row(&format!("text field match ({} steps)", self.text_steps), pct(self.text_match_rate));
        row("near misses (parent / child)", format!("{} / {}", self.near_miss_parent, self.near_miss_child));
        row("median cost per step", format!("${:.5}", self.per_step_cost.median));
        row("median runtime per step", format!("{:.0} ms", self.per_step_runtime_ms.median));
        row("median raw chars", format!("{:.0}", self.tokens.median_raw_chars));
        row("median raw tokens", format!("{:.0}", self.tokens.median_raw_tokens));
        row("median distilled tokens", format!("{:.0}", self.tokens.median_distilled_tokens));
        if self.empty {
            row("note", "nothing evaluated".into());
        }
        out
    }
}
