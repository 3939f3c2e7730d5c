use std::path::PathBuf;
use std::sync::Arc;

use webpilot_core::agent::AgentConfig;
use webpilot_core::distill::{ApproxTokenizer, DistillerConfig};
use webpilot_core::eval::{
    eval_filtering, eval_proposal_recall, eval_text_match, eval_top1, evaluate, load_trace, page_token_counts,
    AgentPipeline, EvalOptions, FixedPolicy, LexicalPolicy, MetricsReport, OraclePolicy, TokenStats, TraceTask,
};
use webpilot_core::llm::{LlmBackend, ScriptedBackend};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn trace() -> Vec<TraceTask> {
    load_trace(&fixtures().join("traces/tasks.json")).unwrap()
}

fn scripted_pipeline() -> AgentPipeline {
    AgentPipeline::new(AgentConfig::default(), |t: &TraceTask| {
        let path = fixtures().join("tasks").join(&t.id).join("script.json");
        Arc::new(ScriptedBackend::load(&path).unwrap()) as Arc<dyn LlmBackend>
    })
}

#[test]
fn fixture_trace_shape() {
    let tasks = trace();
    assert_eq!(tasks.len(), 3);
    assert_eq!(tasks.iter().map(|t| t.steps.len()).sum::<usize>(), 11);
    for t in &tasks {
        assert!(t.steps.iter().enumerate().all(|(i, s)| s.step_index == i));
    }
}

#[test]
fn scripted_oracle_scores_perfectly() {
    let tasks = trace();
    let report = evaluate(&tasks, Some(&scripted_pipeline()), &OraclePolicy, &EvalOptions::default());
    assert_eq!(report.steps, 11);
    assert_eq!(report.top1_rate, 1.0, "{}", report.to_json());
    assert_eq!(report.text_steps, 4);
    assert_eq!(report.text_match_rate, 1.0);
    assert_eq!(report.gt_in_filtered_rate, 1.0);
    assert_eq!(report.recall_at[&1], 1.0);
    assert_eq!((eval_top1(&report.records), eval_text_match(&report.records)), (1.0, 1.0));
    assert!(report.per_step_cost.median > 0.0);
}

#[test]
fn pool_matches_serial() {
    let tasks = trace();
    let serial = evaluate(&tasks, Some(&scripted_pipeline()), &LexicalPolicy, &EvalOptions::default());
    let pooled = evaluate(&tasks, Some(&scripted_pipeline()), &LexicalPolicy, &EvalOptions { jobs: 3, ..Default::default() });
    let strip = |mut r: MetricsReport| {
        r.per_step_runtime_ms = Default::default();
        r.records.iter_mut().for_each(|x| x.runtime_ms = 0);
        r
    };
    assert_eq!(strip(serial), strip(pooled));
}

#[test]
fn filtering_and_recall_by_recount() {
    let tasks = trace();
    let steps: Vec<_> = tasks.iter().flat_map(|t| t.steps.clone()).collect();
    let config = DistillerConfig::default();
    assert!(steps.iter().all(|s| eval_filtering(s, &config)));
    // Two of eleven steps get the ground truth as their only ranked element.
    let mut fixed = FixedPolicy::default();
    for uid in ["macys-1", "newegg-3"] {
        let s = steps.iter().find(|s| s.action_uid == uid).unwrap();
        let doc = webpilot_core::distill::Document::parse(&s.raw_html).unwrap();
        let (els, _) = webpilot_core::distill::distill_document(&doc, None, &config).unwrap();
        let gt_path = webpilot_core::eval::ground_truth_path(&doc, s).unwrap();
        fixed.0.insert(uid.into(), vec![els.iter().find(|e| e.node_path == gt_path).unwrap().index]);
    }
    assert_eq!(eval_proposal_recall(&steps, &fixed, 5, &config), 2.0 / 11.0);
    let report = evaluate(&tasks, None, &fixed, &EvalOptions::default());
    assert_eq!(report.recall_at[&5], 2.0 / 11.0);
    assert_eq!(report.top1_rate, 0.0);
}

#[test]
fn report_validates_against_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("../schemas/report.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::JSONSchema::compile(&schema).unwrap();
    let report = evaluate(&trace(), Some(&scripted_pipeline()), &LexicalPolicy, &EvalOptions::default());
    let value: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    if let Err(errors) = validator.validate(&value) {
        panic!("{:?}", errors.map(|e| e.to_string()).collect::<Vec<_>>());
    }
    let empty: serde_json::Value = serde_json::from_str(&evaluate(&[], None, &LexicalPolicy, &EvalOptions::default()).to_json()).unwrap();
    assert!(validator.is_valid(&empty));
}

#[test]
fn fixture_trace_validates_against_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("../schemas/trace.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::JSONSchema::compile(&schema).unwrap();
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("traces/tasks.json")).unwrap()).unwrap();
    assert!(validator.is_valid(&trace));
}

#[test]
fn trace_file_is_left_alone() {
    let path = fixtures().join("traces/tasks.json");
    let before = std::fs::read(&path).unwrap();
    let modified = std::fs::metadata(&path).unwrap().modified().unwrap();
    evaluate(&trace(), Some(&scripted_pipeline()), &LexicalPolicy, &EvalOptions::default());
    assert_eq!(std::fs::read(&path).unwrap(), before);
    assert_eq!(std::fs::metadata(&path).unwrap().modified().unwrap(), modified);
}

#[test]
fn corpus_token_medians_by_recount() {
    let config = DistillerConfig::default();
    let mut pages = Vec::new();
    for entry in std::fs::read_dir(fixtures().join("corpus")).unwrap() {
        let html = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        pages.push(page_token_counts(&html, &config, &ApproxTokenizer));
    }
    assert_eq!(pages.len(), 20);
    let stats = TokenStats::of(&pages);
    let mut distilled: Vec<usize> = pages.iter().map(|p| p.2).collect();
    distilled.sort_unstable();
    assert_eq!(stats.median_distilled_tokens, (distilled[9] + distilled[10]) as f64 / 2.0);
}
