//! Recorded tasks in the public benchmark's field layout (a subset).

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::action::ActionVerb;
use crate::distill::{Document, NodePath};

/// One recorded step. `gt_node_id` is the `backend_node_id` attribute of the
/// target element in `raw_html`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub task: String,
    pub step_index: usize,
    pub action_uid: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(skip)]
    pub raw_html: String,
    pub gt_node_id: String,
    pub gt_verb: ActionVerb,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceTask {
    pub id: String,
    pub website: String,
    pub goal: String,
    pub steps: Vec<TraceStep>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: not JSON: {message}")]
    Json { path: String, message: String },
    #[error("{path}: at {pointer}: {message}")]
    Schema { path: String, pointer: String, message: String },
}

impl TraceError {
    pub fn pointer(&self) -> Option<&str> {
        match self {
            TraceError::Schema { pointer, .. } => Some(pointer),
            _ => None,
        }
    }
}

struct Walker<'a> {
    path: &'a str,
}

impl Walker<'_> {
    fn err(&self, pointer: &str, message: impl Into<String>) -> TraceError {
        TraceError::Schema { path: self.path.to_string(), pointer: pointer.to_string(), message: message.into() }
    }

    fn field<'v>(&self, obj: &'v Value, ptr: &str, key: &str) -> Result<&'v Value, TraceError> {
        obj.get(key).ok_or_else(|| self.err(&format!("{ptr}/{key}"), "missing required field"))
    }

    fn string(&self, v: &Value, ptr: &str) -> Result<String, TraceError> {
        match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(self.err(ptr, "expected a string")),
        }
    }

    fn opt_string(&self, obj: &Value, ptr: &str, key: &str) -> Result<Option<String>, TraceError> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => self.string(v, &format!("{ptr}/{key}")).map(Some),
        }
    }
}

fn verb_of(op: &str) -> Option<ActionVerb> {
    Some(match op.to_ascii_uppercase().as_str() {
        "CLICK" => ActionVerb::Click,
        "TYPE" => ActionVerb::TypeText,
        "SELECT" => ActionVerb::SelectOption,
        "ENTER" => ActionVerb::PressEnter,
        _ => return None,
    })
}

/// Parses trace JSON. Unknown fields are ignored; violations name the
/// offending JSON pointer.
pub fn parse_trace(text: &str, path: &str) -> Result<Vec<TraceTask>, TraceError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| TraceError::Json { path: path.to_string(), message: e.to_string() })?;
    let w = Walker { path };
    let Value::Array(items) = &root else { return Err(w.err("", "expected an array of tasks")) };
    let mut tasks = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let tp = format!("/{i}");
        if !item.is_object() {
            return Err(w.err(&tp, "expected an object"));
        }
        let goal = w.string(w.field(item, &tp, "confirmed_task")?, &format!("{tp}/confirmed_task"))?;
        let id = w.opt_string(item, &tp, "annotation_id")?.unwrap_or_else(|| format!("task-{}", i + 1));
        let website = w.opt_string(item, &tp, "website")?.unwrap_or_default();
        let Value::Array(actions) = w.field(item, &tp, "actions")? else {
            return Err(w.err(&format!("{tp}/actions"), "expected an array"));
        };
        let mut steps = Vec::with_capacity(actions.len());
        for (j, a) in actions.iter().enumerate() {
            let ap = format!("{tp}/actions/{j}");
            if !a.is_object() {
                return Err(w.err(&ap, "expected an object"));
            }
            let raw_html = match (w.opt_string(a, &ap, "raw_html")?, w.opt_string(a, &ap, "cleaned_html")?) {
                (Some(h), _) | (None, Some(h)) => h,
                (None, None) => return Err(w.err(&format!("{ap}/raw_html"), "missing raw_html or cleaned_html")),
            };
            let op_obj = w.field(a, &ap, "operation")?;
            let opp = format!("{ap}/operation");
            if !op_obj.is_object() {
                return Err(w.err(&opp, "expected an object"));
            }
            let op = w.string(w.field(op_obj, &opp, "op")?, &format!("{opp}/op"))?;
            let gt_verb = verb_of(&op).ok_or_else(|| w.err(&format!("{opp}/op"), format!("unsupported operation {op:?}")))?;
            let value = w.opt_string(op_obj, &opp, "value")?.filter(|v| !v.is_empty());
            let gt_text = match gt_verb {
                ActionVerb::TypeText | ActionVerb::SelectOption => value,
                _ => None,
            };
            let Value::Array(cands) = w.field(a, &ap, "pos_candidates")? else {
                return Err(w.err(&format!("{ap}/pos_candidates"), "expected an array"));
            };
            let first = cands.first().ok_or_else(|| w.err(&format!("{ap}/pos_candidates"), "no positive candidate"))?;
            let cp = format!("{ap}/pos_candidates/0");
            let gt_node_id = w.string(w.field(first, &cp, "backend_node_id")?, &format!("{cp}/backend_node_id"))?;
            steps.push(TraceStep {
                task: goal.clone(),
                step_index: j,
                action_uid: w.opt_string(a, &ap, "action_uid")?.unwrap_or_else(|| format!("{id}-{}", j + 1)),
                url: w.opt_string(a, &ap, "url")?,
                raw_html,
                gt_node_id,
                gt_verb,
                gt_text,
            });
        }
        tasks.push(TraceTask { id, website, goal, steps });
    }
    Ok(tasks)
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceTask>, TraceError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io { path: p.clone(), source })?;
    parse_trace(&text, &p)
}

/// Node path of the element carrying the step's `backend_node_id`.
pub fn ground_truth_path(doc: &Document, step: &TraceStep) -> Option<NodePath> {
    doc.elements().find(|el| el.value().attr("backend_node_id") == Some(step.gt_node_id.as_str())).map(|el| doc.path_of(&el))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_array() {
        assert!(parse_trace("[]", "t").unwrap().is_empty());
    }

    #[test]
    fn missing_operation_points_at_it() {
        let text = r#"[{"confirmed_task": "g", "actions": [
            {"raw_html": "<a>x</a>", "operation": {"op": "CLICK"}, "pos_candidates": [{"backend_node_id": "1"}]},
            {"raw_html": "<a>x</a>", "pos_candidates": [{"backend_node_id": "1"}]}]}]"#;
        let e = parse_trace(text, "t").unwrap_err();
        assert_eq!(e.pointer(), Some("/0/actions/1/operation"));
    }

    #[test]
    fn reads_subset_and_ignores_the_rest() {
        let text = r#"[{"annotation_id": "a1", "confirmed_task": "Buy socks", "extra": 1, "actions": [
            {"cleaned_html": "<input backend_node_id='7'>", "operation": {"op": "TYPE", "value": "wool socks"},
             "pos_candidates": [{"backend_node_id": 7, "tag": "input"}], "neg_candidates": []}]}]"#;
        let t = parse_trace(text, "t").unwrap();
        let s = &t[0].steps[0];
        assert_eq!((s.gt_verb, s.gt_text.as_deref(), s.gt_node_id.as_str()), (ActionVerb::TypeText, Some("wool socks"), "7"));
        let doc = Document::parse(&s.raw_html).unwrap();
        assert!(ground_truth_path(&doc, s).is_some());
    }

    #[test]
    fn unsupported_op() {
        let text = r#"[{"confirmed_task": "g", "actions": [
            {"raw_html": "", "operation": {"op": "HOVER"}, "pos_candidates": [{"backend_node_id": "1"}]}]}]"#;
        assert_eq!(parse_trace(text, "t").unwrap_err().pointer(), Some("/0/actions/0/operation/op"));
    }
}
