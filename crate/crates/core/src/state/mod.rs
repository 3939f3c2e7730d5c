//! The agent's view of the current page and its rendering into prompts.

mod template;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::action::ActionVerb;
use crate::distill::{render_indexed, DistilledElement, Tokenizer};

pub use template::{PromptTemplate, TemplateError, TemplateSet};

/// A free-text description of one action, optionally led by a verb.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionDescription {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verb_hint: Option<ActionVerb>,
    pub description: String,
}

impl ActionDescription {
    /// Reads a model response. Surrounding quotes are removed and a leading
    /// verb from the verb table becomes the hint. Empty text yields `None`.
    pub fn from_response(text: &str) -> Option<Self> {
        let mut t = text.trim();
        for q in ['"', '\'', '`'] {
            if t.len() >= 2 && t.starts_with(q) && t.ends_with(q) {
                t = t[1..t.len() - 1].trim();
            }
        }
        if t.is_empty() {
            return None;
        }
        let first = t.split_whitespace().next().unwrap_or("");
        let first = first.trim_matches(|c: char| !c.is_alphanumeric() && c != '_');
        Some(Self { verb_hint: first.parse().ok(), description: t.to_string() })
    }

    pub fn new(verb_hint: Option<ActionVerb>, description: impl Into<String>) -> Self {
        Self { verb_hint, description: description.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PageState {
    pub website: String,
    pub page_context: String,
    pub goal: String,
    pub prior_actions: Vec<ActionDescription>,
    pub candidate_action: Option<ActionDescription>,
    pub candidate_elements: Vec<DistilledElement>,
    pub current_url: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StateError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("element ({index}) alone needs {tokens} tokens, over the budget of {budget}")]
    ElementTooLarge { index: usize, tokens: usize, budget: usize },
    #[error("the prompt without candidates already needs {tokens} tokens, over the budget of {budget}")]
    OverheadTooLarge { tokens: usize, budget: usize },
}

pub fn render_prior_actions(actions: &[ActionDescription]) -> String {
    if actions.is_empty() {
        return "- None".to_string();
    }
    actions.iter().map(|a| format!("- {}", a.description)).collect::<Vec<_>>().join("\n")
}

impl PageState {
    pub fn new(goal: impl Into<String>, website: impl Into<String>, current_url: impl Into<String>) -> Self {
        Self { goal: goal.into(), website: website.into(), current_url: current_url.into(), ..Default::default() }
    }

    /// Placeholder values drawn from the state.
    pub fn placeholder_values(&self) -> BTreeMap<String, String> {
        let mut v = BTreeMap::new();
        v.insert("website".into(), self.website.clone());
        v.insert("current_url".into(), self.current_url.clone());
        v.insert(
            "page_context".into(),
            if self.page_context.is_empty() { "Unknown".into() } else { self.page_context.clone() },
        );
        v.insert("goal".into(), self.goal.clone());
        v.insert("prior_actions".into(), render_prior_actions(&self.prior_actions));
        v.insert(
            "candidate_action".into(),
            self.candidate_action.as_ref().map(|a| a.description.clone()).unwrap_or_else(|| "None".into()),
        );
        v.insert(
            "candidate_elements".into(),
            if self.candidate_elements.is_empty() { "None".into() } else { render_indexed(&self.candidate_elements) },
        );
        v
    }
}

/// Fills `template` from the state, with `extras` taking precedence.
pub fn render_prompt(
    template: &PromptTemplate,
    state: &PageState,
    extras: &BTreeMap<String, String>,
) -> Result<String, TemplateError> {
    let mut values = state.placeholder_values();
    values.extend(extras.iter().map(|(k, v)| (k.clone(), v.clone())));
    template.fill(&values)
}

/// Returns a copy of `state` with `action` appended to its history.
pub fn append_action(state: &PageState, action: ActionDescription) -> PageState {
    let mut next = state.clone();
    next.prior_actions.push(action);
    next
}

/// Splits the candidate elements into consecutive chunks whose rendered
/// prompts each fit in `token_budget`. Elements keep their original indexes.
pub fn batch_candidates(
    state: &PageState,
    template: &PromptTemplate,
    extras: &BTreeMap<String, String>,
    token_budget: usize,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<PageState>, StateError> {
    let with = |elements: &[DistilledElement]| -> Result<usize, StateError> {
        let s = PageState { candidate_elements: elements.to_vec(), ..state.clone() };
        Ok(tokenizer.count(&render_prompt(template, &s, extras)?))
    };
    let overhead = with(&[])?;
    if overhead > token_budget {
        return Err(StateError::OverheadTooLarge { tokens: overhead, budget: token_budget });
    }
    let elements = &state.candidate_elements;
    if elements.is_empty() {
        return Ok(vec![state.clone()]);
    }
    let mut batches = Vec::new();
    let mut start = 0;
    while start < elements.len() {
        let mut end = start + 1;
        let single = with(&elements[start..end])?;
        if single > token_budget {
            return Err(StateError::ElementTooLarge { index: elements[start].index, tokens: single, budget: token_budget });
        }
        while end < elements.len() && with(&elements[start..end + 1])? <= token_budget {
            end += 1;
        }
        batches.push(PageState { candidate_elements: elements[start..end].to_vec(), ..state.clone() });
        start = end;
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::component::ComponentId;
    use crate::distill::{ApproxTokenizer, Locator, NodeHandle, NodePath};

    fn element(index: usize, text: &str) -> DistilledElement {
        DistilledElement {
            index,
            tag: "a".into(),
            kept_attributes: vec![],
            inner_text: text.into(),
            image_alts: vec![],
            locator: Locator::Css { expression: format!("a:nth-child({index})") },
            node_id: NodeHandle(index),
            node_path: NodePath(vec![index]),
        }
    }

    #[test]
    fn description_verb_hint() {
        let d = ActionDescription::from_response("\"click the \"Camping\" category on the navigation bar\"").unwrap();
        assert_eq!(d.verb_hint, Some(ActionVerb::Click));
        assert_eq!(d.description, "click the \"Camping\" category on the navigation bar");
        let d = ActionDescription::from_response("the search box at the top").unwrap();
        assert_eq!(d.verb_hint, None);
        assert!(ActionDescription::from_response("  ").is_none());
    }

    #[test]
    fn empty_history_renders_none() {
        assert_eq!(render_prior_actions(&[]), "- None");
        let acts = vec![ActionDescription::new(None, "a"), ActionDescription::new(None, "b")];
        assert_eq!(render_prior_actions(&acts), "- a\n- b");
    }

    #[test]
    fn zero_placeholders_verbatim() {
        let t = PromptTemplate::new(ComponentId::EndState, None, "plain text").unwrap();
        assert_eq!(render_prompt(&t, &PageState::default(), &BTreeMap::new()).unwrap(), "plain text");
    }

    #[test]
    fn missing_placeholder_is_named() {
        let t = PromptTemplate::new(ComponentId::EndState, None, "{{options}}").unwrap();
        let err = render_prompt(&t, &PageState::default(), &BTreeMap::new()).unwrap_err();
        assert_eq!(err, TemplateError::MissingPlaceholder("options".into()));
    }

    #[test]
    fn append_keeps_order_and_fields() {
        let s = PageState::new("g", "https://a.com", "https://a.com/x");
        let s1 = append_action(&s, ActionDescription::new(None, "one"));
        let s2 = append_action(&s1, ActionDescription::new(None, "two"));
        assert_eq!(s.prior_actions.len(), 0);
        assert_eq!(s2.prior_actions.iter().map(|a| a.description.as_str()).collect::<Vec<_>>(), vec!["one", "two"]);
        assert_eq!(s2.goal, s.goal);
    }

    #[test]
    fn batches_twelve_twelve_six() {
        // each block "(NN)\n<a>xxxxxxxxxx</a>" is 23 chars, plus the 2-char separator
        let t = PromptTemplate::new(ComponentId::ElementProposal, None, "{{candidate_elements}}").unwrap();
        let elements: Vec<_> = (10..40).map(|i| element(i, "xxxxxxxxxx")).collect();
        let state = PageState { candidate_elements: elements.clone(), ..Default::default() };
        let budget = (12 * 23 + 11 * 2usize).div_ceil(4);
        let batches = batch_candidates(&state, &t, &BTreeMap::new(), budget, &ApproxTokenizer).unwrap();
        assert_eq!(batches.iter().map(|b| b.candidate_elements.len()).collect::<Vec<_>>(), vec![12, 12, 6]);
        let joined: Vec<_> = batches.into_iter().flat_map(|b| b.candidate_elements).collect();
        assert_eq!(joined, elements);
    }

    #[test]
    fn batching_edge_cases() {
        let t = PromptTemplate::new(ComponentId::ElementProposal, None, "{{candidate_elements}}").unwrap();
        let empty = PageState::default();
        assert_eq!(batch_candidates(&empty, &t, &BTreeMap::new(), 10, &ApproxTokenizer).unwrap().len(), 1);
        let big = PageState { candidate_elements: vec![element(1, &"y".repeat(200))], ..Default::default() };
        assert!(matches!(
            batch_candidates(&big, &t, &BTreeMap::new(), 10, &ApproxTokenizer),
            Err(StateError::ElementTooLarge { index: 1, .. })
        ));
    }
}
