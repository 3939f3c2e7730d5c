//! One method per prompt-backed component.

use std::collections::BTreeMap;

use super::transcript::{CallRecord, Transcript};
use super::AgentConfig;
use crate::action::{ActionCommand, ActionVerb};
use crate::cache::{CacheMatcher, CacheValidator};
use crate::component::ComponentId;
use crate::distill::DistilledElement;
use crate::driver::SelectOption;
use crate::llm::{
    parse_action_selection, parse_element_list, parse_option_index, parse_search_keys, parse_yes_no,
    CompletionRequest, LlmBackend, LlmError, ParseError,
};
use crate::pricing::cost_of;
use crate::state::{batch_candidates, render_prompt, ActionDescription, PageState, StateError, TemplateError};

#[derive(Debug, thiserror::Error)]
pub enum ComponentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("{component}: {source}")]
    Parse { component: ComponentId, source: ParseError },
    #[error("{0} returned nothing usable")]
    Empty(ComponentId),
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "the", "on", "in", "at", "to", "of", "for", "with", "from", "by", "into", "onto", "this", "that",
    "it", "its", "or", "then", "is", "be", "as", "top", "page", "click", "type_text", "type", "select_option",
    "select", "press_enter", "press", "enter", "upload_file", "upload",
];

/// Lowercased words of `text` minus stopwords and verbs, in order, unique.
pub fn fallback_keys(text: &str, max: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for w in text.split(|c: char| !(c.is_alphanumeric() || c == '_')).map(str::to_lowercase) {
        if w.is_empty() || STOPWORDS.contains(&w.as_str()) || out.contains(&w) {
            continue;
        }
        out.push(w);
        if out.len() == max {
            break;
        }
    }
    out
}

fn numbered(items: impl IntoIterator<Item = String>) -> String {
    items.into_iter().enumerate().map(|(i, s)| format!("({}) {s}", i + 1)).collect::<Vec<_>>().join("\n")
}

const REPROMPT: &str = "\n\nYour previous reply could not be used";

/// The prompt-backed components, bound to one step of one run.
pub struct Components<'a> {
    pub backend: &'a dyn LlmBackend,
    pub config: &'a AgentConfig,
    pub transcript: &'a Transcript,
    pub step: usize,
}

impl<'a> Components<'a> {
    fn prompt(
        &self,
        component: ComponentId,
        variant: Option<&str>,
        state: &PageState,
        extras: &BTreeMap<String, String>,
    ) -> Result<String, ComponentError> {
        let t = self.config.templates.get(component, variant)?;
        Ok(render_prompt(t, state, extras)?)
    }

    /// Runs one completion without logging it.
    pub(crate) fn call_unlogged(
        &self,
        component: ComponentId,
        prompt: String,
        image: Option<Vec<u8>>,
    ) -> Result<(String, CallRecord), LlmError> {
        let model = self.config.models.model_for(component).to_string();
        let req = CompletionRequest {
            component,
            model_id: model.clone(),
            system_text: String::new(),
            user_text: prompt,
            image,
            temperature: component.default_temperature(),
            max_output_tokens: self.config.max_output_tokens,
        };
        let resp = self.backend.complete(&req)?;
        let cost = cost_of(component, resp.input_tokens, resp.output_tokens, &self.config.pricing, &self.config.models)
            .unwrap_or_else(|e| {
                log::warn!("{e}; counting the call as free");
                0.0
            });
        let record = CallRecord {
            component,
            model,
            input_tokens: resp.input_tokens,
            output_tokens: resp.output_tokens,
            cost,
            latency_ms: resp.latency.as_millis() as u64,
            response: resp.text.clone(),
        };
        Ok((resp.text, record))
    }

    fn call(&self, component: ComponentId, prompt: String, image: Option<Vec<u8>>) -> Result<String, ComponentError> {
        let (text, record) = self.call_unlogged(component, prompt, image)?;
        self.transcript.llm(self.step, record);
        Ok(text)
    }

    pub(crate) fn page_context_prompt(&self, state: &PageState, page_text: &str) -> Result<String, ComponentError> {
        let extras = BTreeMap::from([("page_text".to_string(), page_text.to_string())]);
        self.prompt(ComponentId::PageContext, None, state, &extras)
    }

    pub(crate) fn screenshot_prompt(&self, state: &PageState) -> Result<String, ComponentError> {
        self.prompt(ComponentId::ScreenshotResponse, None, state, &BTreeMap::new())
    }

    pub(crate) fn read_page_context(text: &str) -> String {
        text.trim().to_string()
    }

    pub(crate) fn read_screenshot_response(text: &str) -> Result<ActionDescription, ComponentError> {
        ActionDescription::from_response(text).ok_or(ComponentError::Empty(ComponentId::ScreenshotResponse))
    }

    /// One-sentence summary of the page.
    pub fn summarize_page_context(&self, state: &PageState, page_text: &str) -> Result<String, ComponentError> {
        let prompt = self.page_context_prompt(state, page_text)?;
        Ok(Self::read_page_context(&self.call(ComponentId::PageContext, prompt, None)?))
    }

    /// Suggested next action, read off the screenshot.
    pub fn screenshot_response(&self, state: &PageState, png: Vec<u8>) -> Result<ActionDescription, ComponentError> {
        let prompt = self.screenshot_prompt(state)?;
        Self::read_screenshot_response(&self.call(ComponentId::ScreenshotResponse, prompt, Some(png))?)
    }

    /// Between 1 and `max_search_keys` lowercase keywords for the candidate
    /// action. Falls back to the action's own words when the reply has none.
    pub fn generate_search_keys(&self, state: &PageState) -> Result<Vec<String>, ComponentError> {
        let max = self.config.max_search_keys.max(1);
        let prompt = self.prompt(ComponentId::SearchKeyGeneration, None, state, &BTreeMap::new())?;
        let mut keys = parse_search_keys(&self.call(ComponentId::SearchKeyGeneration, prompt, None)?, max);
        if keys.is_empty() {
            let desc = state.candidate_action.as_ref().map(|a| a.description.as_str()).unwrap_or("");
            keys = fallback_keys(desc, max);
            if keys.is_empty() && !desc.trim().is_empty() {
                keys.push(desc.trim().to_lowercase());
            }
        }
        Ok(keys)
    }

    /// Up to `max_proposals` candidate indexes, best first. Indexes not
    /// among the candidates are dropped. Large candidate lists are split
    /// over several calls.
    pub fn propose_elements(&self, state: &PageState) -> Result<Vec<usize>, ComponentError> {
        let template = self.config.templates.get(ComponentId::ElementProposal, None)?;
        let extras = BTreeMap::new();
        let full = render_prompt(template, state, &extras)?;
        let batches = if self.config.tokenizer.count(&full) <= self.config.prompt_token_budget {
            vec![full]
        } else {
            batch_candidates(state, template, &extras, self.config.prompt_token_budget, self.config.tokenizer.as_ref())?
                .iter()
                .map(|b| render_prompt(template, b, &extras))
                .collect::<Result<_, _>>()?
        };
        let valid: std::collections::HashSet<usize> = state.candidate_elements.iter().map(|e| e.index).collect();
        let mut out = Vec::new();
        let mut parse_error = None;
        for prompt in batches {
            let text = self.call(ComponentId::ElementProposal, prompt, None)?;
            match parse_element_list(&text) {
                Ok(list) => out.extend(list.into_iter().filter(|i| valid.contains(i) && !out.contains(i)).collect::<Vec<_>>()),
                Err(e) => parse_error = Some(e),
            }
        }
        out.truncate(self.config.max_proposals);
        match (out.is_empty(), parse_error) {
            (true, Some(source)) => Err(ComponentError::Parse { component: ComponentId::ElementProposal, source }),
            _ => Ok(out),
        }
    }

    fn only(state: &PageState, indexes: &[usize]) -> PageState {
        let pick = indexes.iter().filter_map(|i| state.candidate_elements.iter().find(|e| e.index == *i)).cloned();
        PageState { candidate_elements: pick.collect(), ..state.clone() }
    }

    /// Whether any proposed element plausibly serves the candidate action.
    pub fn double_check(&self, state: &PageState, proposed: &[usize]) -> Result<bool, ComponentError> {
        let prompt = self.prompt(ComponentId::DoubleCheck, None, &Self::only(state, proposed), &BTreeMap::new())?;
        let text = self.call(ComponentId::DoubleCheck, prompt, None)?;
        parse_yes_no(&text).map_err(|source| ComponentError::Parse { component: ComponentId::DoubleCheck, source })
    }

    /// The verb and element to act on, drawn from `proposed` with their
    /// original indexes. An unreadable or out-of-set reply is asked again
    /// once. `None` when the model declines every candidate.
    pub fn select_action(&self, state: &PageState, proposed: &[usize]) -> Result<Option<ActionCommand>, ComponentError> {
        let max = state.candidate_elements.iter().map(|e| e.index).max().unwrap_or(0);
        let prompt = self.prompt(ComponentId::ElementActionSelection, None, &Self::only(state, proposed), &BTreeMap::new())?;
        let read = |text: &str| -> Result<Option<ActionCommand>, ParseError> {
            match parse_action_selection(text, max)? {
                None => Ok(None),
                Some((verb, index)) if proposed.contains(&index) && verb.targets_element() => {
                    Ok(Some(ActionCommand::on_element(verb, index)))
                }
                Some((_, index)) => Err(ParseError::OutOfRange { index, max }),
            }
        };
        let first = self.call(ComponentId::ElementActionSelection, prompt.clone(), None)?;
        match read(&first) {
            Ok(c) => Ok(c),
            Err(e) => {
                let again = format!("{prompt}{REPROMPT} ({e}). Answer again in the requested format.");
                let second = self.call(ComponentId::ElementActionSelection, again, None)?;
                read(&second)
                    .map_err(|source| ComponentError::Parse { component: ComponentId::ElementActionSelection, source })
            }
        }
    }

    /// Text to type into `element`, used exactly as returned apart from
    /// surrounding whitespace.
    pub fn secondary_text(&self, state: &PageState, element: &DistilledElement) -> Result<String, ComponentError> {
        let extras = BTreeMap::from([("element".to_string(), element.render())]);
        let prompt = self.prompt(ComponentId::SecondaryParameter, Some("text"), state, &extras)?;
        let text = self.call(ComponentId::SecondaryParameter, prompt, None)?;
        let text = text.trim();
        if text.is_empty() {
            return Err(ComponentError::Empty(ComponentId::SecondaryParameter));
        }
        Ok(text.to_string())
    }

    /// 1-based position of the option to select, asked again once when the
    /// reply is unreadable.
    pub fn secondary_option(&self, state: &PageState, options: &[SelectOption]) -> Result<usize, ComponentError> {
        if options.is_empty() {
            return Err(ComponentError::Empty(ComponentId::SecondaryParameter));
        }
        let listing = numbered(options.iter().map(|o| o.text.clone()));
        let extras = BTreeMap::from([("options".to_string(), listing)]);
        let prompt = self.prompt(ComponentId::SecondaryParameter, Some("select"), state, &extras)?;
        let first = self.call(ComponentId::SecondaryParameter, prompt.clone(), None)?;
        match parse_option_index(&first, options.len()) {
            Ok(k) => Ok(k),
            Err(e) => {
                let again = format!("{prompt}{REPROMPT} ({e}). Answer again in the requested format.");
                let second = self.call(ComponentId::SecondaryParameter, again, None)?;
                parse_option_index(&second, options.len())
                    .map_err(|source| ComponentError::Parse { component: ComponentId::SecondaryParameter, source })
            }
        }
    }

    /// Whether the goal is reached. False without a call when nothing has
    /// been done yet; an unreadable reply also counts as no.
    pub fn check_end_state(&self, state: &PageState) -> Result<bool, ComponentError> {
        if state.prior_actions.is_empty() {
            return Ok(false);
        }
        let prompt = self.prompt(ComponentId::EndState, None, state, &BTreeMap::new())?;
        let text = self.call(ComponentId::EndState, prompt, None)?;
        Ok(parse_yes_no(&text).unwrap_or(false))
    }

    /// Which stored description, if any, names the same action.
    pub fn match_cache_key(
        &self,
        state: &PageState,
        description: &str,
        stored: &[String],
    ) -> Result<Option<usize>, ComponentError> {
        let s = PageState { candidate_action: Some(ActionDescription::new(None, description)), ..state.clone() };
        let extras = BTreeMap::from([("stored_descriptions".to_string(), numbered(stored.iter().cloned()))]);
        let prompt = self.prompt(ComponentId::CacheKeyMatch, None, &s, &extras)?;
        let text = self.call(ComponentId::CacheKeyMatch, prompt, None)?;
        if text.trim().trim_matches(|c: char| !c.is_alphanumeric()).to_ascii_lowercase().starts_with("none") {
            return Ok(None);
        }
        parse_option_index(&text, stored.len())
            .map(|k| Some(k - 1))
            .map_err(|source| ComponentError::Parse { component: ComponentId::CacheKeyMatch, source })
    }

    /// Whether `description` fits the executed verb and element.
    pub fn check_cache_store(&self, description: &str, verb: ActionVerb, element: &str) -> Result<bool, ComponentError> {
        let extras = BTreeMap::from([
            ("description".to_string(), description.to_string()),
            ("verb".to_string(), verb.to_string()),
            ("element".to_string(), element.to_string()),
        ]);
        let prompt = self.prompt(ComponentId::CacheStoreCheck, None, &PageState::default(), &extras)?;
        let text = self.call(ComponentId::CacheStoreCheck, prompt, None)?;
        parse_yes_no(&text).map_err(|source| ComponentError::Parse { component: ComponentId::CacheStoreCheck, source })
    }
}

/// Cache matcher backed by the key-match component.
pub(crate) struct LlmMatcher<'c, 'a> {
    pub components: &'c Components<'a>,
    pub state: &'c PageState,
}

impl CacheMatcher for LlmMatcher<'_, '_> {
    fn pick(&self, _base_url: &str, description: &str, stored: &[String]) -> Result<Option<usize>, String> {
        self.components.match_cache_key(self.state, description, stored).map_err(|e| e.to_string())
    }
}

/// Store-time validator backed by the store-check component.
pub(crate) struct LlmValidator<'c, 'a> {
    pub components: &'c Components<'a>,
}

impl CacheValidator for LlmValidator<'_, '_> {
    fn validate(&self, description: &str, verb: ActionVerb, element: &str) -> Result<bool, String> {
        self.components.check_cache_store(description, verb, element).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fallback_drops_stopwords_and_verbs() {
        assert_eq!(fallback_keys("click login button", 8), vec!["login", "button"]);
        assert_eq!(fallback_keys("click the \"Camping\" category on the navigation bar", 2), vec!["camping", "category"]);
        assert!(fallback_keys("click the", 8).is_empty());
    }
}
