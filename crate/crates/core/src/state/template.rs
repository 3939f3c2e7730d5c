use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::component::ComponentId;

/// A prompt body with `{{name}}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub component_id: ComponentId,
    pub variant: Option<String>,
    pub instruction_text: String,
    pub required_placeholders: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template is missing its `component:` line")]
    MissingHeader,
    #[error(transparent)]
    UnknownComponent(#[from] crate::component::UnknownComponent),
    #[error("placeholder {{{{{0}}}}} appears more than once")]
    DuplicatePlaceholder(String),
    #[error("no value for placeholder {{{{{0}}}}}")]
    MissingPlaceholder(String),
    #[error("no template for component {component}{}", variant.as_deref().map(|v| format!(" ({v})")).unwrap_or_default())]
    NotFound { component: ComponentId, variant: Option<String> },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Splits the body into literal text and placeholder names.
fn segments(body: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else { break };
        let name = &after[..end];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
            out.push(Segment::Text(&rest[..start + 2]));
            rest = after;
            continue;
        }
        out.push(Segment::Text(&rest[..start]));
        out.push(Segment::Placeholder(name));
        rest = &after[end + 2..];
    }
    out.push(Segment::Text(rest));
    out
}

enum Segment<'a> {
    Text(&'a str),
    Placeholder(&'a str),
}

impl PromptTemplate {
    pub fn new(component_id: ComponentId, variant: Option<String>, body: &str) -> Result<Self, TemplateError> {
        let mut required = BTreeSet::new();
        for seg in segments(body) {
            if let Segment::Placeholder(name) = seg {
                if !required.insert(name.to_string()) {
                    return Err(TemplateError::DuplicatePlaceholder(name.to_string()));
                }
            }
        }
        Ok(Self { component_id, variant, instruction_text: body.to_string(), required_placeholders: required })
    }

    /// Reads the `component:` line, an optional `variant:` line, then the body.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut lines = text.lines();
        let first = lines.next().ok_or(TemplateError::MissingHeader)?;
        let component = first.strip_prefix("component:").ok_or(TemplateError::MissingHeader)?.trim().parse()?;
        let mut rest: Vec<&str> = lines.collect();
        let mut variant = None;
        if let Some(v) = rest.first().and_then(|l| l.strip_prefix("variant:")) {
            variant = Some(v.trim().to_string());
            rest.remove(0);
        }
        while rest.first().is_some_and(|l| l.trim().is_empty()) {
            rest.remove(0);
        }
        let body = rest.join("\n");
        Self::new(component, variant, body.trim_end())
    }

    /// Substitutes every placeholder in one pass; substituted values are
    /// never expanded again.
    pub fn fill(&self, values: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.instruction_text.len());
        for seg in segments(&self.instruction_text) {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Placeholder(name) => {
                    let v = values.get(name).ok_or_else(|| TemplateError::MissingPlaceholder(name.to_string()))?;
                    out.push_str(v);
                }
            }
        }
        Ok(out)
    }
}

const BUNDLED: &[&str] = &[
    include_str!("../../prompts/page_context.txt"),
    include_str!("../../prompts/screenshot_response.txt"),
    include_str!("../../prompts/search_key_generation.txt"),
    include_str!("../../prompts/element_proposal.txt"),
    include_str!("../../prompts/element_action_selection.txt"),
    include_str!("../../prompts/double_check.txt"),
    include_str!("../../prompts/secondary_parameter_text.txt"),
    include_str!("../../prompts/secondary_parameter_select.txt"),
    include_str!("../../prompts/end_state.txt"),
    include_str!("../../prompts/cache_key_match.txt"),
    include_str!("../../prompts/cache_store_check.txt"),
    include_str!("../../prompts/tab_management.txt"),
];

/// All templates known to the agent, keyed by component and variant.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<(ComponentId, Option<String>), PromptTemplate>,
}

impl TemplateSet {
    pub fn bundled() -> Self {
        let mut set = Self { templates: BTreeMap::new() };
        for text in BUNDLED {
            set.insert(PromptTemplate::parse(text).expect("bundled templates are well formed"));
        }
        set
    }

    pub fn insert(&mut self, t: PromptTemplate) {
        self.templates.insert((t.component_id, t.variant.clone()), t);
    }

    /// Bundled templates overridden by any `*.txt` files in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::bundled();
        let io = |e: std::io::Error| TemplateError::Io { path: dir.display().to_string(), message: e.to_string() };
        let mut paths: Vec<_> = std::fs::read_dir(dir).map_err(io)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for p in paths.into_iter().filter(|p| p.extension().is_some_and(|e| e == "txt")) {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| TemplateError::Io { path: p.display().to_string(), message: e.to_string() })?;
            set.insert(PromptTemplate::parse(&text)?);
        }
        Ok(set)
    }

    pub fn get(&self, component: ComponentId, variant: Option<&str>) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .get(&(component, variant.map(str::to_string)))
            .ok_or(TemplateError::NotFound { component, variant: variant.map(str::to_string) })
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }
}
