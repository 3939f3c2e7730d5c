use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Browser actions the agent can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionVerb {
    Click,
    TypeText,
    SelectOption,
    PressEnter,
    UploadFile,
    VisitUrl,
    SwitchTab,
    CloseTab,
}

impl ActionVerb {
    pub const ALL: [ActionVerb; 8] = [
        ActionVerb::Click,
        ActionVerb::TypeText,
        ActionVerb::SelectOption,
        ActionVerb::PressEnter,
        ActionVerb::UploadFile,
        ActionVerb::VisitUrl,
        ActionVerb::SwitchTab,
        ActionVerb::CloseTab,
    ];

    /// Verbs the selection component may answer with.
    pub const ELEMENT_VERBS: [ActionVerb; 5] =
        [ActionVerb::Click, ActionVerb::TypeText, ActionVerb::SelectOption, ActionVerb::PressEnter, ActionVerb::UploadFile];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionVerb::Click => "click",
            ActionVerb::TypeText => "type_text",
            ActionVerb::SelectOption => "select_option",
            ActionVerb::PressEnter => "press_enter",
            ActionVerb::UploadFile => "upload_file",
            ActionVerb::VisitUrl => "visit_url",
            ActionVerb::SwitchTab => "switch_tab",
            ActionVerb::CloseTab => "close_tab",
        }
    }

    pub fn targets_element(self) -> bool {
        Self::ELEMENT_VERBS.contains(&self)
    }

    pub fn needs_secondary(self) -> bool {
        !matches!(self, ActionVerb::Click | ActionVerb::PressEnter)
    }
}

impl fmt::Display for ActionVerb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown action verb {0:?}")]
pub struct UnknownVerb(pub String);

impl FromStr for ActionVerb {
    type Err = UnknownVerb;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        ActionVerb::ALL.into_iter().find(|v| v.as_str() == lower).ok_or_else(|| UnknownVerb(s.to_string()))
    }
}

/// Extra argument for verbs that need one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SecondaryParam {
    Text(String),
    /// 1-based indexes into the element's option list.
    Options(Vec<usize>),
    FilePath(PathBuf),
    Url(String),
    /// 1-based position in the tab list.
    Tab(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionCommand {
    pub verb: ActionVerb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary: Option<SecondaryParam>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvalidCommand {
    #[error("{0} needs an element index")]
    MissingElement(ActionVerb),
    #[error("{0} does not take an element index")]
    UnexpectedElement(ActionVerb),
    #[error("{verb} needs a {expected} argument")]
    WrongSecondary { verb: ActionVerb, expected: &'static str },
}

impl ActionCommand {
    pub fn on_element(verb: ActionVerb, index: usize) -> Self {
        Self { verb, element_index: Some(index), secondary: None }
    }

    pub fn with_secondary(mut self, secondary: SecondaryParam) -> Self {
        self.secondary = Some(secondary);
        self
    }

    pub fn visit(url: impl Into<String>) -> Self {
        Self { verb: ActionVerb::VisitUrl, element_index: None, secondary: Some(SecondaryParam::Url(url.into())) }
    }

    pub fn validate(&self) -> Result<(), InvalidCommand> {
        match (self.verb.targets_element(), self.element_index) {
            (true, None) => return Err(InvalidCommand::MissingElement(self.verb)),
            (false, Some(_)) => return Err(InvalidCommand::UnexpectedElement(self.verb)),
            _ => {}
        }
        let wrong = |expected| Err(InvalidCommand::WrongSecondary { verb: self.verb, expected });
        match (self.verb, &self.secondary) {
            (ActionVerb::Click | ActionVerb::PressEnter, _) => Ok(()),
            (ActionVerb::TypeText, Some(SecondaryParam::Text(_))) => Ok(()),
            (ActionVerb::TypeText, _) => wrong("text"),
            (ActionVerb::SelectOption, Some(SecondaryParam::Options(o))) if !o.is_empty() => Ok(()),
            (ActionVerb::SelectOption, _) => wrong("option index"),
            (ActionVerb::UploadFile, Some(SecondaryParam::FilePath(_))) => Ok(()),
            (ActionVerb::UploadFile, _) => wrong("file path"),
            (ActionVerb::VisitUrl, Some(SecondaryParam::Url(_))) => Ok(()),
            (ActionVerb::VisitUrl, _) => wrong("URL"),
            (ActionVerb::SwitchTab | ActionVerb::CloseTab, Some(SecondaryParam::Tab(_))) => Ok(()),
            (ActionVerb::SwitchTab | ActionVerb::CloseTab, _) => wrong("tab"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verb_names() {
        let names: Vec<_> = ActionVerb::ALL.iter().map(|v| v.as_str()).collect();
        assert_eq!(
            names,
            ["click", "type_text", "select_option", "press_enter", "upload_file", "visit_url", "switch_tab", "close_tab"]
        );
        for v in ActionVerb::ALL {
            assert_eq!(serde_json::to_value(v).unwrap(), serde_json::Value::String(v.as_str().into()));
            assert_eq!(v.as_str().parse::<ActionVerb>().unwrap(), v);
        }
        assert!("type_and_enter".parse::<ActionVerb>().is_err());
    }

    #[test]
    fn command_requirements() {
        assert!(ActionCommand::on_element(ActionVerb::Click, 1).validate().is_ok());
        assert!(ActionCommand::on_element(ActionVerb::TypeText, 1).validate().is_err());
        assert!(ActionCommand::on_element(ActionVerb::TypeText, 1)
            .with_secondary(SecondaryParam::Text("x".into()))
            .validate()
            .is_ok());
        assert!(ActionCommand::visit("https://a.b").validate().is_ok());
        let c = ActionCommand { verb: ActionVerb::SwitchTab, element_index: None, secondary: None };
        assert!(c.validate().is_err());
    }
}
