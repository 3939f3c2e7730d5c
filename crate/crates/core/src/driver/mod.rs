//! Executing actions against pages.

mod replay;
mod webdriver;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::action::{ActionVerb, SecondaryParam};
use crate::distill::Locator;

pub use replay::{select_options, GraphEdge, GraphNode, ReplayDriver, SnapshotGraph};
pub use webdriver::{WebDriver, WebDriverConfig};

/// The page as the agent perceives it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSnapshot {
    pub url: String,
    pub title: String,
    pub html: String,
    #[serde(skip)]
    pub screenshot: Option<Vec<u8>>,
    /// Set when `screenshot` is a stand-in rather than a capture.
    #[serde(default)]
    pub placeholder_screenshot: bool,
}

/// One verb applied to an element addressed by locator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverAction {
    pub verb: ActionVerb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locator: Option<Locator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary: Option<SecondaryParam>,
}

impl DriverAction {
    pub fn on(verb: ActionVerb, locator: Locator) -> Self {
        Self { verb, locator: Some(locator), secondary: None }
    }

    pub fn with_secondary(mut self, secondary: SecondaryParam) -> Self {
        self.secondary = Some(secondary);
        self
    }

    pub fn visit(url: impl Into<String>) -> Self {
        Self { verb: ActionVerb::VisitUrl, locator: None, secondary: Some(SecondaryParam::Url(url.into())) }
    }

    pub fn tab(verb: ActionVerb, tab: usize) -> Self {
        Self { verb, locator: None, secondary: Some(SecondaryParam::Tab(tab)) }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: &str| Err(DriverError::InvalidAction(format!("{}: {m}", self.verb)));
        if self.verb.targets_element() && self.locator.is_none() {
            return bad("needs a locator");
        }
        match (self.verb, &self.secondary) {
            (ActionVerb::TypeText, Some(SecondaryParam::Text(t))) if !t.is_empty() => Ok(()),
            (ActionVerb::TypeText, _) => bad("needs non-empty text"),
            (ActionVerb::SelectOption, Some(SecondaryParam::Options(o))) if !o.is_empty() => Ok(()),
            (ActionVerb::SelectOption, _) => bad("needs an option index"),
            (ActionVerb::UploadFile, Some(SecondaryParam::FilePath(_))) => Ok(()),
            (ActionVerb::UploadFile, _) => bad("needs a file path"),
            (ActionVerb::VisitUrl, Some(SecondaryParam::Url(_))) => Ok(()),
            (ActionVerb::VisitUrl, _) => bad("needs a URL"),
            (ActionVerb::SwitchTab | ActionVerb::CloseTab, Some(SecondaryParam::Tab(_))) => Ok(()),
            (ActionVerb::SwitchTab | ActionVerb::CloseTab, _) => bad("needs a tab index"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectOption {
    pub value: String,
    pub text: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("no element matches {locator}")]
    ElementNotFound { locator: String },
    #[error("{count} elements match {locator}")]
    AmbiguousLocator { locator: String, count: usize },
    #[error("navigation to {url} did not settle in time")]
    NavigationTimeout { url: String },
    #[error("no page at {url}")]
    Unreachable { url: String },
    #[error("no recorded transition from {node} for {verb} on {locator}")]
    NoMatchingEdge { node: String, verb: ActionVerb, locator: String },
    #[error("{locator} is not a select element")]
    NotASelect { locator: String },
    #[error("option {index} out of range ({count} options)")]
    OptionOutOfRange { index: usize, count: usize },
    #[error("no tab {0}")]
    TabNotFound(usize),
    #[error("page is closed")]
    PageClosed,
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("snapshot graph: {0}")]
    Graph(String),
    #[error("webdriver: {0}")]
    Protocol(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl DriverError {
    /// Stable short name for transcripts and failure reasons.
    pub fn kind(&self) -> &'static str {
        match self {
            DriverError::ElementNotFound { .. } => "element_not_found",
            DriverError::AmbiguousLocator { .. } => "ambiguous_locator",
            DriverError::NavigationTimeout { .. } => "navigation_timeout",
            DriverError::Unreachable { .. } => "unreachable",
            DriverError::NoMatchingEdge { .. } => "no_matching_edge",
            DriverError::NotASelect { .. } => "not_a_select",
            DriverError::OptionOutOfRange { .. } => "option_out_of_range",
            DriverError::TabNotFound(_) => "tab_not_found",
            DriverError::PageClosed => "page_closed",
            DriverError::InvalidAction(_) => "invalid_action",
            DriverError::Graph(_) => "graph",
            DriverError::Protocol(_) => "protocol",
            DriverError::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DriverError::Io { path: path.to_path_buf(), source }
    }
}

/// A browser the agent can act on. One instance belongs to one thread.
pub trait BrowserDriver {
    /// Applies the action and returns the resulting page. On error the
    /// current page is left as it was.
    fn execute(&mut self, action: &DriverAction) -> Result<PageSnapshot, DriverError>;

    fn snapshot(&mut self) -> Result<PageSnapshot, DriverError>;

    /// Options of the addressed select, in document order.
    fn list_options(&mut self, locator: &Locator) -> Result<Vec<SelectOption>, DriverError>;

    /// Titles of the open tabs, in tab order.
    fn tabs(&mut self) -> Result<Vec<String>, DriverError>;

    /// Called after every executed action.
    fn record_state(&mut self) -> Result<(), DriverError>;

    fn save_session(&mut self, dir: &Path) -> Result<(), DriverError>;
}

impl<T: BrowserDriver + ?Sized> BrowserDriver for Box<T> {
    fn execute(&mut self, action: &DriverAction) -> Result<PageSnapshot, DriverError> {
        (**self).execute(action)
    }
    fn snapshot(&mut self) -> Result<PageSnapshot, DriverError> {
        (**self).snapshot()
    }
    fn list_options(&mut self, locator: &Locator) -> Result<Vec<SelectOption>, DriverError> {
        (**self).list_options(locator)
    }
    fn tabs(&mut self) -> Result<Vec<String>, DriverError> {
        (**self).tabs()
    }
    fn record_state(&mut self) -> Result<(), DriverError> {
        (**self).record_state()
    }
    fn save_session(&mut self, dir: &Path) -> Result<(), DriverError> {
        (**self).save_session(dir)
    }
}

pub const DEFAULT_USER_AGENT: &str =
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/124.0.0.0 Safari/537.36";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Viewport {
    pub width: u32,
    pub height: u32,
}

/// How the live browser presents itself to sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrowserProfile {
    pub user_agent: String,
    pub headless: bool,
    pub viewport: Viewport,
    pub locale: String,
    pub extra_headers: BTreeMap<String, String>,
}

impl Default for BrowserProfile {
    fn default() -> Self {
        Self {
            user_agent: DEFAULT_USER_AGENT.into(),
            headless: false,
            viewport: Viewport { width: 1366, height: 768 },
            locale: "en-US".into(),
            extra_headers: BTreeMap::new(),
        }
    }
}

impl BrowserProfile {
    pub fn validate(&self) -> Result<(), DriverError> {
        if self.viewport.width == 0 || self.viewport.height == 0 {
            return Err(DriverError::InvalidAction("viewport must be positive".into()));
        }
        Ok(())
    }
}

const PLACEHOLDER_PNG: &str =
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAQAAAC1HAwCAAAAC0lEQVR42mNkYAAAAAYAAjCB0C8AAAAASUVORK5CYII=";

/// A 1x1 PNG used where no screenshot was recorded.
pub fn placeholder_png() -> Vec<u8> {
    base64::engine::general_purpose::STANDARD.decode(PLACEHOLDER_PNG).expect("valid base64")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_requirements() {
        let loc = Locator::Css { expression: "#q".into() };
        assert!(DriverAction::on(ActionVerb::Click, loc.clone()).validate().is_ok());
        assert!(DriverAction::on(ActionVerb::TypeText, loc.clone()).validate().is_err());
        assert!(DriverAction::on(ActionVerb::TypeText, loc.clone())
            .with_secondary(SecondaryParam::Text(String::new()))
            .validate()
            .is_err());
        assert!(DriverAction { verb: ActionVerb::Click, locator: None, secondary: None }.validate().is_err());
        assert!(DriverAction::visit("https://a.com").validate().is_ok());
        assert!(DriverAction::tab(ActionVerb::CloseTab, 1).validate().is_ok());
    }

    #[test]
    fn placeholder_is_png() {
        assert!(placeholder_png().starts_with(&[0x89, b'P', b'N', b'G']));
    }

    #[test]
    fn profile_defaults_are_headed() {
        let p = BrowserProfile::default();
        assert!(!p.headless);
        assert!(p.validate().is_ok());
        let p: BrowserProfile = toml::from_str("headless = true\nviewport = { width = 0, height = 10 }").unwrap();
        assert!(p.validate().is_err());
    }
}
