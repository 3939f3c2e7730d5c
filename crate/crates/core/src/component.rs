use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The language-model components of the decision loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentId {
    PageContext,
    ScreenshotResponse,
    ElementProposal,
    ElementActionSelection,
    DoubleCheck,
    SecondaryParameter,
    EndState,
    SearchKeyGeneration,
    CacheKeyMatch,
    CacheStoreCheck,
    TabManagement,
}

impl ComponentId {
    pub const ALL: [ComponentId; 11] = [
        ComponentId::PageContext,
        ComponentId::ScreenshotResponse,
        ComponentId::ElementProposal,
        ComponentId::ElementActionSelection,
        ComponentId::DoubleCheck,
        ComponentId::SecondaryParameter,
        ComponentId::EndState,
        ComponentId::SearchKeyGeneration,
        ComponentId::CacheKeyMatch,
        ComponentId::CacheStoreCheck,
        ComponentId::TabManagement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentId::PageContext => "page_context",
            ComponentId::ScreenshotResponse => "screenshot_response",
            ComponentId::ElementProposal => "element_proposal",
            ComponentId::ElementActionSelection => "element_action_selection",
            ComponentId::DoubleCheck => "double_check",
            ComponentId::SecondaryParameter => "secondary_parameter",
            ComponentId::EndState => "end_state",
            ComponentId::SearchKeyGeneration => "search_key_generation",
            ComponentId::CacheKeyMatch => "cache_key_match",
            ComponentId::CacheStoreCheck => "cache_store_check",
            ComponentId::TabManagement => "tab_management",
        }
    }

    /// Free-text generation runs warmer than selection and yes/no answers.
    pub fn default_temperature(self) -> f64 {
        match self {
            ComponentId::PageContext | ComponentId::SecondaryParameter => 0.7,
            _ => 0.0,
        }
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown component {0:?}")]
pub struct UnknownComponent(pub String);

impl FromStr for ComponentId {
    type Err = UnknownComponent;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ComponentId::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| UnknownComponent(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in ComponentId::ALL {
            assert_eq!(c.as_str().parse::<ComponentId>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.as_str()));
        }
        assert!("nope".parse::<ComponentId>().is_err());
    }
}
