use scraper::{ElementRef, Selector};

use super::noise::data_lines;
use super::DistillError;

const BUNDLED_SELECTORS: &str = include_str!("../../data/selectors.txt");

const VISIBLE_SUFFIX: &str = ":visible";

/// One configured selector. `:visible` is not CSS, so it is peeled off and
/// applied as a separate visibility requirement.
#[derive(Debug, Clone)]
pub struct InteractableSelector {
    pub source: String,
    selector: Selector,
    pub require_visible: bool,
}

impl InteractableSelector {
    pub fn parse(source: &str) -> Result<Self, DistillError> {
        let trimmed = source.trim();
        let (css, require_visible) = match trimmed.strip_suffix(VISIBLE_SUFFIX) {
            Some(rest) => (rest, true),
            None => (trimmed, false),
        };
        let selector = Selector::parse(css).map_err(|e| DistillError::Selector { selector: source.to_string(), message: format!("{e:?}") })?;
        Ok(Self { source: source.to_string(), selector, require_visible })
    }

    pub fn matches(&self, el: &ElementRef<'_>) -> bool {
        self.selector.matches(el)
    }
}

pub fn bundled_selector_strings() -> Vec<String> {
    data_lines(BUNDLED_SELECTORS).map(str::to_string).collect()
}

pub fn compile_all(sources: &[String]) -> Result<Vec<InteractableSelector>, DistillError> {
    sources.iter().map(|s| InteractableSelector::parse(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_list_compiles() {
        let list = bundled_selector_strings();
        assert_eq!(list.len(), 39);
        let compiled = compile_all(&list).unwrap();
        assert!(compiled.iter().all(|s| s.require_visible));
    }

    #[test]
    fn rejects_bad_css() {
        assert!(InteractableSelector::parse("[[").is_err());
    }
}
