//! Reduces a page to a short indexed list of cleaned interactable elements.
//!
//! Three stages: selector-based extraction of interactables, optional
//! limiting by search strings, then attribute cleaning with noise removal.

mod clean;
mod config;
mod dom;
pub mod estimator;
mod locator;
mod noise;
mod selectors;
mod tokens;

use std::path::PathBuf;

use unicode_normalization::UnicodeNormalization;

pub use clean::{clean_element, DistilledElement, RawElement};
pub use config::{DistillerConfig, DistillerSettings, DEFAULT_WHITELIST};
pub use dom::{hides_itself, image_alts, is_visible, visible_text, Document, NodeHandle, NodePath};
pub use locator::{LocateError, Locator, LocatorBuilder};
pub use noise::{detect_noisy_string, detect_noisy_string_with, entropy_score, Dictionary};
pub use selectors::{bundled_selector_strings, InteractableSelector};
pub use tokens::{count_tokens, ApproxTokenizer, Tokenizer};

#[derive(Debug, thiserror::Error)]
pub enum DistillError {
    #[error("document could not be parsed into an element tree")]
    MalformedDocument,
    #[error("invalid selector {selector:?}: {message}")]
    Selector { selector: String, message: String },
    #[error("invalid distiller config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

/// Every element matching a configured selector, in document order. Selectors
/// ending in `:visible` only match elements that pass the visibility check.
pub fn extract_interactables(doc: &Document, config: &DistillerConfig) -> Result<Vec<RawElement>, DistillError> {
    let selectors = selectors::compile_all(&config.css_selectors)?;
    let locators = LocatorBuilder::new(doc);
    let mut out = Vec::new();
    for el in doc.elements() {
        let mut visible = None;
        let matched = selectors.iter().any(|s| {
            s.matches(&el) && (!s.require_visible || *visible.get_or_insert_with(|| is_visible(&el)))
        });
        if !matched {
            continue;
        }
        let visible = visible.unwrap_or_else(|| is_visible(&el));
        out.push(RawElement {
            node_id: doc.handle_of(&el),
            node_path: doc.path_of(&el),
            tag: el.value().name().to_ascii_lowercase(),
            attributes: el.value().attrs().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            inner_text: visible_text(el),
            image_alts: image_alts(el),
            visible,
            locator: locators.locate(&el, config),
        });
    }
    Ok(out)
}

fn normalize(s: &str) -> String {
    s.nfc().collect::<String>().to_lowercase()
}

fn search_haystack(el: &RawElement) -> String {
    let mut hay = String::new();
    for (k, v) in &el.attributes {
        hay.push_str(k);
        hay.push_str("=\"");
        hay.push_str(v);
        hay.push_str("\" ");
    }
    hay.push_str(&el.inner_text);
    for alt in &el.image_alts {
        hay.push(' ');
        hay.push_str(alt);
    }
    normalize(&hay)
}

/// Keeps elements whose attributes or text contain any of the search strings,
/// ignoring case. An empty string list keeps everything.
pub fn limit_by_search_strings(elements: &[RawElement], search_strings: &[String]) -> Vec<RawElement> {
    let needles: Vec<String> = search_strings.iter().map(|s| normalize(s.trim())).filter(|s| !s.is_empty()).collect();
    if needles.is_empty() {
        return elements.to_vec();
    }
    elements
        .iter()
        .filter(|el| {
            let hay = search_haystack(el);
            needles.iter().any(|n| hay.contains(n.as_str()))
        })
        .cloned()
        .collect()
}

/// Element counts after each stage of one distillation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct StageCounts {
    pub all_elements: usize,
    pub interactables: usize,
    pub limited: usize,
    pub distilled: usize,
}

pub fn distill_document(
    doc: &Document,
    search_strings: Option<&[String]>,
    config: &DistillerConfig,
) -> Result<(Vec<DistilledElement>, StageCounts), DistillError> {
    let raw = extract_interactables(doc, config)?;
    let limited = match search_strings {
        Some(s) => limit_by_search_strings(&raw, s),
        None => raw.clone(),
    };
    let distilled: Vec<DistilledElement> = limited
        .iter()
        .enumerate()
        .map(|(i, r)| DistilledElement { index: i + 1, ..clean_element(r, config) })
        .collect();
    let counts = StageCounts {
        all_elements: doc.element_count(),
        interactables: raw.len(),
        limited: limited.len(),
        distilled: distilled.len(),
    };
    Ok((distilled, counts))
}

/// Parses `html` and runs all three stages, numbering the result from 1.
pub fn distill_page(
    html: &str,
    search_strings: Option<&[String]>,
    config: &DistillerConfig,
) -> Result<Vec<DistilledElement>, DistillError> {
    let doc = Document::parse(html)?;
    Ok(distill_document(&doc, search_strings, config)?.0)
}

/// Visible page text, truncated to `budget` characters.
pub fn extract_page_text(doc: &Document, budget: usize) -> String {
    let text = doc.visible_text();
    match text.char_indices().nth(budget) {
        Some((cut, _)) => text[..cut].trim_end().to_string(),
        None => text,
    }
}

/// The indexed block used in prompts: `(i)` on one line, the element on the
/// next, blocks separated by a blank line.
pub fn render_indexed(elements: &[DistilledElement]) -> String {
    let mut out = String::new();
    for el in elements {
        if !out.is_empty() {
            out.push_str("\n\n");
        }
        out.push_str(&format!("({})\n{}", el.index, el.render()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_yields_nothing() {
        let out = distill_page("<html><body></body></html>", None, &DistillerConfig::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn div_is_not_interactable() {
        let doc = Document::parse("<body><button>Go</button><a href='/x'>X</a><div>plain</div></body>").unwrap();
        let raw = extract_interactables(&doc, &DistillerConfig::default()).unwrap();
        assert_eq!(raw.iter().map(|r| r.tag.as_str()).collect::<Vec<_>>(), vec!["button", "a"]);
    }

    #[test]
    fn hidden_elements_excluded() {
        let doc = Document::parse("<body><button hidden>A</button><div style='display:none'><a href=x>B</a></div><a href=y>C</a></body>").unwrap();
        let raw = extract_interactables(&doc, &DistillerConfig::default()).unwrap();
        assert_eq!(raw.len(), 1);
        assert_eq!(raw[0].inner_text, "C");
    }

    #[test]
    fn search_limits_by_text() {
        let doc = Document::parse("<body><a href=1>Tents</a><a href=2>Shelters</a><a href=3>Checkout</a></body>").unwrap();
        let raw = extract_interactables(&doc, &DistillerConfig::default()).unwrap();
        let limited = limit_by_search_strings(&raw, &["tents".into(), "camping".into()]);
        assert_eq!(limited.len(), 1);
        assert_eq!(limited[0].inner_text, "Tents");
        assert!(limit_by_search_strings(&raw, &["zzz".into()]).is_empty());
    }

    #[test]
    fn indexes_follow_limiting() {
        let html = "<body><button>One</button><a href=/tents>Tents</a><button>Two</button><a href=/camp>Camping</a><input name=q></body>";
        let cfg = DistillerConfig::default();
        let out = distill_page(html, Some(&["tents".into(), "camping".into()]), &cfg).unwrap();
        assert_eq!(out.iter().map(|e| e.index).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn search_matching_normalizes_unicode() {
        let doc = Document::parse("<body><a href=1>Cafe\u{301}</a></body>").unwrap();
        let raw = extract_interactables(&doc, &DistillerConfig::default()).unwrap();
        assert_eq!(limit_by_search_strings(&raw, &["CAF\u{c9}".into()]).len(), 1);
    }

    #[test]
    fn page_text() {
        let doc = Document::parse("<body><p>Hello</p><script>x()</script></body>").unwrap();
        assert_eq!(extract_page_text(&doc, 100), "Hello");
        let doc = Document::parse("<body></body>").unwrap();
        assert_eq!(extract_page_text(&doc, 100), "");
        let doc = Document::parse("<body><p>abc def ghi</p></body>").unwrap();
        assert_eq!(extract_page_text(&doc, 5), "abc d");
    }
}
