use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use scraper::{ElementRef, Selector};
use serde::{Deserialize, Serialize};

use super::config::DistillerConfig;
use super::dom::{visible_text, Document, NodeHandle, NodePath};
use super::noise::detect_noisy_string_with;
use super::DistillError;

/// Enough information to find a node again in a later parse of the same page.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Locator {
    Css { expression: String },
    /// Tag plus attribute equality on every listed pair.
    Attributes { tag: String, attributes: Vec<(String, String)> },
    /// Tag plus exact match on collapsed visible text.
    Text { tag: String, text: String },
}

impl fmt::Display for Locator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locator::Css { expression } => write!(f, "css={expression}"),
            Locator::Attributes { tag, attributes } => {
                write!(f, "attrs={tag}")?;
                for (k, v) in attributes {
                    write!(f, "[{k}={v:?}]")?;
                }
                Ok(())
            }
            Locator::Text { tag, text } => write!(f, "text={tag}:{text:?}"),
        }
    }
}

impl Locator {
    pub fn resolve(&self, doc: &Document) -> Result<Vec<NodeHandle>, DistillError> {
        Ok(match self {
            Locator::Css { expression } => {
                let sel = Selector::parse(expression)
                    .map_err(|e| DistillError::Selector { selector: expression.clone(), message: format!("{e:?}") })?;
                doc.html().select(&sel).map(|e| doc.handle_of(&e)).collect()
            }
            Locator::Attributes { tag, attributes } => doc
                .elements()
                .filter(|e| e.value().name() == tag && attributes.iter().all(|(k, v)| e.value().attr(k) == Some(v.as_str())))
                .map(|e| doc.handle_of(&e))
                .collect(),
            Locator::Text { tag, text } => doc
                .elements()
                .filter(|e| e.value().name() == tag && visible_text(*e) == *text)
                .map(|e| doc.handle_of(&e))
                .collect(),
        })
    }

    /// Equivalent CSS selector, when one exists.
    pub fn to_css(&self) -> Option<String> {
        match self {
            Locator::Css { expression } => Some(expression.clone()),
            Locator::Attributes { tag, attributes } => {
                let mut s = tag.clone();
                for (k, v) in attributes {
                    s.push_str(&format!("[{k}={}]", css_string(v)));
                }
                Some(s)
            }
            Locator::Text { .. } => None,
        }
    }

    /// XPath for text locators; matches on normalized text content, which
    /// approximates the visible-text rule used by `resolve`.
    pub fn to_xpath(&self) -> Option<String> {
        match self {
            Locator::Text { tag, text } => Some(format!("//{tag}[normalize-space(.)={}]", xpath_string(text))),
            _ => None,
        }
    }

    /// The single node this locator addresses, or an error naming why not.
    pub fn resolve_one(&self, doc: &Document) -> Result<NodeHandle, LocateError> {
        let found = self.resolve(doc).map_err(|_| LocateError::NotFound)?;
        match found.as_slice() {
            [] => Err(LocateError::NotFound),
            [one] => Ok(*one),
            many => Err(LocateError::Ambiguous(many.len())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocateError {
    NotFound,
    Ambiguous(usize),
}

pub fn css_string(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\a "),
            '\r' => out.push_str("\\d "),
            '\0' => out.push('\u{FFFD}'),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn xpath_string(value: &str) -> String {
    if !value.contains('"') {
        return format!("\"{value}\"");
    }
    if !value.contains('\'') {
        return format!("'{value}'");
    }
    let parts: Vec<String> = value.split('"').map(|p| format!("\"{p}\"")).collect();
    format!("concat({})", parts.join(", '\"', "))
}

fn is_simple_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic()) && chars.all(|c| c.is_ascii_alphanumeric() || c == '-')
}

pub fn nth_child_path(doc: &Document, path: &NodePath) -> String {
    let mut out = String::from(":root");
    let mut cur = doc.html().root_element();
    for &idx in &path.0 {
        let Some(next) = cur.child_elements().nth(idx) else { break };
        let name = next.value().name();
        out.push_str(" > ");
        if is_simple_ident(name) {
            out.push_str(name);
        }
        out.push_str(&format!(":nth-child({})", idx + 1));
        cur = next;
    }
    out
}

/// Chooses locators for elements of one document, preferring a unique id,
/// then a unique set of meaningful attributes, then unique text, then the
/// structural path.
pub struct LocatorBuilder<'d> {
    doc: &'d Document,
    ids: HashMap<String, usize>,
    by_tag: HashMap<String, Vec<NodeHandle>>,
    texts: RefCell<HashMap<String, Vec<String>>>,
}

impl<'d> LocatorBuilder<'d> {
    pub fn new(doc: &'d Document) -> Self {
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut by_tag: HashMap<String, Vec<NodeHandle>> = HashMap::new();
        for el in doc.elements() {
            if let Some(id) = el.value().attr("id") {
                *ids.entry(id.to_string()).or_default() += 1;
            }
            by_tag.entry(el.value().name().to_string()).or_default().push(doc.handle_of(&el));
        }
        Self { doc, ids, by_tag, texts: RefCell::new(HashMap::new()) }
    }

    fn same_tag(&self, tag: &str) -> impl Iterator<Item = ElementRef<'d>> + '_ {
        self.by_tag.get(tag).into_iter().flatten().filter_map(|h| self.doc.element(*h))
    }

    pub fn locate(&self, el: &ElementRef<'_>, config: &DistillerConfig) -> Locator {
        let v = el.value();
        let tag = v.name().to_string();
        if let Some(id) = v.attr("id") {
            if !id.is_empty() && self.ids.get(id) == Some(&1) {
                return Locator::Css { expression: format!("[id={}]", css_string(id)) };
            }
        }

        let attributes: Vec<(String, String)> = v
            .attrs()
            .filter(|(k, val)| {
                config.is_whitelisted(k)
                    && !val.is_empty()
                    && !detect_noisy_string_with(val, config.noise_threshold, &config.dictionary, config.max_attr_value_len)
            })
            .map(|(k, val)| (k.to_string(), val.to_string()))
            .collect();
        if !attributes.is_empty() {
            let count = self
                .same_tag(&tag)
                .filter(|o| attributes.iter().all(|(k, val)| o.value().attr(k) == Some(val.as_str())))
                .take(2)
                .count();
            if count == 1 {
                return Locator::Attributes { tag, attributes };
            }
        }

        let text = visible_text(*el);
        if !text.is_empty() {
            let mut texts = self.texts.borrow_mut();
            let list = texts.entry(tag.clone()).or_insert_with(|| self.same_tag(&tag).map(visible_text).collect());
            if list.iter().filter(|t| **t == text).take(2).count() == 1 {
                return Locator::Text { tag, text };
            }
        }

        Locator::Css { expression: nth_child_path(self.doc, &self.doc.path_of(el)) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn locate_all(html: &str) -> (Document, Vec<(NodeHandle, Locator)>) {
        let doc = Document::parse(html).unwrap();
        let cfg = DistillerConfig::default();
        let b = LocatorBuilder::new(&doc);
        let out = doc
            .elements()
            .filter(|e| matches!(e.value().name(), "a" | "button" | "input"))
            .map(|e| (doc.handle_of(&e), b.locate(&e, &cfg)))
            .collect();
        (doc, out)
    }

    #[test]
    fn strategies_in_preference_order() {
        let (doc, locs) = locate_all(
            r#"<body><a id="go" href="/a">A</a><a href="/b" title="bee">B</a><button>Same</button>
               <button>Unique</button><button>Same</button></body>"#,
        );
        assert!(matches!(&locs[0].1, Locator::Css { expression } if expression == "[id=\"go\"]"));
        assert!(matches!(&locs[1].1, Locator::Attributes { .. }));
        assert!(matches!(&locs[3].1, Locator::Text { text, .. } if text == "Unique"));
        assert!(matches!(&locs[2].1, Locator::Css { expression } if expression.contains("nth-child")));
        for (h, loc) in &locs {
            assert_eq!(loc.resolve_one(&doc), Ok(*h), "{loc}");
        }
    }

    #[test]
    fn duplicate_ids_fall_through() {
        let (doc, locs) = locate_all(r#"<body><a id="x" href="/1">one</a><a id="x" href="/2">two</a></body>"#);
        for (h, loc) in &locs {
            assert!(!matches!(loc, Locator::Css { expression } if expression.starts_with("[id")));
            assert_eq!(loc.resolve_one(&doc), Ok(*h));
        }
    }

    #[test]
    fn quotes_in_ids_are_escaped() {
        let (doc, locs) = locate_all(r#"<body><a id='say "hi"\now' href="/">x</a></body>"#);
        assert_eq!(locs[0].1.resolve_one(&doc), Ok(locs[0].0));
    }

    #[test]
    fn serializes_with_strategy_tag() {
        let loc = Locator::Text { tag: "a".into(), text: "Go".into() };
        let json = serde_json::to_string(&loc).unwrap();
        assert_eq!(json, r#"{"strategy":"text","tag":"a","text":"Go"}"#);
        assert_eq!(serde_json::from_str::<Locator>(&json).unwrap(), loc);
    }

    #[test]
    fn wire_forms() {
        let a = Locator::Attributes { tag: "a".into(), attributes: vec![("title".into(), "add \"x\"".into())] };
        assert_eq!(a.to_css().unwrap(), r#"a[title="add \"x\""]"#);
        let t = Locator::Text { tag: "b".into(), text: r#"it's "x""#.into() };
        assert_eq!(t.to_xpath().unwrap(), r#"//b[normalize-space(.)=concat("it's ", '"', "x", '"', "")]"#);
        assert!(t.to_css().is_none());
    }
}
