//! Parsed-document wrapper: element enumeration in document order, structural
//! node paths, visibility and visible-text extraction.

use std::collections::HashMap;

use ego_tree::NodeId;
use scraper::{ElementRef, Html, Node};
use serde::{Deserialize, Serialize};

use super::DistillError;

/// Position of an element in document (pre-)order, counting elements only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeHandle(pub usize);

/// Child-element indexes from the root element down to a node. Identifies a
/// node structurally, independent of attribute order or serialization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct NodePath(pub Vec<usize>);

impl NodePath {
    pub fn is_ancestor_of(&self, other: &NodePath) -> bool {
        self.0.len() < other.0.len() && other.0.starts_with(&self.0)
    }

    /// Parent or child relation, the near-miss case in evaluation.
    pub fn is_adjacent_to(&self, other: &NodePath) -> bool {
        (self.0.len() + 1 == other.0.len() && self.is_ancestor_of(other))
            || (other.0.len() + 1 == self.0.len() && other.is_ancestor_of(self))
    }
}

const SKIPPED_TEXT_TAGS: &[&str] = &["script", "style", "noscript", "template", "head", "title"];

/// Inline elements whose boundaries do not separate words.
const INLINE_TAGS: &[&str] = &[
    "a", "abbr", "b", "bdi", "bdo", "cite", "code", "data", "em", "i", "kbd", "label", "mark", "q", "s", "samp",
    "small", "span", "strong", "sub", "sup", "time", "u", "var",
];

pub struct Document {
    html: Html,
    order: Vec<NodeId>,
    handles: HashMap<NodeId, usize>,
}

impl std::fmt::Debug for Document {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Document").field("elements", &self.order.len()).finish()
    }
}

impl Document {
    /// Parses with HTML5 error recovery. Fails only when no element tree
    /// comes out of the parser.
    pub fn parse(source: &str) -> Result<Self, DistillError> {
        let html = Html::parse_document(source);
        let root = html.root_element();
        let order: Vec<NodeId> = std::iter::once(root).chain(root.descendent_elements()).map(|e| e.id()).collect();
        if order.is_empty() {
            return Err(DistillError::MalformedDocument);
        }
        let handles = order.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        Ok(Self { html, order, handles })
    }

    pub fn html(&self) -> &Html {
        &self.html
    }

    /// Number of elements in the document.
    pub fn element_count(&self) -> usize {
        self.order.len()
    }

    pub fn elements(&self) -> impl Iterator<Item = ElementRef<'_>> + '_ {
        self.order.iter().filter_map(|id| self.html.tree.get(*id).and_then(ElementRef::wrap))
    }

    pub fn element(&self, handle: NodeHandle) -> Option<ElementRef<'_>> {
        let id = *self.order.get(handle.0)?;
        self.html.tree.get(id).and_then(ElementRef::wrap)
    }

    pub fn handle_of(&self, el: &ElementRef<'_>) -> NodeHandle {
        NodeHandle(self.handles.get(&el.id()).copied().unwrap_or(usize::MAX))
    }

    pub fn path_of(&self, el: &ElementRef<'_>) -> NodePath {
        let mut path = Vec::new();
        let mut cur = **el;
        while let Some(parent) = cur.parent() {
            if ElementRef::wrap(parent).is_none() {
                break;
            }
            let idx = parent.children().filter(|c| c.value().is_element()).position(|c| c.id() == cur.id()).unwrap_or(0);
            path.push(idx);
            cur = parent;
        }
        path.reverse();
        NodePath(path)
    }

    pub fn element_at_path(&self, path: &NodePath) -> Option<ElementRef<'_>> {
        let mut cur = self.html.root_element();
        for &idx in &path.0 {
            cur = cur.child_elements().nth(idx)?;
        }
        Some(cur)
    }

    /// Visible text of the whole document, whitespace-collapsed.
    pub fn visible_text(&self) -> String {
        visible_text(self.html.root_element())
    }
}

fn style_hides(style: &str) -> bool {
    let compact: String = style.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
    compact.split(';').any(|decl| decl == "display:none" || decl == "visibility:hidden" || decl.starts_with("display:none!") || decl.starts_with("visibility:hidden!"))
}

/// Attribute/style based hiding of a single element, ignoring ancestors.
pub fn hides_itself(el: &ElementRef<'_>) -> bool {
    let v = el.value();
    if v.attr("hidden").is_some() {
        return true;
    }
    if v.attr("aria-hidden").is_some_and(|a| a.trim().eq_ignore_ascii_case("true")) {
        return true;
    }
    if v.name() == "input" && v.attr("type").is_some_and(|t| t.trim().eq_ignore_ascii_case("hidden")) {
        return true;
    }
    if SKIPPED_TEXT_TAGS.contains(&v.name()) {
        return true;
    }
    v.attr("style").is_some_and(style_hides)
}

/// Best-effort visibility without layout: the element and all of its
/// ancestors must not be hidden by attribute, style, or by living in `<head>`.
pub fn is_visible(el: &ElementRef<'_>) -> bool {
    if hides_itself(el) {
        return false;
    }
    el.ancestors().filter_map(ElementRef::wrap).all(|a| !hides_itself(&a))
}

fn push_text(out: &mut String, text: &str) {
    for word in text.split_whitespace() {
        if !out.is_empty() && !out.ends_with(' ') && !out.ends_with('\u{0}') {
            out.push(' ');
        }
        out.push_str(word);
    }
}

fn collect_text(el: ElementRef<'_>, out: &mut String, glue: &mut bool) {
    for child in el.children() {
        match child.value() {
            Node::Text(t) => {
                let s: &str = t;
                if s.trim().is_empty() {
                    if !s.is_empty() {
                        *glue = false;
                    }
                    continue;
                }
                let starts_ws = s.starts_with(char::is_whitespace);
                if *glue && !starts_ws {
                    // continue the previous word across an inline boundary
                    let mut words = s.split_whitespace();
                    if let Some(first) = words.next() {
                        out.push_str(first);
                    }
                    for w in words {
                        out.push(' ');
                        out.push_str(w);
                    }
                } else {
                    push_text(out, s);
                }
                *glue = !s.ends_with(char::is_whitespace);
            }
            Node::Element(_) => {
                let Some(child_el) = ElementRef::wrap(child) else { continue };
                if hides_itself(&child_el) {
                    continue;
                }
                let inline = INLINE_TAGS.contains(&child_el.value().name());
                if !inline {
                    *glue = false;
                }
                collect_text(child_el, out, glue);
                if !inline {
                    *glue = false;
                }
            }
            _ => {}
        }
    }
}

/// Depth-first visible text under `el`, whitespace-collapsed. Text inside
/// inline elements joins its neighbours without an extra space.
pub fn visible_text(el: ElementRef<'_>) -> String {
    let mut out = String::new();
    let mut glue = false;
    collect_text(el, &mut out, &mut glue);
    out
}

/// Alt text of visible descendant images, in document order.
pub fn image_alts(el: ElementRef<'_>) -> Vec<String> {
    el.descendent_elements()
        .filter(|d| d.value().name() == "img" && is_visible(d))
        .filter_map(|d| d.value().attr("alt").map(|a| a.split_whitespace().collect::<Vec<_>>().join(" ")))
        .filter(|a| !a.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_skips_scripts_and_hidden_nodes() {
        let doc = Document::parse("<body><p>Hello</p><script>x()</script><div hidden>secret</div><p>there <b>big</b>world</p></body>").unwrap();
        assert_eq!(doc.visible_text(), "Hello there bigworld");
    }

    #[test]
    fn nested_text_is_depth_first() {
        let doc = Document::parse("<body><div>a<div>b<span>c</span></div>d</div><p>e</p></body>").unwrap();
        assert_eq!(doc.visible_text(), "a bc d e");
    }

    #[test]
    fn paths_round_trip() {
        let doc = Document::parse("<html><body><ul><li>a</li><li><a href='#'>b</a></li></ul></body></html>").unwrap();
        for el in doc.elements() {
            let p = doc.path_of(&el);
            assert_eq!(doc.element_at_path(&p).map(|e| e.id()), Some(el.id()));
        }
    }

    #[test]
    fn visibility_rules() {
        let doc = Document::parse(
            r#"<body><a id=a1 href=x>x</a><div style="display: none"><a id=a2>y</a></div>
            <a id=a3 aria-hidden="true">z</a><input id=a4 type=hidden><a id=a5 class="hidden">ok</a></body>"#,
        )
        .unwrap();
        let vis: Vec<_> = doc.elements().filter(|e| e.value().name() != "html").filter(|e| e.value().attr("id").is_some()).map(|e| (e.value().attr("id").unwrap().to_string(), is_visible(&e))).collect();
        assert_eq!(
            vis,
            vec![("a1".into(), true), ("a2".into(), false), ("a3".into(), false), ("a4".into(), false), ("a5".into(), true)]
        );
    }

    #[test]
    fn adjacency_of_paths() {
        let a = NodePath(vec![1, 2]);
        let b = NodePath(vec![1, 2, 0]);
        let c = NodePath(vec![1, 2, 0, 4]);
        assert!(a.is_adjacent_to(&b) && b.is_adjacent_to(&a));
        assert!(!a.is_adjacent_to(&c));
    }
}
