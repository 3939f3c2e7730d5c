use serde::{Deserialize, Serialize};

use super::config::DistillerConfig;
use super::dom::{NodeHandle, NodePath};
use super::locator::Locator;
use super::noise::detect_noisy_string_with;

/// An interactable element as found in the page, before cleaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawElement {
    pub node_id: NodeHandle,
    pub node_path: NodePath,
    pub tag: String,
    pub attributes: Vec<(String, String)>,
    pub inner_text: String,
    /// Alt text of visible descendant images.
    pub image_alts: Vec<String>,
    pub visible: bool,
    pub locator: Locator,
}

/// A cleaned element ready for prompting. `index` is 1-based once assigned
/// and 0 before.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistilledElement {
    pub index: usize,
    pub tag: String,
    pub kept_attributes: Vec<(String, String)>,
    pub inner_text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub image_alts: Vec<String>,
    pub locator: Locator,
    pub node_id: NodeHandle,
    pub node_path: NodePath,
}

const VOID_TAGS: &[&str] =
    &["area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source", "track", "wbr"];

fn escape_attr(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '<' => out.push_str("&lt;"),
            c => out.push(c),
        }
    }
}

fn escape_text(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
}

fn render_parts(tag: &str, attrs: &[(String, String)], text: &str, alts: &[String]) -> String {
    let mut out = String::new();
    out.push('<');
    out.push_str(tag);
    for (k, v) in attrs {
        out.push(' ');
        out.push_str(k);
        out.push_str("=\"");
        escape_attr(v, &mut out);
        out.push('"');
    }
    out.push('>');
    let void = VOID_TAGS.contains(&tag);
    if void && text.is_empty() && alts.is_empty() {
        return out;
    }
    escape_text(text, &mut out);
    for (i, alt) in alts.iter().enumerate() {
        if i > 0 || !text.is_empty() {
            out.push(' ');
        }
        out.push_str("<img alt=\"");
        escape_attr(alt, &mut out);
        out.push_str("\">");
    }
    out.push_str("</");
    out.push_str(tag);
    out.push('>');
    out
}

impl DistilledElement {
    /// Single-line HTML-like rendering used inside prompts.
    pub fn render(&self) -> String {
        render_parts(&self.tag, &self.kept_attributes, &self.inner_text, &self.image_alts)
    }

    /// The element viewed as raw input again, for re-cleaning.
    pub fn to_raw(&self) -> RawElement {
        RawElement {
            node_id: self.node_id,
            node_path: self.node_path.clone(),
            tag: self.tag.clone(),
            attributes: self.kept_attributes.clone(),
            inner_text: self.inner_text.clone(),
            image_alts: self.image_alts.clone(),
            visible: true,
            locator: self.locator.clone(),
        }
    }
}

/// Keeps whitelisted, non-noisy attributes and the element's text, then
/// trims the result to the per-element character cap.
pub fn clean_element(raw: &RawElement, config: &DistillerConfig) -> DistilledElement {
    let kept_attributes: Vec<(String, String)> = raw
        .attributes
        .iter()
        .filter(|(k, v)| {
            config.is_whitelisted(k)
                && !detect_noisy_string_with(v, config.noise_threshold, &config.dictionary, config.max_attr_value_len)
        })
        .cloned()
        .collect();
    let mut el = DistilledElement {
        index: 0,
        tag: raw.tag.clone(),
        kept_attributes,
        inner_text: raw.inner_text.clone(),
        image_alts: raw.image_alts.clone(),
        locator: raw.locator.clone(),
        node_id: raw.node_id,
        node_path: raw.node_path.clone(),
    };
    fit_to_cap(&mut el, config.per_element_char_cap);
    el
}

fn fit_to_cap(el: &mut DistilledElement, cap: usize) {
    loop {
        let len = el.render().chars().count();
        if len <= cap {
            return;
        }
        let over = len - cap;
        if !el.inner_text.is_empty() {
            let n = el.inner_text.chars().count();
            let keep = n.saturating_sub(over);
            el.inner_text = el.inner_text.chars().take(keep).collect::<String>().trim_end().to_string();
        } else if !el.image_alts.is_empty() {
            el.image_alts.pop();
        } else if !el.kept_attributes.is_empty() {
            el.kept_attributes.pop();
        } else {
            // only a pathological tag name is left; nothing sensible to keep
            el.tag = el.tag.chars().take(cap.saturating_sub(5) / 2).collect();
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(tag: &str, attrs: &[(&str, &str)], text: &str) -> RawElement {
        RawElement {
            node_id: NodeHandle(0),
            node_path: NodePath::default(),
            tag: tag.into(),
            attributes: attrs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            inner_text: text.into(),
            image_alts: vec![],
            visible: true,
            locator: Locator::Css { expression: ":root".into() },
        }
    }

    #[test]
    fn bare_button_unchanged() {
        let cfg = DistillerConfig::default();
        let el = clean_element(&raw("button", &[], "OK"), &cfg);
        assert_eq!(el.render(), "<button>OK</button>");
    }

    #[test]
    fn drops_unlisted_and_noisy() {
        let cfg = DistillerConfig::default();
        let el = clean_element(
            &raw("a", &[("class", "css-1x8zk9q"), ("href", "/tents"), ("title", "tents"), ("data-x", "1")], "Tents"),
            &cfg,
        );
        assert_eq!(el.render(), r#"<a href="/tents" title="tents">Tents</a>"#);
    }

    #[test]
    fn long_values_dropped() {
        let cfg = DistillerConfig::default();
        let long = format!("/shop/{}", "camping-".repeat(20));
        let el = clean_element(&raw("a", &[("href", &long), ("title", "camping")], "x"), &cfg);
        assert_eq!(el.kept_attributes, vec![("title".to_string(), "camping".to_string())]);
    }

    #[test]
    fn cap_truncates_text_then_attributes() {
        let cfg = DistillerConfig { per_element_char_cap: 64, ..Default::default() };
        let el = clean_element(&raw("a", &[("title", "camping gear for the whole family")], &"word ".repeat(50)), &cfg);
        assert!(el.render().chars().count() <= 64);
        assert_eq!(el.kept_attributes.len(), 1);
        let el = clean_element(
            &raw("a", &[("title", &"camping ".repeat(10)), ("name", &"family ".repeat(10))], "x"),
            &cfg,
        );
        assert!(el.render().chars().count() <= 64);
        assert!(el.inner_text.is_empty());
    }

    #[test]
    fn escapes_markup() {
        let cfg = DistillerConfig::default();
        let el = clean_element(&raw("a", &[("title", "say \"hi\" & go")], "1 < 2"), &cfg);
        assert_eq!(el.render(), r#"<a title="say &quot;hi&quot; &amp; go">1 &lt; 2</a>"#);
    }

    #[test]
    fn void_and_alts() {
        let cfg = DistillerConfig::default();
        assert_eq!(clean_element(&raw("input", &[("type", "text")], ""), &cfg).render(), r#"<input type="text">"#);
        let mut r = raw("a", &[], "Shop");
        r.image_alts = vec!["logo".into()];
        assert_eq!(clean_element(&r, &cfg).render(), r#"<a>Shop <img alt="logo"></a>"#);
    }
}
