use proptest::prelude::*;
use serde::Deserialize;
use webpilot_core::distill::estimator::GuessEstimator;
use webpilot_core::distill::*;

#[derive(Deserialize)]
struct Case {
    input: String,
    threshold: f64,
    noisy: bool,
    guesses: Option<f64>,
}

fn cases() -> Vec<Case> {
    serde_json::from_str(include_str!("data/algorithm1_cases.json")).unwrap()
}

#[test]
fn noisy_string_table_agrees() {
    let dict = Dictionary::bundled();
    let mut bad = Vec::new();
    for c in cases() {
        if detect_noisy_string(&c.input, c.threshold, &dict) != c.noisy {
            bad.push(c.input.clone());
        }
    }
    assert!(bad.is_empty(), "disagreements: {bad:?}");
}

#[test]
fn guess_counts_agree() {
    let est = GuessEstimator::bundled();
    for c in cases() {
        let Some(expected) = c.guesses else { continue };
        let got = est.guesses(&c.input);
        assert!(((got - expected) / expected).abs() < 1e-9, "{:?}: got {got}, expected {expected}", c.input);
    }
}

const BARGAIN_CAVE: &str = r#"<html><body><ul>
<li class="hidden" role="menuitem">
    <a id="departmentButton_3074457345616967" href="https://www.cabelas.com/shop/en/bargain-cave-sale-and-clearance" class="departmentButton navBC" aria-haspopup="true" data-toggle="departmentMenu_3074457345616967">
        Bargain Cave
    </a>
    <div ...>
    </div>
</li>
</ul></body></html>"#;

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").replace("> ", ">").replace(" <", "<")
}

#[test]
fn bargain_cave_golden() {
    let out = distill_page(BARGAIN_CAVE, None, &DistillerConfig::default()).unwrap();
    let li = out.iter().find(|e| e.tag == "li").expect("li is interactable");
    assert_eq!(squash(&li.render()), squash("<li class=\"hidden\" role=\"menuitem\">\n    Bargain Cave\n</li>"));
}

fn page_strategy() -> impl Strategy<Value = String> {
    let tag = prop::sample::select(vec!["a", "button", "div", "span", "input", "li", "p", "select"]);
    let attr = prop::sample::select(vec![
        "",
        " href=\"/x\"",
        " class=\"menu-item\"",
        " class=\"css-1x8zk9q\"",
        " role=\"button\"",
        " hidden",
        " style=\"display:none\"",
        " title=\"camping tents\"",
        " id=\"q7zk2\"",
        " aria-label=\"Search\"",
    ]);
    let text = prop::sample::select(vec!["", "Tents", "Camping", "Checkout", "Sign in", "x"]);
    prop::collection::vec((tag, attr, text), 0..25).prop_map(|items| {
        let mut html = String::from("<html><body>");
        for (t, a, x) in items {
            html.push_str(&format!("<{t}{a}>{x}</{t}>"));
        }
        html.push_str("</body></html>");
        html
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stage_sizes_shrink(html in page_strategy(), keys in prop::collection::vec("[a-z]{1,5}", 0..3)) {
        let cfg = DistillerConfig::default();
        let doc = Document::parse(&html).unwrap();
        let (out, counts) = distill_document(&doc, Some(&keys), &cfg).unwrap();
        prop_assert!(counts.distilled <= counts.limited);
        prop_assert!(counts.limited <= counts.interactables);
        prop_assert!(counts.interactables <= counts.all_elements);
        prop_assert_eq!(out.iter().map(|e| e.index).collect::<Vec<_>>(), (1..=out.len()).collect::<Vec<_>>());
        for el in &out {
            prop_assert!(el.render().chars().count() <= cfg.per_element_char_cap);
            for (k, v) in &el.kept_attributes {
                prop_assert!(cfg.is_whitelisted(k));
                prop_assert!(!detect_noisy_string(v, cfg.noise_threshold, &cfg.dictionary));
            }
        }
    }

    #[test]
    fn cleaning_is_idempotent(html in page_strategy()) {
        let cfg = DistillerConfig::default();
        for el in distill_page(&html, None, &cfg).unwrap() {
            let again = DistilledElement { index: el.index, ..clean_element(&el.to_raw(), &cfg) };
            prop_assert_eq!(again, el);
        }
    }

    #[test]
    fn limiting_is_an_order_preserving_filter(html in page_strategy(), keys in prop::collection::vec("[a-z]{1,4}", 1..3)) {
        let doc = Document::parse(&html).unwrap();
        let raw = extract_interactables(&doc, &DistillerConfig::default()).unwrap();
        let limited = limit_by_search_strings(&raw, &keys);
        let mut it = raw.iter();
        for el in &limited {
            prop_assert!(it.any(|r| r == el));
        }
    }

    #[test]
    fn locators_resolve_to_their_node(html in page_strategy()) {
        let doc = Document::parse(&html).unwrap();
        for el in extract_interactables(&doc, &DistillerConfig::default()).unwrap() {
            prop_assert_eq!(el.locator.resolve_one(&doc), Ok(el.node_id));
        }
    }

    #[test]
    fn noisy_predicate_is_total(s in "\\PC{0,120}", t in 0.01f64..5.0) {
        let _ = detect_noisy_string(&s, t, &Dictionary::bundled());
    }

    #[test]
    fn raising_threshold_never_makes_noise(s in "[a-zA-Z0-9_-]{3,40}", t1 in 0.05f64..4.0, dt in 0.0f64..3.0) {
        let d = Dictionary::bundled();
        if !detect_noisy_string(&s, t1, &d) {
            prop_assert!(!detect_noisy_string(&s, t1 + dt, &d));
        }
    }
}
