//! Parsers for the short response formats the prompts ask for.

use crate::action::ActionVerb;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no `ELEMENTS [...]` list in response")]
    NoElementList,
    #[error("no recognised action verb in response")]
    UnknownVerb,
    #[error("action verb {0} is not followed by an element index")]
    MissingIndex(ActionVerb),
    #[error("index {index} is outside 1..={max}")]
    OutOfRange { index: usize, max: usize },
    #[error("response does not start with yes or no")]
    NotYesNo,
    #[error("no integer in response")]
    NoInteger,
}

fn find_ascii_ci(hay: &str, needle: &str, from: usize) -> Option<usize> {
    let h = hay.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (from..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn parse_int_list(inner: &str) -> Option<Vec<usize>> {
    let inner = inner.trim();
    if inner.is_empty() {
        return Some(Vec::new());
    }
    inner.split(',').map(|p| p.trim().trim_matches(|c| c == '(' || c == ')').trim().parse::<usize>().ok()).collect()
}

/// The first `[...]` integer list after the word ELEMENTS, duplicates removed.
pub fn parse_element_list(text: &str) -> Result<Vec<usize>, ParseError> {
    let mut from = 0;
    while let Some(pos) = find_ascii_ci(text, "elements", from) {
        from = pos + "elements".len();
        let rest = &text[from..];
        let after = rest.trim_start().trim_start_matches(':').trim_start();
        let Some(list) = after.strip_prefix('[') else { continue };
        let Some(close) = list.find(']') else { continue };
        if let Some(items) = parse_int_list(&list[..close]) {
            let mut seen = std::collections::HashSet::new();
            return Ok(items.into_iter().filter(|i| seen.insert(*i)).collect());
        }
    }
    Err(ParseError::NoElementList)
}

fn strip_wrapping(text: &str) -> &str {
    text.trim().trim_matches(|c: char| c == '"' || c == '\'' || c == '`' || c == '*').trim()
}

fn leading_word(text: &str) -> &str {
    let end = text.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(text.len());
    &text[..end]
}

fn leading_index(text: &str) -> Option<usize> {
    let t = text.trim_start();
    let t = t.strip_prefix('(').or_else(|| t.strip_prefix('[')).unwrap_or(t).trim_start();
    let digits = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    t[..digits].parse().ok()
}

/// Reads `<verb> (<k>)` or `<verb> <k>`. A response starting with "None"
/// means no candidate fits.
pub fn parse_action_selection(text: &str, n_candidates: usize) -> Result<Option<(ActionVerb, usize)>, ParseError> {
    let t = strip_wrapping(text);
    if leading_word(t).eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let mut rest = t;
    while !rest.is_empty() {
        let word = leading_word(rest);
        if word.is_empty() {
            let skip = rest.chars().next().map_or(0, char::len_utf8);
            rest = &rest[skip..];
            continue;
        }
        let after = &rest[word.len()..];
        if let Ok(verb) = word.parse::<ActionVerb>() {
            let index = leading_index(after).ok_or(ParseError::MissingIndex(verb))?;
            if index == 0 || index > n_candidates {
                return Err(ParseError::OutOfRange { index, max: n_candidates });
            }
            return Ok(Some((verb, index)));
        }
        rest = after;
    }
    Err(ParseError::UnknownVerb)
}

/// True for a leading "yes", false for a leading "no", ignoring case and
/// whatever follows.
pub fn parse_yes_no(text: &str) -> Result<bool, ParseError> {
    let word = leading_word(strip_wrapping(text));
    if word.eq_ignore_ascii_case("yes") {
        Ok(true)
    } else if word.eq_ignore_ascii_case("no") {
        Ok(false)
    } else {
        Err(ParseError::NotYesNo)
    }
}

/// The first integer in the text, checked against 1..=n_options.
pub fn parse_option_index(text: &str, n_options: usize) -> Result<usize, ParseError> {
    let start = text.find(|c: char| c.is_ascii_digit()).ok_or(ParseError::NoInteger)?;
    let rest = &text[start..];
    let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    let value = rest[..end].parse::<usize>().unwrap_or(usize::MAX);
    if value == 0 || value > n_options {
        return Err(ParseError::OutOfRange { index: value, max: n_options });
    }
    Ok(value)
}

/// Keywords from a JSON string array, or failing that from comma or newline
/// separated text. Lowercased, deduplicated, at most `max`.
pub fn parse_search_keys(text: &str, max: usize) -> Vec<String> {
    let from_json = text.find('[').and_then(|s| {
        let e = text[s..].find(']')? + s;
        serde_json::from_str::<Vec<String>>(&text[s..=e]).ok()
    });
    let raw: Vec<String> = match from_json {
        Some(v) => v,
        None => text.split([',', '\n']).map(|s| s.to_string()).collect(),
    };
    let mut out: Vec<String> = Vec::new();
    for k in raw {
        let k = k.trim().trim_matches(|c: char| c == '"' || c == '\'' || c == '-' || c == '*').trim().to_lowercase();
        if !k.is_empty() && !out.contains(&k) {
            out.push(k);
        }
        if out.len() == max {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_lists() {
        assert_eq!(
            parse_element_list("ELEMENTS [9,1,22,109,84,31,33,77,72,81,117,4,50,54,41]").unwrap(),
            vec![9, 1, 22, 109, 84, 31, 33, 77, 72, 81, 117, 4, 50, 54, 41]
        );
        assert_eq!(parse_element_list("Based on the state, ELEMENTS [3, 1].").unwrap(), vec![3, 1]);
        assert_eq!(parse_element_list("ELEMENTS [2,2,5]").unwrap(), vec![2, 5]);
        assert_eq!(parse_element_list("elements: [ (4), 7 ]").unwrap(), vec![4, 7]);
        assert_eq!(parse_element_list("ELEMENTS [x] then ELEMENTS [6]").unwrap(), vec![6]);
        assert_eq!(parse_element_list("no list"), Err(ParseError::NoElementList));
        assert_eq!(parse_element_list("[1,2]"), Err(ParseError::NoElementList));
    }

    #[test]
    fn action_selection() {
        assert_eq!(parse_action_selection("click (1)", 15).unwrap(), Some((ActionVerb::Click, 1)));
        assert_eq!(parse_action_selection("type_text 4", 15).unwrap(), Some((ActionVerb::TypeText, 4)));
        assert_eq!(parse_action_selection("\"select_option (2)\"", 3).unwrap(), Some((ActionVerb::SelectOption, 2)));
        assert_eq!(parse_action_selection("None", 15).unwrap(), None);
        assert_eq!(parse_action_selection("None of these fit.", 15).unwrap(), None);
        assert_eq!(parse_action_selection("type_and_enter (4)", 15), Err(ParseError::UnknownVerb));
        assert_eq!(parse_action_selection("click (16)", 15), Err(ParseError::OutOfRange { index: 16, max: 15 }));
        assert_eq!(parse_action_selection("click it", 15), Err(ParseError::MissingIndex(ActionVerb::Click)));
    }

    #[test]
    fn yes_no() {
        assert_eq!(parse_yes_no("Yes \u{2014} the actions complete the task."), Ok(true));
        assert_eq!(parse_yes_no("no"), Ok(false));
        assert_eq!(parse_yes_no("\"No\", because"), Ok(false));
        assert_eq!(parse_yes_no("Maybe"), Err(ParseError::NotYesNo));
        assert_eq!(parse_yes_no("Nope"), Err(ParseError::NotYesNo));
    }

    #[test]
    fn option_index() {
        assert_eq!(parse_option_index("2", 3), Ok(2));
        assert_eq!(parse_option_index("(1)", 3), Ok(1));
        assert_eq!(parse_option_index("7", 3), Err(ParseError::OutOfRange { index: 7, max: 3 }));
        assert_eq!(parse_option_index("none", 3), Err(ParseError::NoInteger));
        assert!(parse_option_index("99999999999999999999999", 3).is_err());
    }

    #[test]
    fn search_keys() {
        assert_eq!(parse_search_keys("[\"Shelters\", \"tents\", \"camping\"]", 8), vec!["shelters", "tents", "camping"]);
        assert_eq!(parse_search_keys("login, Button\nlogin", 8), vec!["login", "button"]);
        assert!(parse_search_keys("", 8).is_empty());
        assert_eq!(parse_search_keys("a,b,c", 2).len(), 2);
    }
}
