use std::collections::HashSet;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use super::estimator::GuessEstimator;
use super::DistillError;

const BUNDLED_WORDS: &str = include_str!("../../data/words_en.txt");

/// Shortest dictionary word that counts as "containing a word".
pub const MIN_WORD_LEN: usize = 3;

/// Word corpus for the dictionary-word check. Words are stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dictionary {
    words: HashSet<String>,
    max_len: usize,
}

impl Dictionary {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = HashSet::new();
        let mut max_len = 0;
        for w in words {
            let w = w.as_ref().trim().to_lowercase();
            let n = w.chars().count();
            if n < MIN_WORD_LEN {
                continue;
            }
            max_len = max_len.max(n);
            set.insert(w);
        }
        Self { words: set, max_len }
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Self::from_words(data_lines(text))
    }

    pub fn load(path: &Path) -> Result<Self, DistillError> {
        let text = std::fs::read_to_string(path).map_err(|e| DistillError::Io { path: path.to_path_buf(), source: e })?;
        Ok(Self::parse(&text))
    }

    pub fn bundled() -> Arc<Dictionary> {
        static BUNDLED: OnceLock<Arc<Dictionary>> = OnceLock::new();
        BUNDLED.get_or_init(|| Arc::new(Dictionary::parse(BUNDLED_WORDS))).clone()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    /// Whether any listed word occurs in `s` as a case-insensitive substring.
    pub fn contains_word_in(&self, s: &str) -> bool {
        let lowered: Vec<char> = s.chars().flat_map(char::to_lowercase).collect();
        let mut buf = String::new();
        for i in 0..lowered.len() {
            buf.clear();
            let end = lowered.len().min(i + self.max_len);
            for (k, c) in lowered[i..end].iter().enumerate() {
                buf.push(*c);
                if k + 1 >= MIN_WORD_LEN && self.words.contains(&buf) {
                    return true;
                }
            }
        }
        false
    }
}

/// Non-empty, non-comment lines of a data file.
pub fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// `log2(guesses) / len`, the per-character guess entropy of `s`.
pub fn entropy_score(s: &str) -> f64 {
    let len = s.chars().count();
    if len == 0 {
        return 0.0;
    }
    GuessEstimator::bundled().guesses_log2(s) / len as f64
}

/// Decides whether an attribute value is machine-generated noise.
///
/// Values of `max_len` chars or more are always noise and values of two chars
/// or fewer never are. Otherwise a value is noise when it contains no
/// dictionary word and its per-character guess entropy exceeds `threshold`.
pub fn detect_noisy_string_with(s: &str, threshold: f64, dictionary: &Dictionary, max_len: usize) -> bool {
    let len = s.chars().count();
    if len >= max_len {
        return true;
    }
    if len <= 2 {
        return false;
    }
    if dictionary.contains_word_in(s) {
        return false;
    }
    entropy_score(s) > threshold
}

pub fn detect_noisy_string(s: &str, threshold: f64, dictionary: &Dictionary) -> bool {
    detect_noisy_string_with(s, threshold, dictionary, 100)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_branches() {
        let d = Dictionary::bundled();
        assert!(detect_noisy_string(&"a".repeat(150), 0.65, &d));
        assert!(detect_noisy_string(&"b".repeat(100), 1e9, &d));
        assert!(!detect_noisy_string("ab", 0.0001, &d));
        assert!(!detect_noisy_string("", 0.0001, &d));
    }

    #[test]
    fn words_and_hashes() {
        let d = Dictionary::bundled();
        assert!(!detect_noisy_string("add-to-cart-button", 0.65, &d));
        assert!(detect_noisy_string("jx9qZk2vRb81tGm4", 0.65, &d));
        assert!(detect_noisy_string("css-1x8zk9q", 0.65, &d));
        assert!(!detect_noisy_string("hidden", 0.65, &d));
        assert!(!detect_noisy_string("menuitem", 0.65, &d));
    }

    #[test]
    fn word_check_is_case_insensitive() {
        let d = Dictionary::from_words(["cart"]);
        assert!(d.contains_word_in("AddToCART"));
        assert!(!d.contains_word_in("car"));
    }

    #[test]
    fn short_words_are_ignored() {
        let d = Dictionary::from_words(["an", "of", "zebra"]);
        assert_eq!(d.len(), 1);
        assert!(!d.contains_word_in("xanofx"));
    }

    #[test]
    fn bundled_list_contents() {
        let d = Dictionary::bundled();
        assert!(d.len() > 9000);
        for w in ["cart", "button", "menu", "hidden", "camping", "search"] {
            assert!(d.contains(w), "{w}");
        }
        for w in ["css", "nav", "btn"] {
            assert!(!d.contains(w), "{w}");
        }
    }
}
