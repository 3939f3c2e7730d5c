//! Password-guess estimation in the zxcvbn style.
//!
//! The estimator enumerates every pattern it can find inside a string
//! (ranked dictionary words, reversed and l33t-substituted words, keyboard
//! walks, repeats, character sequences, recent years and dates) and then
//! searches for the non-overlapping match sequence that minimises the number
//! of guesses an attacker would need. Anything not covered by a pattern is
//! charged as brute force.
//!
//! The distiller only needs `log2(guesses) / len` to decide whether an
//! attribute value looks like machine-generated noise, but the full guess
//! count is exposed for testing against a reference implementation.

mod data;
mod matching;
mod scoring;

use std::sync::OnceLock;

pub use data::{AdjacencyGraph, RankedDictionary};

/// Owns the ranked dictionaries and keyboard graphs used for matching.
#[derive(Debug)]
pub struct GuessEstimator {
    dictionaries: Vec<RankedDictionary>,
    graphs: Vec<AdjacencyGraph>,
    keyboard_average_degree: f64,
    keypad_average_degree: f64,
    keyboard_starting_positions: f64,
    keypad_starting_positions: f64,
}

impl GuessEstimator {
    pub fn new(dictionaries: Vec<RankedDictionary>, graphs: Vec<AdjacencyGraph>) -> Self {
        let find = |name: &str| graphs.iter().find(|g| g.name == name);
        let (keyboard_average_degree, keyboard_starting_positions) = find("qwerty")
            .map(|g| (g.average_degree(), g.len() as f64))
            .unwrap_or((0.0, 0.0));
        let (keypad_average_degree, keypad_starting_positions) = find("keypad")
            .map(|g| (g.average_degree(), g.len() as f64))
            .unwrap_or((0.0, 0.0));
        Self {
            dictionaries,
            graphs,
            keyboard_average_degree,
            keypad_average_degree,
            keyboard_starting_positions,
            keypad_starting_positions,
        }
    }

    /// The estimator backed by the bundled frequency lists and keyboard layouts.
    pub fn bundled() -> &'static GuessEstimator {
        static BUNDLED: OnceLock<GuessEstimator> = OnceLock::new();
        BUNDLED.get_or_init(|| GuessEstimator::new(data::bundled_dictionaries(), data::bundled_graphs()))
    }

    /// Estimated number of guesses needed to find `password`.
    pub fn guesses(&self, password: &str) -> f64 {
        let chars: Vec<char> = password.chars().collect();
        self.guesses_for(&chars)
    }

    pub fn guesses_log2(&self, password: &str) -> f64 {
        self.guesses(password).log2()
    }

    fn guesses_for(&self, password: &[char]) -> f64 {
        let matches = matching::omnimatch(self, password);
        scoring::most_guessable(self, password, &matches)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Values frozen from the reference zxcvbn 4.5.0 Python package.
    #[test]
    fn matches_reference_guess_counts() {
        let est = GuessEstimator::bundled();
        let cases: &[(&str, f64)] = &[
            ("", 1.0),
            ("hidden", 1821.0),
            ("menuitem", 9415250.0),
            ("css-1x8zk9q", 100000000001.0),
            ("jx9qZk2vRb81tGm4", 10000000000000001.0),
        ];
        for (s, expected) in cases {
            let got = est.guesses(s);
            let rel = ((got - expected) / expected).abs();
            assert!(rel < 1e-9, "{s}: got {got}, expected {expected}");
        }
    }

    #[test]
    fn non_ascii_input_is_total() {
        let est = GuessEstimator::bundled();
        for s in ["İstanbul", "日本語テキスト", "ß\u{0301}x", "\n\n\n", "١٢٣٤٥"] {
            let g = est.guesses(s);
            assert!(g.is_finite() && g >= 1.0, "{s}: {g}");
        }
    }
}
