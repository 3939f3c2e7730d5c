use std::collections::{BTreeMap, HashMap};

const PASSWORDS: &str = include_str!("../../../data/zxcvbn/passwords.txt");
const ENGLISH_WIKIPEDIA: &str = include_str!("../../../data/zxcvbn/english_wikipedia.txt");
const FEMALE_NAMES: &str = include_str!("../../../data/zxcvbn/female_names.txt");
const SURNAMES: &str = include_str!("../../../data/zxcvbn/surnames.txt");
const US_TV_AND_FILM: &str = include_str!("../../../data/zxcvbn/us_tv_and_film.txt");
const MALE_NAMES: &str = include_str!("../../../data/zxcvbn/male_names.txt");
const ADJACENCY_GRAPHS: &str = include_str!("../../../data/zxcvbn/adjacency_graphs.json");

/// A frequency-ranked word list; rank 1 is the most common entry.
#[derive(Debug, Clone)]
pub struct RankedDictionary {
    pub name: String,
    ranks: HashMap<String, u32>,
    max_len: usize,
}

impl RankedDictionary {
    /// Builds a dictionary from words in rank order. A word listed twice keeps
    /// its later rank.
    pub fn from_ordered<I, S>(name: impl Into<String>, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ranks = HashMap::new();
        let mut max_len = 0;
        for (idx, w) in words.into_iter().enumerate() {
            let w = w.into();
            max_len = max_len.max(w.chars().count());
            ranks.insert(w, idx as u32 + 1);
        }
        Self { name: name.into(), ranks, max_len }
    }

    pub fn rank(&self, word: &str) -> Option<u32> {
        self.ranks.get(word).copied()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

/// Keyboard adjacency: for every key, its neighbours in a fixed direction
/// order. Each neighbour is the unshifted/shifted character pair.
#[derive(Debug, Clone)]
pub struct AdjacencyGraph {
    pub name: String,
    keys: HashMap<char, Vec<Option<Vec<char>>>>,
}

impl AdjacencyGraph {
    pub fn new(name: impl Into<String>, keys: HashMap<char, Vec<Option<Vec<char>>>>) -> Self {
        Self { name: name.into(), keys }
    }

    pub fn neighbours(&self, c: char) -> &[Option<Vec<char>>] {
        self.keys.get(&c).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn average_degree(&self) -> f64 {
        if self.keys.is_empty() {
            return 0.0;
        }
        let total: usize = self
            .keys
            .values()
            .map(|n| n.iter().filter(|a| a.is_some()).count())
            .sum();
        total as f64 / self.keys.len() as f64
    }
}

fn lines(text: &str) -> impl Iterator<Item = &str> {
    text.split('\n').filter(|l| !l.is_empty())
}

pub(super) fn bundled_dictionaries() -> Vec<RankedDictionary> {
    [
        ("passwords", PASSWORDS),
        ("english_wikipedia", ENGLISH_WIKIPEDIA),
        ("female_names", FEMALE_NAMES),
        ("surnames", SURNAMES),
        ("us_tv_and_film", US_TV_AND_FILM),
        ("male_names", MALE_NAMES),
    ]
    .into_iter()
    .map(|(name, text)| RankedDictionary::from_ordered(name, lines(text)))
    .collect()
}

pub(super) fn bundled_graphs() -> Vec<AdjacencyGraph> {
    type RawGraphs = BTreeMap<String, BTreeMap<String, Vec<Option<String>>>>;
    let raw: RawGraphs = serde_json::from_str(ADJACENCY_GRAPHS).expect("bundled adjacency graphs are valid JSON");
    ["qwerty", "dvorak", "keypad", "mac_keypad"]
        .into_iter()
        .filter_map(|name| {
            let g = raw.get(name)?;
            let keys = g
                .iter()
                .filter_map(|(k, adj)| {
                    let key = k.chars().next()?;
                    let adj = adj.iter().map(|a| a.as_ref().map(|s| s.chars().collect())).collect();
                    Some((key, adj))
                })
                .collect();
            Some(AdjacencyGraph::new(name, keys))
        })
        .collect()
}
