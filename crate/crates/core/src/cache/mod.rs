//! Site-scoped cache from action descriptions to executable actions.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::action::{ActionVerb, SecondaryParam};
use crate::clock::{Clock, SystemClock};
use crate::distill::Locator;

pub const DEFAULT_CAP: usize = 100;
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvictionPolicy {
    #[default]
    Lru,
    Lfu,
}

impl std::str::FromStr for EvictionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lru" => Ok(Self::Lru),
            "lfu" => Ok(Self::Lfu),
            other => Err(format!("unknown eviction policy {other:?} (expected lru or lfu)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub base_url: String,
    pub action_description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedAction {
    /// Key of the entry that served the hit.
    pub key: CacheKey,
    pub verb: ActionVerb,
    pub locator: Locator,
    pub secondary: Option<SecondaryParam>,
    /// Goals for which this action was the last one of a finished task.
    pub terminal_for: Vec<String>,
    pub created_at: DateTime<Utc>,
    pub last_read_at: DateTime<Utc>,
    pub hit_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub base_url: String,
    pub description: String,
    pub verb: ActionVerb,
    pub locator: Locator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary: Option<SecondaryParam>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terminal_for: Vec<String>,
    pub created_at: DateTime<Utc>,
    pub last_read_at: DateTime<Utc>,
    pub hit_count: u64,
}

impl CacheEntry {
    pub fn key(&self) -> CacheKey {
        CacheKey { base_url: self.base_url.clone(), action_description: self.description.clone() }
    }

    pub fn action(&self) -> CachedAction {
        CachedAction {
            key: self.key(),
            verb: self.verb,
            locator: self.locator.clone(),
            secondary: self.secondary.clone(),
            terminal_for: self.terminal_for.clone(),
            created_at: self.created_at,
            last_read_at: self.last_read_at,
            hit_count: self.hit_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    policy: EvictionPolicy,
    cap: usize,
    entries: Vec<CacheEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("invalid URL {0:?}")]
    InvalidUrl(String),
    #[error("{}: corrupt cache file at byte {offset}: {message}", path.display())]
    Corrupt { path: PathBuf, offset: usize, message: String },
    #[error("{}: unsupported cache format version {version}", path.display())]
    Version { path: PathBuf, version: u32 },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

/// Reduces a URL to `scheme://host[:port]`, lowercase, without `www.`.
pub fn strip_base_url(url: &str) -> Result<String, CacheError> {
    let parsed = url::Url::parse(url.trim()).map_err(|_| CacheError::InvalidUrl(url.to_string()))?;
    let host = parsed.host_str().filter(|h| !h.is_empty()).ok_or_else(|| CacheError::InvalidUrl(url.to_string()))?;
    let host = host.to_ascii_lowercase();
    let host = host.strip_prefix("www.").unwrap_or(&host);
    let port = parsed.port().map(|p| format!(":{p}")).unwrap_or_default();
    Ok(format!("{}://{host}{port}", parsed.scheme()))
}

/// Picks which stored description, if any, means the same as a new one.
pub trait CacheMatcher {
    /// Returns an index into `stored`, or `None` when nothing matches.
    fn pick(&self, base_url: &str, description: &str, stored: &[String]) -> Result<Option<usize>, String>;
}

/// Confirms that an executed action fits its description before storing.
pub trait CacheValidator {
    fn validate(&self, description: &str, verb: ActionVerb, element: &str) -> Result<bool, String>;
}

/// Exact-match lookups only.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoMatcher;

impl CacheMatcher for NoMatcher {
    fn pick(&self, _: &str, _: &str, _: &[String]) -> Result<Option<usize>, String> {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AcceptAll;

impl CacheValidator for AcceptAll {
    fn validate(&self, _: &str, _: ActionVerb, _: &str) -> Result<bool, String> {
        Ok(true)
    }
}

/// What a cache entry replays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheValue {
    pub verb: ActionVerb,
    pub locator: Locator,
    pub secondary: Option<SecondaryParam>,
}

impl CacheValue {
    pub fn new(verb: ActionVerb, locator: Locator) -> Self {
        Self { verb, locator, secondary: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreOutcome {
    Stored,
    Rejected,
}

struct Inner {
    policy: EvictionPolicy,
    cap: usize,
    entries: Vec<CacheEntry>,
}

/// Bounded cache shared behind one lock. Entries keep insertion order,
/// which also breaks eviction ties (older first).
pub struct ActionCache {
    inner: Mutex<Inner>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for ActionCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let g = self.lock();
        f.debug_struct("ActionCache").field("policy", &g.policy).field("cap", &g.cap).field("len", &g.entries.len()).finish()
    }
}

fn victim(entries: &[CacheEntry], policy: EvictionPolicy) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in entries.iter().enumerate() {
        let better = match best.map(|b| &entries[b]) {
            None => true,
            Some(b) => match policy {
                EvictionPolicy::Lru => e.last_read_at < b.last_read_at,
                EvictionPolicy::Lfu => (e.hit_count, e.last_read_at) < (b.hit_count, b.last_read_at),
            },
        };
        if better {
            best = Some(i);
        }
    }
    best
}

impl ActionCache {
    pub fn new(policy: EvictionPolicy, cap: usize, clock: Arc<dyn Clock>) -> Self {
        Self { inner: Mutex::new(Inner { policy, cap: cap.max(1), entries: Vec::new() }), clock }
    }

    pub fn with_defaults() -> Self {
        Self::new(EvictionPolicy::Lru, DEFAULT_CAP, Arc::new(SystemClock))
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn policy(&self) -> EvictionPolicy {
        self.lock().policy
    }

    pub fn set_policy(&self, policy: EvictionPolicy) {
        self.lock().policy = policy;
    }

    pub fn cap(&self) -> usize {
        self.lock().cap
    }

    pub fn len(&self) -> usize {
        self.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<CacheEntry> {
        self.lock().entries.clone()
    }

    pub fn clear(&self) {
        self.lock().entries.clear();
    }

    /// Exact match first, then the matcher over this site's stored
    /// descriptions. A hit refreshes the read time and bumps the hit count.
    /// Matcher failures count as misses.
    pub fn lookup(&self, url: &str, description: &str, matcher: &dyn CacheMatcher) -> Option<CachedAction> {
        let base = strip_base_url(url).ok()?;
        let exact = {
            let g = self.lock();
            g.entries.iter().position(|e| e.base_url == base && e.description == description)
        };
        let idx = match exact {
            Some(i) => i,
            None => {
                let site: Vec<(usize, String)> = {
                    let g = self.lock();
                    g.entries.iter().enumerate().filter(|(_, e)| e.base_url == base).map(|(i, e)| (i, e.description.clone())).collect()
                };
                if site.is_empty() {
                    return None;
                }
                let stored: Vec<String> = site.iter().map(|(_, d)| d.clone()).collect();
                match matcher.pick(&base, description, &stored) {
                    Ok(Some(k)) if k < site.len() => site[k].0,
                    Ok(_) => return None,
                    Err(e) => {
                        log::warn!("cache matcher failed, treating as miss: {e}");
                        return None;
                    }
                }
            }
        };
        let now = self.clock.now();
        let mut g = self.lock();
        let e = g.entries.get_mut(idx)?;
        e.last_read_at = now.max(e.created_at);
        e.hit_count += 1;
        Some(e.action())
    }

    /// Stores the entry if the validator accepts it, evicting first when
    /// the cache is full. Validator failures reject.
    pub fn store(
        &self,
        url: &str,
        description: &str,
        value: CacheValue,
        element: &str,
        validator: &dyn CacheValidator,
    ) -> Result<StoreOutcome, CacheError> {
        let base = strip_base_url(url)?;
        if description.trim().is_empty() {
            return Ok(StoreOutcome::Rejected);
        }
        match validator.validate(description, value.verb, element) {
            Ok(true) => {}
            Ok(false) => return Ok(StoreOutcome::Rejected),
            Err(e) => {
                log::warn!("cache validator failed, not storing: {e}");
                return Ok(StoreOutcome::Rejected);
            }
        }
        self.insert(base, description.to_string(), value);
        Ok(StoreOutcome::Stored)
    }

    fn insert(&self, base_url: String, description: String, value: CacheValue) {
        let now = self.clock.now();
        let CacheValue { verb, locator, secondary } = value;
        let entry = CacheEntry {
            base_url,
            description,
            verb,
            locator,
            secondary,
            terminal_for: Vec::new(),
            created_at: now,
            last_read_at: now,
            hit_count: 0,
        };
        let mut g = self.lock();
        if let Some(existing) = g.entries.iter_mut().find(|e| e.base_url == entry.base_url && e.description == entry.description) {
            *existing = entry;
            return;
        }
        while g.entries.len() >= g.cap {
            let policy = g.policy;
            match victim(&g.entries, policy) {
                Some(i) => {
                    g.entries.remove(i);
                }
                None => break,
            }
        }
        g.entries.push(entry);
    }

    /// Removes the entry the policy would evict next.
    pub fn evict(&self) -> Option<CacheKey> {
        let mut g = self.lock();
        let policy = g.policy;
        let i = victim(&g.entries, policy)?;
        Some(g.entries.remove(i).key())
    }

    /// Records that the entry's action finished a task with this goal.
    /// Metadata other than the goal list is left alone.
    pub fn mark_terminal(&self, url: &str, description: &str, goal: &str) -> bool {
        let Ok(base) = strip_base_url(url) else { return false };
        let mut g = self.lock();
        match g.entries.iter_mut().find(|e| e.base_url == base && e.description == description) {
            Some(e) => {
                if !e.terminal_for.iter().any(|t| t == goal) {
                    e.terminal_for.push(goal.to_string());
                }
                true
            }
            None => false,
        }
    }

    pub fn remove(&self, key: &CacheKey) -> bool {
        let mut g = self.lock();
        let before = g.entries.len();
        g.entries.retain(|e| !(e.base_url == key.base_url && e.description == key.action_description));
        g.entries.len() != before
    }

    pub fn to_json(&self) -> String {
        let g = self.lock();
        let file = CacheFile { version: FORMAT_VERSION, policy: g.policy, cap: g.cap, entries: g.entries.clone() };
        serde_json::to_string_pretty(&file).expect("cache serializes")
    }

    /// Writes to a sibling temp file and renames it over `path`.
    pub fn persist(&self, path: &Path) -> Result<(), CacheError> {
        let io = |e| CacheError::Io { path: path.to_path_buf(), source: e };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(format!(".tmp{}", std::process::id()));
        let tmp = PathBuf::from(tmp);
        let write = || -> std::io::Result<()> {
            use std::io::Write;
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(self.to_json().as_bytes())?;
            f.write_all(b"\n")?;
            f.sync_all()?;
            std::fs::rename(&tmp, path)
        };
        write().map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            io(e)
        })
    }

    /// Reads a persisted cache. A missing file gives an empty LRU cache.
    pub fn load(path: &Path, clock: Arc<dyn Clock>) -> Result<Self, CacheError> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Ok(Self::new(EvictionPolicy::Lru, DEFAULT_CAP, clock));
            }
            Err(e) => return Err(CacheError::Io { path: path.to_path_buf(), source: e }),
        };
        let file: CacheFile = serde_json::from_str(&text).map_err(|e| CacheError::Corrupt {
            path: path.to_path_buf(),
            offset: byte_offset(&text, e.line(), e.column()),
            message: e.to_string(),
        })?;
        if file.version != FORMAT_VERSION {
            return Err(CacheError::Version { path: path.to_path_buf(), version: file.version });
        }
        let cache = Self::new(file.policy, file.cap, clock);
        cache.lock().entries = file.entries;
        Ok(cache)
    }
}

/// Converts serde_json's 1-based line and column into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::LogicalClock;

    fn loc(s: &str) -> Locator {
        Locator::Css { expression: s.into() }
    }

    fn cache(policy: EvictionPolicy, cap: usize) -> ActionCache {
        ActionCache::new(policy, cap, Arc::new(LogicalClock::fixed()))
    }

    struct Pick(Option<usize>);
    impl CacheMatcher for Pick {
        fn pick(&self, _: &str, _: &str, _: &[String]) -> Result<Option<usize>, String> {
            Ok(self.0)
        }
    }

    struct Failing;
    impl CacheMatcher for Failing {
        fn pick(&self, _: &str, _: &str, _: &[String]) -> Result<Option<usize>, String> {
            Err("boom".into())
        }
    }

    struct VerbMustMatch;
    impl CacheValidator for VerbMustMatch {
        fn validate(&self, description: &str, verb: ActionVerb, _: &str) -> Result<bool, String> {
            Ok(description.starts_with(verb.as_str()))
        }
    }

    #[test]
    fn base_urls() {
        assert_eq!(strip_base_url("https://www.cabelas.com/shop/en/x?y=1").unwrap(), "https://cabelas.com");
        assert_eq!(strip_base_url("http://imdb.com").unwrap(), "http://imdb.com");
        assert_eq!(strip_base_url("HTTP://WWW.Example.COM:8080/a#b").unwrap(), "http://example.com:8080");
        assert!(strip_base_url("not a url").is_err());
    }

    #[test]
    fn exact_then_matcher() {
        let c = cache(EvictionPolicy::Lru, 10);
        let url = "https://www.cabelas.com/x";
        c.store(url, "click camping", CacheValue::new(ActionVerb::Click, loc("#a")), "", &AcceptAll).unwrap();
        c.store(url, "click tents", CacheValue::new(ActionVerb::Click, loc("#b")), "", &AcceptAll).unwrap();
        let hit = c.lookup("https://cabelas.com/", "click tents", &Failing).unwrap();
        assert_eq!((hit.locator, hit.hit_count), (loc("#b"), 1));
        assert_eq!(c.lookup(url, "press the tents link", &Pick(Some(0))).unwrap().locator, loc("#a"));
        let before = c.entries();
        assert!(c.lookup(url, "something else", &Pick(None)).is_none());
        assert!(c.lookup(url, "something else", &Failing).is_none());
        assert!(c.lookup(url, "something else", &Pick(Some(7))).is_none());
        assert!(c.lookup("https://other.com", "click tents", &Pick(Some(0))).is_none());
        assert_eq!(c.entries(), before);
    }

    #[test]
    fn validator_rejects_mismatch() {
        let c = cache(EvictionPolicy::Lru, 10);
        let out = c.store("https://a.com", "click login", CacheValue::new(ActionVerb::TypeText, loc("#l")), "", &VerbMustMatch).unwrap();
        assert_eq!(out, StoreOutcome::Rejected);
        assert!(c.is_empty());
    }

    #[test]
    fn full_cache_evicts_then_inserts() {
        let c = cache(EvictionPolicy::Lru, 100);
        for i in 0..101 {
            c.store("https://a.com", &format!("click {i}"), CacheValue::new(ActionVerb::Click, loc("x")), "", &AcceptAll).unwrap();
        }
        assert_eq!(c.len(), 100);
        assert!(!c.entries().iter().any(|e| e.description == "click 0"));
    }

    #[test]
    fn lfu_breaks_ties_by_oldest_read() {
        let c = cache(EvictionPolicy::Lfu, 3);
        for d in ["a", "b", "c"] {
            c.store("https://s.com", d, CacheValue::new(ActionVerb::Click, loc(d)), "", &AcceptAll).unwrap();
        }
        for _ in 0..5 {
            c.lookup("https://s.com", "a", &NoMatcher);
        }
        c.lookup("https://s.com", "c", &NoMatcher);
        c.lookup("https://s.com", "b", &NoMatcher);
        // b and c both have one hit; c was read earlier
        assert_eq!(c.evict().unwrap().action_description, "c");
    }

    #[test]
    fn duplicate_store_refreshes() {
        let c = cache(EvictionPolicy::Lru, 3);
        c.store("https://s.com", "a", CacheValue::new(ActionVerb::Click, loc("1")), "", &AcceptAll).unwrap();
        c.lookup("https://s.com", "a", &NoMatcher);
        let first = c.entries()[0].clone();
        c.store("https://s.com", "a", CacheValue::new(ActionVerb::Click, loc("2")), "", &AcceptAll).unwrap();
        let e = &c.entries()[0];
        assert_eq!(c.len(), 1);
        assert_eq!(e.locator, loc("2"));
        assert!(e.created_at > first.created_at);
    }

    #[test]
    fn terminal_goals() {
        let c = cache(EvictionPolicy::Lru, 3);
        let v = CacheValue { secondary: Some(SecondaryParam::Text("tents".into())), ..CacheValue::new(ActionVerb::TypeText, loc("#q")) };
        c.store("https://s.com/a", "type tents", v, "", &AcceptAll).unwrap();
        assert!(c.mark_terminal("https://s.com/b", "type tents", "find tents"));
        assert!(c.mark_terminal("https://s.com/b", "type tents", "find tents"));
        assert!(!c.mark_terminal("https://s.com/b", "other", "find tents"));
        let hit = c.lookup("https://s.com", "type tents", &NoMatcher).unwrap();
        assert_eq!(hit.terminal_for, vec!["find tents".to_string()]);
        assert_eq!(hit.secondary, Some(SecondaryParam::Text("tents".into())));
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/cache.json");
        let c = cache(EvictionPolicy::Lfu, 5);
        c.store("https://s.com", "click \"x\"", CacheValue::new(ActionVerb::Click, loc("#x")), "", &AcceptAll).unwrap();
        c.persist(&path).unwrap();
        let back = ActionCache::load(&path, Arc::new(SystemClock)).unwrap();
        assert_eq!(back.entries(), c.entries());
        assert_eq!((back.policy(), back.cap()), (EvictionPolicy::Lfu, 5));
        let missing = ActionCache::load(&dir.path().join("none.json"), Arc::new(SystemClock)).unwrap();
        assert!(missing.is_empty());
    }

    #[test]
    fn corrupt_file_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, "{\n  \"version\": 1,\n  \"policy\": \"lru\", \"cap\": ").unwrap();
        match ActionCache::load(&path, Arc::new(SystemClock)) {
            // the parser stops on the last byte it read
            Err(CacheError::Corrupt { offset, .. }) => assert_eq!(offset, 43),
            other => panic!("{other:?}"),
        }
    }
}
