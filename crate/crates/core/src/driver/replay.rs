use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{placeholder_png, BrowserDriver, DriverAction, DriverError, PageSnapshot, SelectOption};
use crate::action::{ActionVerb, SecondaryParam};
use crate::distill::{Document, LocateError, Locator, NodeHandle};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub url: String,
    #[serde(default)]
    pub title: String,
    #[serde(skip)]
    pub html: String,
    #[serde(skip)]
    pub screenshot: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub verb: ActionVerb,
    pub locator: Locator,
    /// When set, the action's argument must equal this one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary: Option<SecondaryParam>,
    pub to: String,
    /// Opens `to` in a new tab instead of replacing the current page.
    #[serde(default)]
    pub new_tab: bool,
}

/// Recorded pages and the transitions between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotGraph {
    pub start: String,
    pub nodes: BTreeMap<String, GraphNode>,
    #[serde(default)]
    pub edges: Vec<GraphEdge>,
}

fn same_url(a: &str, b: &str) -> bool {
    a.trim_end_matches('/').eq_ignore_ascii_case(b.trim_end_matches('/'))
}

impl SnapshotGraph {
    pub fn validate(&self) -> Result<(), DriverError> {
        if !self.nodes.contains_key(&self.start) {
            return Err(DriverError::Graph(format!("start node {:?} is not a node", self.start)));
        }
        for (i, e) in self.edges.iter().enumerate() {
            for end in [&e.from, &e.to] {
                if !self.nodes.contains_key(end) {
                    return Err(DriverError::Graph(format!("edge {i} refers to unknown node {end:?}")));
                }
            }
        }
        if let Some((id, _)) = self.nodes.iter().find(|(_, n)| n.html.trim().is_empty()) {
            return Err(DriverError::Graph(format!("node {id:?} has no HTML")));
        }
        Ok(())
    }

    /// Reads `graph.json` plus `<id>.html` and optional `<id>.png` from `dir`.
    pub fn load(dir: &Path) -> Result<Self, DriverError> {
        let index = dir.join("graph.json");
        let text = std::fs::read_to_string(&index).map_err(|e| DriverError::io(&index, e))?;
        let mut graph: SnapshotGraph =
            serde_json::from_str(&text).map_err(|e| DriverError::Graph(format!("{}: {e}", index.display())))?;
        for (id, node) in graph.nodes.iter_mut() {
            let html = dir.join(format!("{id}.html"));
            node.html = std::fs::read_to_string(&html).map_err(|e| DriverError::io(&html, e))?;
            let png = dir.join(format!("{id}.png"));
            node.screenshot = match std::fs::read(&png) {
                Ok(bytes) => Some(bytes),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
                Err(e) => return Err(DriverError::io(&png, e)),
            };
        }
        graph.validate()?;
        Ok(graph)
    }

    pub fn node_for_url(&self, url: &str) -> Option<&str> {
        self.nodes.iter().find(|(_, n)| same_url(&n.url, url)).map(|(id, _)| id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ReplayEvent {
    seq: usize,
    action: DriverAction,
    from: Option<String>,
    to: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'static str>,
}

/// Walks a snapshot graph. Tabs are cursors into the graph.
pub struct ReplayDriver {
    graph: SnapshotGraph,
    tabs: Vec<String>,
    active: usize,
    docs: HashMap<String, Document>,
    events: Vec<ReplayEvent>,
}

impl std::fmt::Debug for ReplayDriver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReplayDriver").field("tabs", &self.tabs).field("active", &self.active).finish()
    }
}

/// Where an action leads, before it is committed.
enum Move {
    Stay,
    Replace(String),
    Open(String),
    Activate(usize),
    Close(usize),
}

fn locate(doc: &Document, locator: &Locator) -> Result<NodeHandle, DriverError> {
    locator.resolve_one(doc).map_err(|e| match e {
        LocateError::NotFound => DriverError::ElementNotFound { locator: locator.to_string() },
        LocateError::Ambiguous(count) => DriverError::AmbiguousLocator { locator: locator.to_string(), count },
    })
}

fn options_of(doc: &Document, handle: NodeHandle, locator: &Locator) -> Result<Vec<SelectOption>, DriverError> {
    let el = doc.element(handle).ok_or(DriverError::PageClosed)?;
    if el.value().name() != "select" {
        return Err(DriverError::NotASelect { locator: locator.to_string() });
    }
    Ok(el
        .descendent_elements()
        .filter(|e| e.value().name() == "option")
        .map(|o| {
            let text = o.text().collect::<String>().split_whitespace().collect::<Vec<_>>().join(" ");
            let value = o.value().attr("value").map(str::to_string).unwrap_or_else(|| text.clone());
            SelectOption { value, text }
        })
        .collect())
}

/// Options of the select element `locator` names in `doc`.
pub fn select_options(doc: &Document, locator: &Locator) -> Result<Vec<SelectOption>, DriverError> {
    options_of(doc, locate(doc, locator)?, locator)
}

impl ReplayDriver {
    /// Starts with one tab on the graph's start node.
    pub fn new(graph: SnapshotGraph) -> Result<Self, DriverError> {
        graph.validate()?;
        let start = graph.start.clone();
        Ok(Self { graph, tabs: vec![start], active: 0, docs: HashMap::new(), events: Vec::new() })
    }

    pub fn load(dir: &Path) -> Result<Self, DriverError> {
        Self::new(SnapshotGraph::load(dir)?)
    }

    pub fn graph(&self) -> &SnapshotGraph {
        &self.graph
    }

    pub fn current_node(&self) -> Option<&str> {
        self.tabs.get(self.active).map(String::as_str)
    }

    fn doc(&mut self, id: &str) -> Result<&Document, DriverError> {
        if !self.docs.contains_key(id) {
            let node = self.graph.nodes.get(id).ok_or(DriverError::PageClosed)?;
            let doc = Document::parse(&node.html).map_err(|e| DriverError::Graph(format!("node {id}: {e}")))?;
            self.docs.insert(id.to_string(), doc);
        }
        Ok(&self.docs[id])
    }

    fn tab_index(&self, secondary: &Option<SecondaryParam>) -> Result<usize, DriverError> {
        match secondary {
            Some(SecondaryParam::Tab(k)) if *k >= 1 && *k <= self.tabs.len() => Ok(k - 1),
            Some(SecondaryParam::Tab(k)) => Err(DriverError::TabNotFound(*k)),
            _ => Err(DriverError::InvalidAction("tab verbs need a tab index".into())),
        }
    }

    fn plan(&mut self, action: &DriverAction) -> Result<Move, DriverError> {
        action.validate()?;
        let current = self.current_node().ok_or(DriverError::PageClosed)?.to_string();
        match action.verb {
            ActionVerb::VisitUrl => {
                let Some(SecondaryParam::Url(url)) = &action.secondary else { unreachable!("validated") };
                let id = self.graph.node_for_url(url).ok_or_else(|| DriverError::Unreachable { url: url.clone() })?;
                return Ok(Move::Replace(id.to_string()));
            }
            ActionVerb::SwitchTab => return Ok(Move::Activate(self.tab_index(&action.secondary)?)),
            ActionVerb::CloseTab => return Ok(Move::Close(self.tab_index(&action.secondary)?)),
            _ => {}
        }
        let locator = action.locator.as_ref().expect("validated");
        let edges: Vec<GraphEdge> =
            self.graph.edges.iter().filter(|e| e.from == current && e.verb == action.verb).cloned().collect();
        let doc = self.doc(&current)?;
        let target = locate(doc, locator)?;
        if let (ActionVerb::SelectOption, Some(SecondaryParam::Options(picked))) = (action.verb, &action.secondary) {
            let count = options_of(doc, target, locator)?.len();
            if let Some(&bad) = picked.iter().find(|&&k| k == 0 || k > count) {
                return Err(DriverError::OptionOutOfRange { index: bad, count });
            }
        }
        let hit = edges.iter().find(|e| {
            e.locator.resolve_one(doc).ok() == Some(target)
                && e.secondary.as_ref().map_or(true, |s| Some(s) == action.secondary.as_ref())
        });
        match hit {
            Some(e) if e.new_tab => Ok(Move::Open(e.to.clone())),
            Some(e) => Ok(Move::Replace(e.to.clone())),
            // filling a form field without a recorded transition leaves the page as is
            None if matches!(action.verb, ActionVerb::TypeText | ActionVerb::SelectOption | ActionVerb::UploadFile) => {
                Ok(Move::Stay)
            }
            None => Err(DriverError::NoMatchingEdge { node: current, verb: action.verb, locator: locator.to_string() }),
        }
    }

    fn apply(&mut self, mv: Move) {
        match mv {
            Move::Stay => {}
            Move::Replace(id) => self.tabs[self.active] = id,
            Move::Open(id) => {
                self.tabs.push(id);
                self.active = self.tabs.len() - 1;
            }
            Move::Activate(i) => self.active = i,
            Move::Close(i) => {
                self.tabs.remove(i);
                if self.active > i || self.active >= self.tabs.len() {
                    self.active = self.active.saturating_sub(1);
                }
            }
        }
    }
}

impl BrowserDriver for ReplayDriver {
    fn execute(&mut self, action: &DriverAction) -> Result<PageSnapshot, DriverError> {
        let from = self.current_node().map(str::to_string);
        let planned = self.plan(action);
        let seq = self.events.len();
        match planned {
            Ok(mv) => {
                self.apply(mv);
                let to = self.current_node().map(str::to_string);
                self.events.push(ReplayEvent { seq, action: action.clone(), from, to, error: None });
                self.snapshot()
            }
            Err(e) => {
                self.events.push(ReplayEvent { seq, action: action.clone(), from, to: None, error: Some(e.kind()) });
                Err(e)
            }
        }
    }

    fn snapshot(&mut self) -> Result<PageSnapshot, DriverError> {
        let id = self.current_node().ok_or(DriverError::PageClosed)?;
        let node = &self.graph.nodes[id];
        let (screenshot, placeholder) = match &node.screenshot {
            Some(png) => (png.clone(), false),
            None => (placeholder_png(), true),
        };
        Ok(PageSnapshot {
            url: node.url.clone(),
            title: node.title.clone(),
            html: node.html.clone(),
            screenshot: Some(screenshot),
            placeholder_screenshot: placeholder,
        })
    }

    fn list_options(&mut self, locator: &Locator) -> Result<Vec<SelectOption>, DriverError> {
        let id = self.current_node().ok_or(DriverError::PageClosed)?.to_string();
        let doc = self.doc(&id)?;
        let target = locate(doc, locator)?;
        options_of(doc, target, locator)
    }

    fn tabs(&mut self) -> Result<Vec<String>, DriverError> {
        Ok(self.tabs.iter().map(|id| self.graph.nodes[id].title.clone()).collect())
    }

    fn record_state(&mut self) -> Result<(), DriverError> {
        Ok(())
    }

    /// Writes the action log only; there is no browser state to keep.
    fn save_session(&mut self, dir: &Path) -> Result<(), DriverError> {
        std::fs::create_dir_all(dir).map_err(|e| DriverError::io(dir, e))?;
        let path = dir.join("driver_transcript.jsonl");
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&serde_json::to_string(ev).expect("event serializes"));
            out.push('\n');
        }
        std::fs::write(&path, out).map_err(|e| DriverError::io(&path, e))
    }
}
