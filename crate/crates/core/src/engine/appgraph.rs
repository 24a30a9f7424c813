//! Scripted screen-transition graphs and the rule-based predictor they drive.
//!
//! File format (`.appgraph.json`):
//!
//! ```json
//! {
//!   "name": "demo",
//!   "initial_screen": "home",
//!   "screens": { "home": "CONTAINER root (0,0,1,1)\n  ...", "inbox": "..." },
//!   "edges": [
//!     { "from": "home", "to": "inbox", "when": { "keywords": ["email"] } },
//!     { "from": "home", "to": "inbox", "when": { "tap_region": { "x0": 0.1, "y0": 0.2, "x1": 0.3, "y1": 0.3 } } }
//!   ]
//! }
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ActionKind, BackendDescriptor, BackendError, LayoutPredictor, SimAction};
use crate::layout::{parse_layout, BoundingBox, LayoutError, LayoutSource, ScreenLayout};
use crate::raster::{self, Image, Theme};

const DEMO_GRAPH: &str = include_str!("../../assets/demo.appgraph.json");

#[derive(Debug, Error)]
pub enum AppGraphError {
    #[error("reading app graph: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed app graph JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("screen `{screen}`: {error}")]
    Screen { screen: String, error: LayoutError },
    #[error("edge {index} references unknown screen `{screen}`")]
    UnknownScreen { index: usize, screen: String },
    #[error("app graph has no screens")]
    Empty,
}

/// What an edge responds to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMatcher {
    /// Every keyword (or phrase) must appear as whole words in the action
    /// text, case-insensitively.
    Keywords(Vec<String>),
    /// A TAP action whose point falls inside the region.
    TapRegion(BoundingBox),
}

fn words(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl ActionMatcher {
    pub fn matches(&self, action: &SimAction) -> bool {
        match self {
            ActionMatcher::Keywords(keys) => {
                let text = words(&action.text);
                !keys.is_empty()
                    && keys.iter().all(|k| {
                        let phrase = words(k);
                        !phrase.is_empty() && text.windows(phrase.len()).any(|w| w == phrase.as_slice())
                    })
            }
            ActionMatcher::TapRegion(region) => {
                action.kind == Some(ActionKind::Tap)
                    && action.point.is_some_and(|p| region.contains_point(p.x, p.y))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub when: ActionMatcher,
}

#[derive(Deserialize)]
struct GraphFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    initial_screen: Option<String>,
    screens: BTreeMap<String, String>,
    #[serde(default)]
    edges: Vec<Edge>,
}

/// A validated transition graph. Screens carry `source = scripted` and their
/// map key as `screen_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct AppGraph {
    name: String,
    initial_screen: String,
    screens: BTreeMap<String, ScreenLayout>,
    edges: Vec<Edge>,
}

impl AppGraph {
    pub fn from_json(text: &str) -> Result<Self, AppGraphError> {
        let file: GraphFile = serde_json::from_str(text)?;
        let mut screens = BTreeMap::new();
        for (id, dsl) in file.screens {
            let layout = parse_layout(&dsl)
                .and_then(|l| l.with_screen_id(Some(id.clone())))
                .map_err(|error| AppGraphError::Screen {
                    screen: id.clone(),
                    error,
                })?
                .with_source(LayoutSource::Scripted);
            screens.insert(id, layout);
        }
        let initial_screen = match file.initial_screen {
            Some(s) => s,
            None => screens.keys().next().cloned().ok_or(AppGraphError::Empty)?,
        };
        if !screens.contains_key(&initial_screen) {
            return Err(AppGraphError::UnknownScreen {
                index: usize::MAX,
                screen: initial_screen,
            });
        }
        for (index, e) in file.edges.iter().enumerate() {
            for end in [&e.from, &e.to] {
                if !screens.contains_key(end) {
                    return Err(AppGraphError::UnknownScreen {
                        index,
                        screen: end.clone(),
                    });
                }
            }
        }
        Ok(AppGraph {
            name: file.name.unwrap_or_else(|| "unnamed".into()),
            initial_screen,
            screens,
            edges: file.edges,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AppGraphError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The bundled demo phone: home, inbox, compose, search, settings and browser.
    pub fn demo() -> Self {
        Self::from_json(DEMO_GRAPH).expect("bundled demo graph is valid")
    }

    pub fn demo_json() -> &'static str {
        DEMO_GRAPH
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn initial_screen(&self) -> &str {
        &self.initial_screen
    }

    pub fn screen(&self, id: &str) -> Option<&ScreenLayout> {
        self.screens.get(id)
    }

    pub fn screen_ids(&self) -> impl Iterator<Item = &str> {
        self.screens.keys().map(String::as_str)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// First declared edge out of `from` that matches `action`.
    pub fn transition(&self, from: &str, action: &SimAction) -> Option<&str> {
        self.edges
            .iter()
            .find(|e| e.from == from && e.when.matches(action))
            .map(|e| e.to.as_str())
    }
}

/// Deterministic stage-1 backend that walks an [`AppGraph`].
///
/// The current screen is identified from the prior layout's `screen_id`
/// when one is supplied, otherwise by matching the image against built-in
/// renders of every graph screen at the image's resolution.
pub struct RuleBasedPredictor {
    graph: Arc<AppGraph>,
    theme: Theme,
    fingerprints: Mutex<HashMap<(u32, u32), HashMap<String, String>>>,
}

impl RuleBasedPredictor {
    pub fn new(graph: Arc<AppGraph>, theme: Theme) -> Self {
        RuleBasedPredictor {
            graph,
            theme,
            fingerprints: Mutex::new(HashMap::new()),
        }
    }

    pub fn graph(&self) -> &AppGraph {
        &self.graph
    }

    /// Screen id whose built-in render equals `image`, if any.
    pub fn identify(&self, image: &Image) -> Option<String> {
        let (w, h) = (image.width(), image.height());
        raster::check_resolution(w, h).ok()?;
        let mut cache = self.fingerprints.lock().expect("fingerprint cache poisoned");
        let table = cache.entry((w, h)).or_insert_with(|| {
            let mut t = HashMap::new();
            for (id, layout) in &self.graph.screens {
                if let Ok(img) = raster::render(layout, &self.theme, w, h) {
                    // first screen wins when two render identically
                    t.entry(img.content_hash()).or_insert_with(|| id.clone());
                }
            }
            t
        });
        table.get(&image.content_hash()).cloned()
    }

    fn current_screen(&self, image: &Image, prior: Option<&ScreenLayout>) -> Option<String> {
        prior
            .and_then(ScreenLayout::screen_id)
            .filter(|id| self.graph.screens.contains_key(*id))
            .map(str::to_string)
            .or_else(|| self.identify(image))
    }
}

#[async_trait]
impl LayoutPredictor for RuleBasedPredictor {
    fn descriptor(&self) -> BackendDescriptor {
        let mut d = BackendDescriptor::new("rule-based", env!("CARGO_PKG_VERSION"));
        d.metadata.insert("graph".into(), self.graph.name.clone());
        d
    }

    async fn predict(
        &self,
        image: &Image,
        action: &SimAction,
        prior: Option<&ScreenLayout>,
    ) -> Result<ScreenLayout, BackendError> {
        let screen = self.current_screen(image, prior);
        let target = screen
            .as_deref()
            .and_then(|s| self.graph.transition(s, action))
            .ok_or_else(|| BackendError::NoTransition {
                screen: screen.clone(),
                action: action.text.clone(),
            })?;
        Ok(self.graph.screens[target].clone())
    }
}
