//! Random operation sequences over a session tree with invariant checks.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;

use uisim_core::engine::{AppGraph, BuiltinRenderer, RuleBasedPredictor, SimAction, TransitionEngine};
use uisim_core::raster::{render, Image, Theme};
use uisim_core::session::{branch_step, rollout, NodeId, RolloutRequest, SessionTree};

use crate::golden::{HEIGHT, WIDTH};

/// Actions for the demo graph; the last few match no edge anywhere.
pub const VOCABULARY: [&str; 14] = [
    "open email",
    "open settings",
    "open the browser",
    "tap compose",
    "search mail",
    "scroll down",
    "scroll up",
    "send",
    "go back",
    "go home",
    "fly to the moon",
    "shake the phone",
    "xyzzy",
    "open the fridge",
];

/// Rule-based predictor over the demo graph with the built-in renderer.
pub fn demo_engine() -> TransitionEngine {
    let graph = Arc::new(AppGraph::demo());
    let theme = Theme::light();
    TransitionEngine::new(
        Arc::new(RuleBasedPredictor::new(graph, theme.clone())),
        Arc::new(BuiltinRenderer::new(theme, WIDTH, HEIGHT).expect("valid renderer")),
    )
}

/// Built-in render of a demo screen at the test resolution.
pub fn demo_screen(id: &str) -> Image {
    let graph = AppGraph::demo();
    render(graph.screen(id).expect("demo screen"), &Theme::light(), WIDTH, HEIGHT).expect("renders")
}

pub fn demo_session() -> SessionTree {
    let graph = AppGraph::demo();
    let home = graph.screen(graph.initial_screen()).expect("initial screen").clone();
    SessionTree::new(demo_screen(graph.initial_screen()), Some(home), demo_engine().backend_info())
}

#[derive(Debug, Default, Clone, Copy)]
pub struct OpStats {
    pub steps: usize,
    pub rollouts: usize,
    pub failures: usize,
}

/// Checks structure plus append-only history against digests seen so far.
pub fn check_tree(tree: &SessionTree, seen: &mut BTreeMap<NodeId, String>) -> Result<(), String> {
    tree.check_invariants()?;
    if tree.len() != tree.edge_count() + 1 {
        return Err(format!("{} nodes but {} edges", tree.len(), tree.edge_count()));
    }
    for (&id, digest) in seen.iter() {
        let now = tree.node_digest(id).map_err(|e| format!("node {id} vanished: {e}"))?;
        if &now != digest {
            return Err(format!("node {id} changed"));
        }
    }
    let max_seen = seen.keys().next_back().copied();
    for (id, _) in tree.nodes() {
        if let std::collections::btree_map::Entry::Vacant(slot) = seen.entry(id) {
            if max_seen.is_some_and(|m| id <= m) {
                return Err(format!("new node {id} reuses an old id range"));
            }
            slot.insert(tree.node_digest(id).map_err(|e| e.to_string())?);
        }
    }
    Ok(())
}

/// `n` random steps and rollouts from random nodes, checking invariants
/// after every operation.
pub async fn run_random_ops(
    tree: &mut SessionTree,
    engine: &TransitionEngine,
    n: usize,
    rng: &mut impl Rng,
) -> Result<OpStats, String> {
    let mut seen = BTreeMap::new();
    check_tree(tree, &mut seen)?;
    let mut stats = OpStats::default();
    for op in 0..n {
        let ids: Vec<NodeId> = tree.nodes().map(|(id, _)| id).collect();
        let from = *ids.choose(rng).expect("tree has a root");
        let before = tree.len();
        if rng.random_bool(0.8) {
            stats.steps += 1;
            let action = SimAction::new(*VOCABULARY.choose(rng).expect("non-empty"));
            match branch_step(tree, engine, from, &action).await {
                Ok(id) => {
                    if tree.parent_of(id).map_err(|e| e.to_string())? != Some(from) || tree.len() != before + 1 {
                        return Err(format!("op {op}: step did not append one child of {from}"));
                    }
                }
                Err(_) => {
                    stats.failures += 1;
                    if tree.len() != before {
                        return Err(format!("op {op}: failed step changed the tree"));
                    }
                }
            }
        } else {
            stats.rollouts += 1;
            let k = rng.random_range(1..=5);
            let request = RolloutRequest {
                start_node: from,
                actions: (0..k)
                    .map(|_| SimAction::new(*VOCABULARY.choose(rng).expect("non-empty")))
                    .collect(),
                stop_on_error: rng.random_bool(0.5),
            };
            let outcome = rollout(tree, engine, &request).await.map_err(|e| e.to_string())?;
            stats.failures += outcome.failures.len();
            if tree.len() != before + outcome.created.len() {
                return Err(format!("op {op}: rollout node count mismatch"));
            }
            if outcome.created.len() + outcome.failures.len() > k {
                return Err(format!("op {op}: rollout reported more results than actions"));
            }
            let mut at = from;
            for &id in &outcome.created {
                if tree.parent_of(id).map_err(|e| e.to_string())? != Some(at) {
                    return Err(format!("op {op}: rollout node {id} is not a child of {at}"));
                }
                at = id;
            }
        }
        check_tree(tree, &mut seen).map_err(|e| format!("op {op}: {e}"))?;
    }
    Ok(stats)
}

/// Distinct images in a tree.
pub fn distinct_images(tree: &SessionTree) -> usize {
    tree.nodes()
        .map(|(_, s)| s.image.content_hash())
        .collect::<BTreeSet<_>>()
        .len()
}
