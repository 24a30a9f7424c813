//! Branching trees of simulated states.
//!
//! Trees are append-only: nodes are never mutated or removed, and node ids
//! increase monotonically in creation order.

mod manager;
mod store;

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use manager::{SessionManager, StepOutcome};
pub use store::{SessionStore, SessionSummary, MANIFEST_SCHEMA_VERSION, STORE_DIR_ENV};

use crate::engine::{BackendDescriptor, BackendInfo, SimAction, SimState, StepError, TransitionEngine};
use crate::layout::{LayoutSource, ScreenLayout};
use crate::raster::Image;

pub type NodeId = u64;

pub const MAX_ROLLOUT_ACTIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("node {node} not found")]
    NodeNotFound { node: NodeId },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("step from node {from} failed: {error}")]
    Step { from: NodeId, error: StepError },
    #[error("session {0} not found")]
    SessionNotFound(String),
    #[error("session store I/O error: {0}")]
    StoreIo(String),
    #[error("session {session} is corrupt: {message}")]
    CorruptSession { session: String, message: String },
    #[error("session limit of {limit} reached")]
    TooManySessions { limit: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTree {
    session_id: String,
    nodes: BTreeMap<NodeId, SimState>,
    parent: BTreeMap<NodeId, Option<NodeId>>,
    root_id: NodeId,
    created_at: DateTime<Utc>,
    updated_at: DateTime<Utc>,
    backend_config: BackendInfo,
    next_id: NodeId,
}

/// Descriptor recorded on root states, whose image came from the caller.
pub fn input_backend_info() -> BackendInfo {
    BackendInfo {
        predictor: BackendDescriptor::new("input", ""),
        renderer: BackendDescriptor::new("input", ""),
    }
}

/// Starts a session from an encoded screenshot. Without a layout the root
/// holds a root-only placeholder tagged `annotated:absent`.
pub fn create_session(
    image_bytes: &[u8],
    initial_layout: Option<ScreenLayout>,
    backend_config: BackendInfo,
) -> Result<SessionTree, SessionError> {
    let image = Image::decode(image_bytes).map_err(|e| SessionError::InvalidImage(e.to_string()))?;
    Ok(SessionTree::new(image, initial_layout, backend_config))
}

impl SessionTree {
    pub fn new(image: Image, initial_layout: Option<ScreenLayout>, backend_config: BackendInfo) -> Self {
        let layout = initial_layout.unwrap_or_else(|| ScreenLayout::root_only(LayoutSource::AnnotatedAbsent));
        let now = Utc::now();
        let mut nodes = BTreeMap::new();
        nodes.insert(0, SimState::initial(layout, image, input_backend_info()));
        let mut parent = BTreeMap::new();
        parent.insert(0, None);
        SessionTree {
            session_id: uuid::Uuid::new_v4().to_string(),
            nodes,
            parent,
            root_id: 0,
            created_at: now,
            updated_at: now,
            backend_config,
            next_id: 1,
        }
    }

    /// Reassembles a tree from persisted parts, checking every invariant.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        session_id: String,
        nodes: BTreeMap<NodeId, SimState>,
        parent: BTreeMap<NodeId, Option<NodeId>>,
        root_id: NodeId,
        created_at: DateTime<Utc>,
        updated_at: DateTime<Utc>,
        backend_config: BackendInfo,
        next_id: NodeId,
    ) -> Result<Self, String> {
        let tree = SessionTree {
            session_id,
            nodes,
            parent,
            root_id,
            created_at,
            updated_at,
            backend_config,
            next_id,
        };
        tree.check_invariants()?;
        Ok(tree)
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }
    pub fn root_id(&self) -> NodeId {
        self.root_id
    }
    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }
    pub fn updated_at(&self) -> DateTime<Utc> {
        self.updated_at
    }
    pub fn backend_config(&self) -> &BackendInfo {
        &self.backend_config
    }
    pub fn next_id(&self) -> NodeId {
        self.next_id
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn edge_count(&self) -> usize {
        self.parent.values().filter(|p| p.is_some()).count()
    }

    pub fn node(&self, id: NodeId) -> Result<&SimState, SessionError> {
        self.nodes.get(&id).ok_or(SessionError::NodeNotFound { node: id })
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &SimState)> {
        self.nodes.iter().map(|(k, v)| (*k, v))
    }

    pub fn parent_of(&self, id: NodeId) -> Result<Option<NodeId>, SessionError> {
        self.parent.get(&id).copied().ok_or(SessionError::NodeNotFound { node: id })
    }

    /// Children in creation order.
    pub fn children(&self, id: NodeId) -> Vec<NodeId> {
        self.parent
            .iter()
            .filter(|(_, p)| **p == Some(id))
            .map(|(k, _)| *k)
            .collect()
    }

    /// Number of edges between `id` and the root.
    pub fn depth(&self, id: NodeId) -> Result<usize, SessionError> {
        let mut depth = 0;
        let mut cur = self.parent_of(id)?;
        while let Some(p) = cur {
            depth += 1;
            cur = self.parent_of(p)?;
        }
        Ok(depth)
    }

    /// Digest of a node's content and parent link; unchanged for the life of the node.
    pub fn node_digest(&self, id: NodeId) -> Result<String, SessionError> {
        let state = self.node(id)?;
        let record = serde_json::json!({
            "node_id": id,
            "parent": self.parent_of(id)?,
            "layout": state.layout,
            "image": state.image.content_hash(),
            "action_taken": state.action_taken,
            "backend_info": state.backend_info,
            "latency_ms": state.latency_ms,
        });
        Ok(hex::encode(Sha256::digest(record.to_string().as_bytes())))
    }

    /// One root, acyclic parent links, actions on every non-root node,
    /// and ids below `next_id`.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.nodes.len() != self.parent.len() || self.nodes.keys().ne(self.parent.keys()) {
            return Err("node and parent maps disagree".into());
        }
        let roots: Vec<_> = self.parent.iter().filter(|(_, p)| p.is_none()).map(|(k, _)| *k).collect();
        if roots != [self.root_id] {
            return Err(format!("expected single root {}, found {:?}", self.root_id, roots));
        }
        if let Some(max) = self.nodes.keys().next_back() {
            if *max >= self.next_id {
                return Err(format!("node id {max} not below next id {}", self.next_id));
            }
        }
        for (&id, state) in &self.nodes {
            let is_root = id == self.root_id;
            if is_root != state.action_taken.is_none() {
                return Err(format!("node {id}: action_taken must be present exactly on non-root nodes"));
            }
            if let Some(Some(p)) = self.parent.get(&id) {
                if !self.nodes.contains_key(p) {
                    return Err(format!("node {id}: parent {p} missing"));
                }
            }
            // a walk longer than the node count means a cycle
            let mut cur = self.parent[&id];
            let mut steps = 0;
            while let Some(p) = cur {
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(format!("cycle through node {id}"));
                }
                cur = self.parent[&p];
            }
        }
        Ok(())
    }

    fn append(&mut self, parent: NodeId, state: SimState) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.insert(id, state);
        self.parent.insert(id, Some(parent));
        self.updated_at = Utc::now();
        id
    }
}

/// Steps from `from` and appends the result. The tree is unchanged on failure.
pub async fn branch_step(
    tree: &mut SessionTree,
    engine: &TransitionEngine,
    from: NodeId,
    action: &SimAction,
) -> Result<NodeId, SessionError> {
    let current = tree.node(from)?;
    let next = engine
        .step(current, action)
        .await
        .map_err(|error| SessionError::Step { from, error })?;
    Ok(tree.append(from, next))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRequest {
    pub start_node: NodeId,
    pub actions: Vec<SimAction>,
    #[serde(default = "default_stop_on_error")]
    pub stop_on_error: bool,
}

fn default_stop_on_error() -> bool {
    true
}

impl RolloutRequest {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.actions.is_empty() {
            return Err(SessionError::InvalidRequest("rollout needs at least one action".into()));
        }
        if self.actions.len() > MAX_ROLLOUT_ACTIONS {
            return Err(SessionError::InvalidRequest(format!(
                "rollout has {} actions, limit is {MAX_ROLLOUT_ACTIONS}",
                self.actions.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutFailure {
    pub action_index: usize,
    pub error: SessionError,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutOutcome {
    /// New node ids in creation order.
    pub created: Vec<NodeId>,
    pub failures: Vec<RolloutFailure>,
}

/// Applies actions in order, each from the previous result. A failed action
/// creates no node; without `stop_on_error` the next action continues from
/// the last node that succeeded.
pub async fn rollout(
    tree: &mut SessionTree,
    engine: &TransitionEngine,
    request: &RolloutRequest,
) -> Result<RolloutOutcome, SessionError> {
    request.validate()?;
    tree.node(request.start_node)?;
    let mut outcome = RolloutOutcome::default();
    let mut at = request.start_node;
    for (i, action) in request.actions.iter().enumerate() {
        match branch_step(tree, engine, at, action).await {
            Ok(id) => {
                outcome.created.push(id);
                at = id;
            }
            Err(error) => {
                outcome.failures.push(RolloutFailure { action_index: i, error });
                if request.stop_on_error {
                    break;
                }
            }
        }
    }
    Ok(outcome)
}

/// Shared handle used by the manager for committed trees.
pub type SharedTree = Arc<SessionTree>;
