//! JSON bodies shared by the HTTP API and the CLI's `--json` output.

use serde::{Deserialize, Serialize};

use uisim_core::engine::{BackendError, BackendInfo, SimAction, StageLatency, Stage};
use uisim_core::session::{NodeId, RolloutOutcome, SessionError, SessionTree};

/// Problem document. `code` strings are stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl Problem {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Problem {
            code: code.into(),
            stage: None,
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

/// Maps a session error to an HTTP status and problem document.
pub fn session_problem(e: &SessionError) -> (u16, Problem) {
    let message = e.to_string();
    match e {
        SessionError::InvalidImage(_) => (400, Problem::new("invalid_image", message)),
        SessionError::InvalidRequest(_) => (400, Problem::new("invalid_request", message)),
        SessionError::NodeNotFound { node } => (
            404,
            Problem::new("node_not_found", message).with_detail(serde_json::json!({ "node_id": node })),
        ),
        SessionError::SessionNotFound(id) => (
            404,
            Problem::new("session_not_found", message).with_detail(serde_json::json!({ "session_id": id })),
        ),
        SessionError::StoreIo(_) => (500, Problem::new("store_io", message)),
        SessionError::CorruptSession { session, .. } => (
            500,
            Problem::new("corrupt_session", message).with_detail(serde_json::json!({ "session_id": session })),
        ),
        SessionError::TooManySessions { limit } => (
            429,
            Problem::new("too_many_sessions", message).with_detail(serde_json::json!({ "limit": limit })),
        ),
        SessionError::Step { from, error } => {
            let (status, code, mut detail) = match &error.source {
                BackendError::Unavailable { backend, .. } => (503, "backend_unavailable", serde_json::json!({ "backend": backend })),
                BackendError::InvalidPrediction { raw, .. } => (502, "invalid_prediction", serde_json::json!({ "raw": raw })),
                BackendError::NoTransition { screen, action } => (
                    422,
                    "no_transition",
                    serde_json::json!({ "screen": screen, "action": action }),
                ),
                BackendError::InvalidImage(_) => (502, "invalid_backend_image", serde_json::json!({})),
                BackendError::InvalidAction(_) => (400, "invalid_action", serde_json::json!({})),
                BackendError::Render(_) => (500, "render_failed", serde_json::json!({})),
            };
            detail["from_node"] = serde_json::json!(from);
            let mut p = Problem::new(code, message).with_detail(detail);
            p.stage = Some(error.stage);
            (status, p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeView {
    pub node_id: NodeId,
    pub parent_id: Option<NodeId>,
    pub depth: usize,
    pub children: Vec<NodeId>,
    pub action: Option<SimAction>,
    pub layout_source: String,
    pub screen_id: Option<String>,
    pub element_count: usize,
    pub width: u32,
    pub height: u32,
    pub backend_info: BackendInfo,
    pub latency_ms: StageLatency,
}

impl NodeView {
    pub fn of(tree: &SessionTree, id: NodeId) -> Result<Self, SessionError> {
        let state = tree.node(id)?;
        Ok(NodeView {
            node_id: id,
            parent_id: tree.parent_of(id)?,
            depth: tree.depth(id)?,
            children: tree.children(id),
            action: state.action_taken.clone(),
            layout_source: state.layout.source().as_str().to_string(),
            screen_id: state.layout.screen_id().map(str::to_string),
            element_count: state.layout.element_count(),
            width: state.image.width(),
            height: state.image.height(),
            backend_info: state.backend_info.clone(),
            latency_ms: state.latency_ms,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub created_at: String,
    pub updated_at: String,
    pub root_id: NodeId,
    pub node_count: usize,
    pub edge_count: usize,
    pub backend_config: BackendInfo,
    pub nodes: Vec<NodeView>,
}

impl SessionView {
    pub fn of(tree: &SessionTree) -> Self {
        SessionView {
            session_id: tree.session_id().to_string(),
            created_at: tree.created_at().to_rfc3339(),
            updated_at: tree.updated_at().to_rfc3339(),
            root_id: tree.root_id(),
            node_count: tree.len(),
            edge_count: tree.edge_count(),
            backend_config: tree.backend_config().clone(),
            nodes: tree
                .nodes()
                .map(|(id, _)| NodeView::of(tree, id).expect("listed nodes exist"))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepView {
    pub session_id: String,
    pub node: NodeView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutFailureView {
    pub action_index: usize,
    pub problem: Problem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutView {
    pub session_id: String,
    pub created: Vec<NodeView>,
    pub failures: Vec<RolloutFailureView>,
}

impl RolloutView {
    pub fn of(tree: &SessionTree, outcome: &RolloutOutcome) -> Self {
        RolloutView {
            session_id: tree.session_id().to_string(),
            created: outcome
                .created
                .iter()
                .map(|&id| NodeView::of(tree, id).expect("created nodes exist"))
                .collect(),
            failures: outcome
                .failures
                .iter()
                .map(|f| RolloutFailureView {
                    action_index: f.action_index,
                    problem: session_problem(&f.error).1,
                })
                .collect(),
        }
    }
}

/// An action given either as bare text or as a structured object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionInput {
    Text(String),
    Structured(SimAction),
}

impl From<ActionInput> for SimAction {
    fn from(a: ActionInput) -> SimAction {
        match a {
            ActionInput::Text(t) => SimAction::new(t),
            ActionInput::Structured(a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    pub action: ActionInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutBody {
    pub start_node: NodeId,
    pub actions: Vec<ActionInput>,
    #[serde(default = "default_true")]
    pub stop_on_error: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub image_png_base64: String,
    #[serde(default)]
    pub layout_dsl: Option<String>,
}
