//! HTTP surface over a [`SessionManager`].

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::header::{self, HeaderMap, HeaderValue};
use axum::http::{Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use sha2::{Digest, Sha256};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use uisim_core::layout::parse_layout;
use uisim_core::session::{NodeId, RolloutRequest, SessionError, SessionManager, SessionStore, SharedTree};

use crate::config::{ConfigError, ServiceConfig};
use crate::views::*;

pub const MAX_BODY_BYTES: usize = 32 * 1024 * 1024;
const PROBLEM_JSON: &str = "application/problem+json";

#[derive(Clone)]
pub struct AppState {
    pub manager: Arc<SessionManager>,
}

impl AppState {
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ConfigError> {
        let engine = Arc::new(config.engine()?);
        let manager = SessionManager::new(engine, Some(SessionStore::new(&config.store_dir)))
            .with_max_sessions(config.max_sessions);
        Ok(AppState {
            manager: Arc::new(manager),
        })
    }
}

pub struct ApiError(u16, Problem);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut resp = (status, Json(self.1)).into_response();
        resp.headers_mut()
            .insert(header::CONTENT_TYPE, HeaderValue::from_static(PROBLEM_JSON));
        resp
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, p) = session_problem(&e);
        ApiError(status, p)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(400, Problem::new("invalid_request", e.body_text()))
    }
}

fn bad_request(code: &str, message: impl Into<String>) -> ApiError {
    ApiError(400, Problem::new(code, message))
}

type ApiResult<T> = Result<T, ApiError>;

fn node_of(tree: &SharedTree, nid: NodeId) -> ApiResult<NodeView> {
    Ok(NodeView::of(tree, nid)?)
}

async fn create_session(State(s): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let (image, layout) = if is_json {
        let req: CreateSessionRequest =
            serde_json::from_slice(&body).map_err(|e| bad_request("invalid_request", e.to_string()))?;
        let image = base64::engine::general_purpose::STANDARD
            .decode(req.image_png_base64.trim())
            .map_err(|e| bad_request("invalid_image", format!("image_png_base64: {e}")))?;
        let layout = req
            .layout_dsl
            .as_deref()
            .map(parse_layout)
            .transpose()
            .map_err(|e| bad_request("invalid_layout", e.to_string()))?;
        (image, layout)
    } else {
        (body.to_vec(), None)
    };
    let tree = s.manager.create(&image, layout).await?;
    let location = format!("/v1/sessions/{}", tree.session_id());
    let mut resp = (StatusCode::CREATED, Json(SessionView::of(&tree))).into_response();
    if let Ok(v) = HeaderValue::from_str(&location) {
        resp.headers_mut().insert(header::LOCATION, v);
    }
    Ok(resp)
}

async fn list_sessions(State(s): State<AppState>) -> ApiResult<Response> {
    let list = s.manager.list().await?;
    Ok(Json(serde_json::json!({ "sessions": list })).into_response())
}

async fn get_session(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let tree = s.manager.get(&id).await?;
    Ok(Json(SessionView::of(&tree)))
}

async fn get_node(State(s): State<AppState>, Path((id, nid)): Path<(String, NodeId)>) -> ApiResult<Json<NodeView>> {
    let tree = s.manager.get(&id).await?;
    Ok(Json(node_of(&tree, nid)?))
}

async fn step(
    State(s): State<AppState>,
    Path((id, nid)): Path<(String, NodeId)>,
    body: Result<Json<StepRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    let action = req.action.into();
    let out = s.manager.step(&id, nid, &action).await?;
    let view = StepView {
        session_id: id,
        node: node_of(&out.tree, out.node_id)?,
    };
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn rollout(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<RolloutBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let req = RolloutRequest {
        start_node: body.start_node,
        actions: body.actions.into_iter().map(Into::into).collect(),
        stop_on_error: body.stop_on_error,
    };
    let (outcome, tree) = s.manager.rollout(&id, &req).await?;
    let status = if outcome.created.is_empty() {
        StatusCode::OK
    } else {
        StatusCode::CREATED
    };
    Ok((status, Json(RolloutView::of(&tree, &outcome))).into_response())
}

/// PNG bytes and their SHA-256, which doubles as the ETag.
pub fn encode_node_png(tree: &SharedTree, nid: NodeId) -> Result<(Vec<u8>, String), SessionError> {
    let png = tree.node(nid)?.image.encode_png();
    let hash = hex::encode(Sha256::digest(&png));
    Ok((png, hash))
}

async fn node_image(
    State(s): State<AppState>,
    Path((id, nid)): Path<(String, NodeId)>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let tree = s.manager.get(&id).await?;
    let (png, hash) = tokio::task::spawn_blocking(move || encode_node_png(&tree, nid))
        .await
        .map_err(|e| ApiError(500, Problem::new("internal", e.to_string())))??;
    let etag = format!("\"{hash}\"");
    let cached = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == etag));
    let etag_value = HeaderValue::from_str(&etag).expect("hex etag is a valid header");
    let immutable = HeaderValue::from_static("public, max-age=31536000, immutable");
    if cached {
        return Ok((
            StatusCode::NOT_MODIFIED,
            [(header::ETAG, etag_value), (header::CACHE_CONTROL, immutable)],
        )
            .into_response());
    }
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("image/png")),
            (header::ETAG, etag_value),
            (header::CACHE_CONTROL, immutable),
        ],
        png,
    )
        .into_response())
}

async fn node_layout(State(s): State<AppState>, Path((id, nid)): Path<(String, NodeId)>) -> ApiResult<Response> {
    let tree = s.manager.get(&id).await?;
    let dsl = tree.node(nid)?.layout.to_dsl();
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], dsl).into_response())
}

async fn healthz(State(s): State<AppState>) -> Response {
    let engine = s.manager.engine();
    let (predictor, renderer) = tokio::join!(engine.predictor().health(), engine.renderer().health());
    let store = s.manager.store().map(|st| {
        let ok = std::fs::create_dir_all(st.root()).is_ok();
        serde_json::json!({ "dir": st.root().display().to_string(), "writable": ok })
    });
    let store_ok = store.as_ref().is_none_or(|v| v["writable"] == true);
    let ready = predictor.reachable && renderer.reachable && store_ok;
    let status = if ready {
        StatusCode::OK
    } else {
        StatusCode::SERVICE_UNAVAILABLE
    };
    let body = serde_json::json!({
        "status": if ready { "ok" } else { "degraded" },
        "predictor": predictor,
        "renderer": renderer,
        "store": store,
    });
    (status, Json(body)).into_response()
}

async fn not_found() -> ApiError {
    ApiError(404, Problem::new("not_found", "no such route"))
}

fn cors(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE, header::IF_NONE_MATCH])
        .expose_headers([header::ETAG, header::LOCATION]);
    if origins.iter().any(|o| o == "*") {
        layer.allow_origin(Any)
    } else {
        let list: Vec<HeaderValue> = origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
        layer.allow_origin(AllowOrigin::list(list))
    }
}

pub fn router(state: AppState, cors_origins: &[String]) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/sessions", post(create_session).get(list_sessions))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/rollout", post(rollout))
        .route("/v1/sessions/{id}/nodes/{nid}", get(get_node))
        .route("/v1/sessions/{id}/nodes/{nid}/step", post(step))
        .route("/v1/sessions/{id}/nodes/{nid}/image", get(node_image))
        .route("/v1/sessions/{id}/nodes/{nid}/layout", get(node_layout))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .layer(cors(cors_origins))
        .with_state(state)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {message}")]
    Bind { addr: String, message: String },
    #[error("store directory {dir}: {message}")]
    StoreIo { dir: String, message: String },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Binds the configured address and serves until `shutdown` resolves.
/// In-flight requests finish before this returns.
pub async fn serve(config: ServiceConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
    std::fs::create_dir_all(&config.store_dir).map_err(|e| ServeError::StoreIo {
        dir: config.store_dir.display().to_string(),
        message: e.to_string(),
    })?;
    let state = AppState::from_config(&config)?;
    let addr = format!("{}:{}", config.listen, config.port);
    let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| ServeError::Bind {
        addr: addr.clone(),
        message: e.to_string(),
    })?;
    serve_on(listener, state, &config.cors_origins, shutdown).await
}

pub async fn serve_on(
    listener: tokio::net::TcpListener,
    state: AppState,
    cors_origins: &[String],
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let addr: SocketAddr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state, cors_origins))
        .with_graceful_shutdown(shutdown)
        .await?;
    tracing::info!("shut down");
    Ok(())
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
