//! In-process stub backend speaking the remote protocol, for tests and demos.
//!
//! Prediction and annotation can be driven by an [`AppGraph`], return canned
//! text, or fail with a fixed status. Rendering uses the built-in rasterizer
//! or returns a fixed PNG.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::sync::oneshot;

use uisim_core::engine::{ActionMatcher, AppGraph, LayoutPredictor, RuleBasedPredictor, SimAction};
use uisim_core::fid::BuiltinExtractor;
use uisim_core::layout::parse_layout;
use uisim_core::raster::{self, Image, Theme};

use crate::wire::*;
use crate::{decode_base64, encode_base64};

#[derive(Clone)]
pub enum PredictMode {
    /// Rule-based prediction over the graph; unmatched actions get HTTP 422.
    Graph(Arc<AppGraph>),
    Canned(String),
    Status(u16),
}

#[derive(Clone)]
pub enum RenderMode {
    Raster(Theme),
    FixturePng(Vec<u8>),
    /// A 200 response whose payload is not a PNG.
    NotPng,
    Status(u16),
}

#[derive(Clone)]
pub enum EmbedMode {
    Builtin,
    Status(u16),
}

#[derive(Clone)]
pub enum AnnotateMode {
    /// Layout: the DSL of the screen the frame renders. Action: the keywords
    /// of the first keyword edge between the two identified screens.
    /// Unidentified input yields an empty answer.
    Graph(Arc<AppGraph>),
    Canned(String),
    Status(u16),
}

#[derive(Clone)]
pub struct StubConfig {
    pub predict: PredictMode,
    pub render: RenderMode,
    pub embed: EmbedMode,
    pub annotate_action: AnnotateMode,
    pub annotate_layout: AnnotateMode,
    /// The first this-many POST requests fail with 503.
    pub transient_failures: usize,
    /// Theme used to identify screenshots of graph screens.
    pub theme: Theme,
}

impl StubConfig {
    /// Everything driven by the bundled demo graph and the light theme.
    pub fn demo() -> Self {
        let graph = Arc::new(AppGraph::demo());
        StubConfig {
            predict: PredictMode::Graph(graph.clone()),
            render: RenderMode::Raster(Theme::light()),
            embed: EmbedMode::Builtin,
            annotate_action: AnnotateMode::Graph(graph.clone()),
            annotate_layout: AnnotateMode::Graph(graph),
            transient_failures: 0,
            theme: Theme::light(),
        }
    }
}

/// Requests received per endpoint, failures included.
#[derive(Debug, Default)]
pub struct StubStats {
    pub predict: AtomicUsize,
    pub render: AtomicUsize,
    pub embed: AtomicUsize,
    pub annotate_action: AtomicUsize,
    pub annotate_layout: AtomicUsize,
}

impl StubStats {
    pub fn get(counter: &AtomicUsize) -> usize {
        counter.load(Ordering::SeqCst)
    }
}

struct Inner {
    config: StubConfig,
    stats: Arc<StubStats>,
    remaining_failures: AtomicUsize,
    predictor: Option<RuleBasedPredictor>,
    identifier: Option<RuleBasedPredictor>,
}

impl Inner {
    fn transient_failure(&self) -> bool {
        self.remaining_failures
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
    }

    fn identify(&self, image: &Image) -> Option<String> {
        self.identifier.as_ref()?.identify(image)
    }
}

type Shared = Arc<Inner>;

fn status(code: u16, message: &str) -> Response {
    let code = StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (code, Json(serde_json::json!({ "error": message }))).into_response()
}

fn decode_png(b64: &str) -> Result<Image, Box<Response>> {
    let bytes = decode_base64(b64).map_err(|e| Box::new(status(400, &e)))?;
    Image::decode(&bytes).map_err(|e| Box::new(status(400, &e.to_string())))
}

async fn predict(State(s): State<Shared>, Json(req): Json<PredictLayoutRequest>) -> Response {
    s.stats.predict.fetch_add(1, Ordering::SeqCst);
    if s.transient_failure() {
        return status(503, "transient failure");
    }
    match &s.config.predict {
        PredictMode::Status(code) => status(*code, "configured failure"),
        PredictMode::Canned(dsl) => Json(PredictLayoutResponse {
            layout_dsl: dsl.clone(),
        })
        .into_response(),
        PredictMode::Graph(_) => {
            let image = match decode_png(&req.image_png_base64) {
                Ok(i) => i,
                Err(r) => return *r,
            };
            let prior = match req.prior_layout_dsl.as_deref().map(parse_layout).transpose() {
                Ok(p) => p,
                Err(e) => return status(400, &e.to_string()),
            };
            let predictor = s.predictor.as_ref().expect("graph mode has a predictor");
            match predictor.predict(&image, &SimAction::new(req.action_text), prior.as_ref()).await {
                Ok(layout) => Json(PredictLayoutResponse {
                    layout_dsl: layout.to_dsl(),
                })
                .into_response(),
                Err(e) => status(422, &e.to_string()),
            }
        }
    }
}

async fn render(State(s): State<Shared>, Json(req): Json<RenderRequest>) -> Response {
    s.stats.render.fetch_add(1, Ordering::SeqCst);
    if s.transient_failure() {
        return status(503, "transient failure");
    }
    let png = match &s.config.render {
        RenderMode::Status(code) => return status(*code, "configured failure"),
        RenderMode::NotPng => encode_base64(b"definitely not a png"),
        RenderMode::FixturePng(bytes) => encode_base64(bytes),
        RenderMode::Raster(theme) => {
            let layout = match parse_layout(&req.layout_dsl) {
                Ok(l) => l,
                Err(e) => return status(400, &e.to_string()),
            };
            match raster::render(&layout, theme, req.width, req.height) {
                Ok(img) => encode_base64(&img.encode_png()),
                Err(e) => return status(400, &e.to_string()),
            }
        }
    };
    Json(RenderResponse { image_png_base64: png }).into_response()
}

async fn embed(State(s): State<Shared>, Json(req): Json<EmbedRequest>) -> Response {
    s.stats.embed.fetch_add(1, Ordering::SeqCst);
    if s.transient_failure() {
        return status(503, "transient failure");
    }
    match s.config.embed {
        EmbedMode::Status(code) => status(code, "configured failure"),
        EmbedMode::Builtin => match decode_png(&req.image_png_base64) {
            Ok(img) => Json(EmbedResponse {
                features: BuiltinExtractor::features(&img),
            })
            .into_response(),
            Err(r) => *r,
        },
    }
}

async fn annotate_action(State(s): State<Shared>, Json(req): Json<AnnotateActionRequest>) -> Response {
    s.stats.annotate_action.fetch_add(1, Ordering::SeqCst);
    if s.transient_failure() {
        return status(503, "transient failure");
    }
    let text = match &s.config.annotate_action {
        AnnotateMode::Status(code) => return status(*code, "configured failure"),
        AnnotateMode::Canned(t) => t.clone(),
        AnnotateMode::Graph(graph) => {
            let (a, b) = match (decode_png(&req.initial_png_base64), decode_png(&req.next_png_base64)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(r), _) | (_, Err(r)) => return *r,
            };
            match (s.identify(&a), s.identify(&b)) {
                (Some(from), Some(to)) => graph
                    .edges()
                    .iter()
                    .find_map(|e| match &e.when {
                        ActionMatcher::Keywords(k) if e.from == from && e.to == to => Some(k.join(" ")),
                        _ => None,
                    })
                    .unwrap_or_default(),
                _ => String::new(),
            }
        }
    };
    Json(AnnotateActionResponse { action_text: text }).into_response()
}

async fn annotate_layout(State(s): State<Shared>, Json(req): Json<AnnotateLayoutRequest>) -> Response {
    s.stats.annotate_layout.fetch_add(1, Ordering::SeqCst);
    if s.transient_failure() {
        return status(503, "transient failure");
    }
    let dsl = match &s.config.annotate_layout {
        AnnotateMode::Status(code) => return status(*code, "configured failure"),
        AnnotateMode::Canned(t) => t.clone(),
        AnnotateMode::Graph(graph) => match decode_png(&req.image_png_base64) {
            Ok(img) => s
                .identify(&img)
                .and_then(|id| graph.screen(&id).map(|l| l.to_dsl()))
                .unwrap_or_default(),
            Err(r) => return *r,
        },
    };
    Json(AnnotateLayoutResponse { layout_dsl: dsl }).into_response()
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

pub fn router(config: StubConfig, stats: Arc<StubStats>) -> Router {
    let graph = [&config.annotate_layout, &config.annotate_action]
        .into_iter()
        .find_map(|m| match m {
            AnnotateMode::Graph(g) => Some(g.clone()),
            _ => None,
        })
        .or_else(|| match &config.predict {
            PredictMode::Graph(g) => Some(g.clone()),
            _ => None,
        });
    let predictor = match &config.predict {
        PredictMode::Graph(g) => Some(RuleBasedPredictor::new(g.clone(), config.theme.clone())),
        _ => None,
    };
    let inner = Arc::new(Inner {
        remaining_failures: AtomicUsize::new(config.transient_failures),
        identifier: graph.map(|g| RuleBasedPredictor::new(g, config.theme.clone())),
        predictor,
        config,
        stats,
    });
    Router::new()
        .route(PREDICT_LAYOUT, post(predict))
        .route(RENDER, post(render))
        .route(EMBED, post(embed))
        .route(ANNOTATE_ACTION, post(annotate_action))
        .route(ANNOTATE_LAYOUT, post(annotate_layout))
        .route("/healthz", get(healthz))
        .with_state(inner)
}

/// A running stub bound to an ephemeral localhost port. Stops on drop.
pub struct StubServer {
    addr: SocketAddr,
    stats: Arc<StubStats>,
    shutdown: Option<oneshot::Sender<()>>,
}

impl StubServer {
    pub async fn start(config: StubConfig) -> std::io::Result<Self> {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        Self::serve(listener, config)
    }

    pub fn serve(listener: tokio::net::TcpListener, config: StubConfig) -> std::io::Result<Self> {
        let addr = listener.local_addr()?;
        let stats = Arc::new(StubStats::default());
        let app = router(config, stats.clone());
        let (tx, rx) = oneshot::channel::<()>();
        tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(StubServer {
            addr,
            stats,
            shutdown: Some(tx),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stats(&self) -> &StubStats {
        &self.stats
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}
