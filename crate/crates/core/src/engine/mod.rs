//! The two-stage transition: predict the next layout from the current image
//! and an action, then render that layout.
//!
//! Both stages sit behind object-safe async traits so rule-based, built-in
//! and remote backends are interchangeable.

mod action;
pub mod appgraph;
mod builtin;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use action::{ActionKind, NormPoint, SimAction};
pub use appgraph::{ActionMatcher, AppGraph, AppGraphError, Edge, RuleBasedPredictor};
pub use builtin::BuiltinRenderer;

use crate::layout::{LayoutError, ScreenLayout};
use crate::raster::{Image, RenderError};

/// Name and version of a backend, plus whatever metadata it reports.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl BackendDescriptor {
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        BackendDescriptor {
            name: name.into(),
            version: version.into(),
            metadata: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendHealth {
    pub backend: BackendDescriptor,
    pub reachable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend {backend} unavailable: {message}")]
    Unavailable { backend: String, message: String },
    /// The predictor produced text that is not a valid layout. `raw` keeps
    /// the original output for debugging.
    #[error("invalid prediction: {error}")]
    InvalidPrediction { raw: String, error: LayoutError },
    #[error("no transition from screen {} for action `{action}`", .screen.as_deref().unwrap_or("<unrecognized>"))]
    NoTransition { screen: Option<String>, action: String },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error(transparent)]
    Render(#[from] RenderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Layout,
    Render,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Layout => "layout",
            Stage::Render => "render",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{stage} stage failed: {source}")]
pub struct StepError {
    pub stage: Stage,
    #[source]
    pub source: BackendError,
}

#[async_trait]
pub trait LayoutPredictor: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    /// Predicts the layout that follows `action` on the screen shown in
    /// `image`. `prior` is an optional hint that backends may ignore.
    async fn predict(
        &self,
        image: &Image,
        action: &SimAction,
        prior: Option<&ScreenLayout>,
    ) -> Result<ScreenLayout, BackendError>;

    async fn health(&self) -> BackendHealth {
        BackendHealth {
            backend: self.descriptor(),
            reachable: true,
            detail: None,
        }
    }
}

#[async_trait]
pub trait ScreenRenderer: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    /// Output resolution as `(width, height)`.
    fn resolution(&self) -> (u32, u32);

    async fn render(&self, layout: &ScreenLayout) -> Result<Image, BackendError>;

    async fn health(&self) -> BackendHealth {
        BackendHealth {
            backend: self.descriptor(),
            reachable: true,
            detail: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BackendInfo {
    pub predictor: BackendDescriptor,
    pub renderer: BackendDescriptor,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageLatency {
    pub layout_ms: f64,
    pub render_ms: f64,
}

/// One simulated screen.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub layout: ScreenLayout,
    pub image: Arc<Image>,
    /// The action that produced this state; `None` for a session root.
    pub action_taken: Option<SimAction>,
    pub backend_info: BackendInfo,
    pub latency_ms: StageLatency,
}

impl SimState {
    /// A root state: no action, zero latency.
    pub fn initial(layout: ScreenLayout, image: Image, backend_info: BackendInfo) -> Self {
        SimState {
            layout,
            image: Arc::new(image),
            action_taken: None,
            backend_info,
            latency_ms: StageLatency::default(),
        }
    }

    /// Equality on everything except timings.
    pub fn same_outcome(&self, other: &SimState) -> bool {
        self.layout == other.layout
            && self.image == other.image
            && self.action_taken == other.action_taken
            && self.backend_info == other.backend_info
    }
}

/// Stage 1. Rejects actions without text before calling the backend.
pub async fn predict_layout(
    backend: &dyn LayoutPredictor,
    image: &Image,
    action: &SimAction,
    prior_layout: Option<&ScreenLayout>,
) -> Result<ScreenLayout, BackendError> {
    action.validate().map_err(BackendError::InvalidAction)?;
    backend.predict(image, action, prior_layout).await
}

/// Stage 2.
pub async fn render_state(backend: &dyn ScreenRenderer, layout: &ScreenLayout) -> Result<Image, BackendError> {
    backend.render(layout).await
}

/// A predictor/renderer pair plus the prior-layout policy.
#[derive(Clone)]
pub struct TransitionEngine {
    predictor: Arc<dyn LayoutPredictor>,
    renderer: Arc<dyn ScreenRenderer>,
    pass_prior_layout: bool,
}

impl TransitionEngine {
    pub fn new(predictor: Arc<dyn LayoutPredictor>, renderer: Arc<dyn ScreenRenderer>) -> Self {
        TransitionEngine {
            predictor,
            renderer,
            pass_prior_layout: false,
        }
    }

    /// Forward the current layout to the predictor as a hint (off by default).
    pub fn with_prior_layout(mut self, enabled: bool) -> Self {
        self.pass_prior_layout = enabled;
        self
    }

    pub fn predictor(&self) -> &Arc<dyn LayoutPredictor> {
        &self.predictor
    }

    pub fn renderer(&self) -> &Arc<dyn ScreenRenderer> {
        &self.renderer
    }

    pub fn backend_info(&self) -> BackendInfo {
        BackendInfo {
            predictor: self.predictor.descriptor(),
            renderer: self.renderer.descriptor(),
        }
    }

    pub async fn step(&self, current: &SimState, action: &SimAction) -> Result<SimState, StepError> {
        let prior = self.pass_prior_layout.then_some(&current.layout);
        step_with(self.predictor.as_ref(), self.renderer.as_ref(), current, action, prior).await
    }
}

/// Runs both stages. Stage 2 never starts if stage 1 fails.
pub async fn step(
    predictor: &dyn LayoutPredictor,
    renderer: &dyn ScreenRenderer,
    current: &SimState,
    action: &SimAction,
) -> Result<SimState, StepError> {
    step_with(predictor, renderer, current, action, None).await
}

async fn step_with(
    predictor: &dyn LayoutPredictor,
    renderer: &dyn ScreenRenderer,
    current: &SimState,
    action: &SimAction,
    prior: Option<&ScreenLayout>,
) -> Result<SimState, StepError> {
    let t0 = Instant::now();
    let layout = predict_layout(predictor, &current.image, action, prior)
        .await
        .map_err(|source| StepError {
            stage: Stage::Layout,
            source,
        })?;
    let layout_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let image = render_state(renderer, &layout).await.map_err(|source| StepError {
        stage: Stage::Render,
        source,
    })?;
    let render_ms = t1.elapsed().as_secs_f64() * 1e3;

    Ok(SimState {
        layout,
        image: Arc::new(image),
        action_taken: Some(action.clone()),
        backend_info: BackendInfo {
            predictor: predictor.descriptor(),
            renderer: renderer.descriptor(),
        },
        latency_ms: StageLatency { layout_ms, render_ms },
    })
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::layout::LayoutSource;
    use crate::raster::{render, Theme};

    struct Failing;

    #[async_trait]
    impl LayoutPredictor for Failing {
        fn descriptor(&self) -> BackendDescriptor {
            BackendDescriptor::new("failing", "0")
        }
        async fn predict(&self, _: &Image, _: &SimAction, _: Option<&ScreenLayout>) -> Result<ScreenLayout, BackendError> {
            Err(BackendError::Unavailable {
                backend: "failing".into(),
                message: "down".into(),
            })
        }
    }

    struct CountingRenderer(AtomicUsize, BuiltinRenderer);

    #[async_trait]
    impl ScreenRenderer for CountingRenderer {
        fn descriptor(&self) -> BackendDescriptor {
            self.1.descriptor()
        }
        fn resolution(&self) -> (u32, u32) {
            self.1.resolution()
        }
        async fn render(&self, layout: &ScreenLayout) -> Result<Image, BackendError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            self.1.render(layout).await
        }
    }

    fn demo_root(graph: &AppGraph, renderer: &BuiltinRenderer) -> SimState {
        let home = graph.screen("home").unwrap().clone();
        let (w, h) = renderer.resolution();
        let image = render(&home, renderer.theme(), w, h).unwrap();
        SimState::initial(home, image, BackendInfo::default())
    }

    #[tokio::test]
    async fn demo_step_composes_stage_oracles() {
        let graph = Arc::new(AppGraph::demo());
        let predictor = RuleBasedPredictor::new(graph.clone(), Theme::light());
        let renderer = BuiltinRenderer::new(Theme::light(), 108, 240).unwrap();
        let root = demo_root(&graph, &renderer);

        let next = step(&predictor, &renderer, &root, &SimAction::new("open email app"))
            .await
            .unwrap();
        let inbox = graph.screen("inbox").unwrap();
        assert_eq!(&next.layout, inbox);
        assert_eq!(*next.image, render(inbox, &Theme::light(), 108, 240).unwrap());
        assert_eq!(next.action_taken.as_ref().unwrap().text, "open email app");
        assert!(root.action_taken.is_none());

        let again = step(&predictor, &renderer, &root, &SimAction::new("open email app"))
            .await
            .unwrap();
        assert!(next.same_outcome(&again));
    }

    #[tokio::test]
    async fn failing_predictor_short_circuits() {
        let renderer = CountingRenderer(AtomicUsize::new(0), BuiltinRenderer::new(Theme::light(), 108, 240).unwrap());
        let root = SimState::initial(
            ScreenLayout::root_only(LayoutSource::Annotated),
            Image::filled(108, 240, Theme::light().background_color),
            BackendInfo::default(),
        );
        let err = step(&Failing, &renderer, &root, &SimAction::new("tap")).await.unwrap_err();
        assert_eq!(err.stage, Stage::Layout);
        assert!(matches!(err.source, BackendError::Unavailable { .. }));
        assert_eq!(renderer.0.load(Ordering::SeqCst), 0);
    }

    #[tokio::test]
    async fn empty_action_rejected_before_backend() {
        let graph = Arc::new(AppGraph::demo());
        let predictor = RuleBasedPredictor::new(graph.clone(), Theme::light());
        let renderer = BuiltinRenderer::new(Theme::light(), 108, 240).unwrap();
        let root = demo_root(&graph, &renderer);
        let err = step(&predictor, &renderer, &root, &SimAction::new("  ")).await.unwrap_err();
        assert!(matches!(err.source, BackendError::InvalidAction(_)));
    }

    #[tokio::test]
    async fn builtin_renderer_delegates_to_rasterizer() {
        let renderer = BuiltinRenderer::new(Theme::dark(), 108, 240).unwrap();
        let graph = AppGraph::demo();
        for id in graph.screen_ids() {
            let l = graph.screen(id).unwrap();
            assert_eq!(
                render_state(&renderer, l).await.unwrap(),
                render(l, &Theme::dark(), 108, 240).unwrap()
            );
        }
        let blank = render_state(&renderer, &ScreenLayout::root_only(LayoutSource::Annotated))
            .await
            .unwrap();
        assert!(blank.pixels().chunks(3).all(|p| p == Theme::dark().background_color.0));
    }
}
