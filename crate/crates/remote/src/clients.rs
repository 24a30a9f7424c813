use async_trait::async_trait;

use uisim_core::dataset::{ActionAnnotator, AnnotationError, LayoutAnnotator};
use uisim_core::engine::{BackendDescriptor, BackendError, BackendHealth, LayoutPredictor, ScreenRenderer, SimAction};
use uisim_core::fid::{ExtractorInfo, FeatureExtractor, FidError};
use uisim_core::layout::{parse_layout, LayoutSource, ScreenLayout};
use uisim_core::raster::{self, Image};

use crate::wire::*;
use crate::{decode_base64, encode_base64, CallError, Endpoint, EndpointConfig};

fn descriptor(kind: &str, endpoint: &Endpoint) -> BackendDescriptor {
    let mut d = BackendDescriptor::new(kind, env!("CARGO_PKG_VERSION"));
    d.metadata.insert("url".into(), endpoint.config().base_url.clone());
    d
}

async fn health(d: BackendDescriptor, endpoint: &Endpoint) -> BackendHealth {
    let probe = endpoint.probe().await;
    BackendHealth {
        backend: d,
        reachable: probe.is_ok(),
        detail: probe.err(),
    }
}

fn unavailable(backend: &str, e: CallError) -> BackendError {
    BackendError::Unavailable {
        backend: backend.to_string(),
        message: e.to_string(),
    }
}

/// Stage-1 backend: `POST /v1/predict_layout`.
#[derive(Debug, Clone)]
pub struct RemotePredictor {
    endpoint: Endpoint,
}

impl RemotePredictor {
    pub const NAME: &'static str = "remote-predictor";

    pub fn new(config: EndpointConfig) -> Self {
        RemotePredictor {
            endpoint: Endpoint::new(config),
        }
    }
}

#[async_trait]
impl LayoutPredictor for RemotePredictor {
    fn descriptor(&self) -> BackendDescriptor {
        descriptor(Self::NAME, &self.endpoint)
    }

    async fn predict(
        &self,
        image: &Image,
        action: &SimAction,
        prior: Option<&ScreenLayout>,
    ) -> Result<ScreenLayout, BackendError> {
        let req = PredictLayoutRequest {
            image_png_base64: encode_base64(&image.encode_png()),
            action_text: action.text.clone(),
            prior_layout_dsl: prior.map(ScreenLayout::to_dsl),
        };
        let resp: PredictLayoutResponse = self.endpoint.call(PREDICT_LAYOUT, &req).await.map_err(|e| match e {
            CallError::Rejected(_) => BackendError::NoTransition {
                screen: None,
                action: action.text.clone(),
            },
            e => unavailable(Self::NAME, e),
        })?;
        let layout = parse_layout(&resp.layout_dsl).map_err(|error| BackendError::InvalidPrediction {
            raw: resp.layout_dsl.clone(),
            error,
        })?;
        Ok(layout.with_source(LayoutSource::Predicted))
    }

    async fn health(&self) -> BackendHealth {
        health(self.descriptor(), &self.endpoint).await
    }
}

/// Stage-2 backend: `POST /v1/render`.
#[derive(Debug, Clone)]
pub struct RemoteRenderer {
    endpoint: Endpoint,
    width: u32,
    height: u32,
}

impl RemoteRenderer {
    pub const NAME: &'static str = "remote-renderer";

    pub fn new(config: EndpointConfig, width: u32, height: u32) -> Result<Self, raster::RenderError> {
        raster::check_resolution(width, height)?;
        Ok(RemoteRenderer {
            endpoint: Endpoint::new(config),
            width,
            height,
        })
    }
}

#[async_trait]
impl ScreenRenderer for RemoteRenderer {
    fn descriptor(&self) -> BackendDescriptor {
        descriptor(Self::NAME, &self.endpoint)
    }

    fn resolution(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    async fn render(&self, layout: &ScreenLayout) -> Result<Image, BackendError> {
        let req = RenderRequest {
            layout_dsl: layout.to_dsl(),
            width: self.width,
            height: self.height,
        };
        let resp: RenderResponse = self
            .endpoint
            .call(RENDER, &req)
            .await
            .map_err(|e| unavailable(Self::NAME, e))?;
        let png = decode_base64(&resp.image_png_base64).map_err(BackendError::InvalidImage)?;
        Image::decode(&png).map_err(|e| BackendError::InvalidImage(e.to_string()))
    }

    async fn health(&self) -> BackendHealth {
        health(self.descriptor(), &self.endpoint).await
    }
}

/// Feature extractor behind `POST /v1/embed`. The dimension is declared up
/// front so reports can be tagged before any call is made.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    endpoint: Endpoint,
    name: String,
    dim: usize,
}

impl RemoteEmbedder {
    pub fn new(config: EndpointConfig, name: impl Into<String>, dim: usize) -> Self {
        RemoteEmbedder {
            endpoint: Endpoint::new(config),
            name: name.into(),
            dim,
        }
    }
}

#[async_trait]
impl FeatureExtractor for RemoteEmbedder {
    fn info(&self) -> ExtractorInfo {
        ExtractorInfo {
            name: format!("remote:{}", self.name),
            version: self.endpoint.config().base_url.clone(),
            dim: self.dim,
        }
    }

    async fn extract(&self, image: &Image) -> Result<Vec<f64>, FidError> {
        let req = EmbedRequest {
            image_png_base64: encode_base64(&image.encode_png()),
        };
        let resp: EmbedResponse = self
            .endpoint
            .call(EMBED, &req)
            .await
            .map_err(|e| FidError::Extraction(e.to_string()))?;
        if resp.features.len() != self.dim {
            return Err(FidError::DimensionMismatch {
                expected: self.dim,
                found: resp.features.len(),
            });
        }
        Ok(resp.features)
    }
}

fn annotation_error(name: &str, e: CallError) -> AnnotationError {
    match e {
        CallError::Unavailable(message) => AnnotationError::Unavailable {
            annotator: name.to_string(),
            message,
        },
        CallError::Malformed(m) | CallError::Rejected(m) => AnnotationError::Invalid(m),
    }
}

/// `POST /v1/annotate_action`: both frames and the episode goal in, action text out.
#[derive(Debug, Clone)]
pub struct RemoteActionAnnotator {
    endpoint: Endpoint,
}

impl RemoteActionAnnotator {
    pub const NAME: &'static str = "remote-action-annotator";

    pub fn new(config: EndpointConfig) -> Self {
        RemoteActionAnnotator {
            endpoint: Endpoint::new(config),
        }
    }
}

#[async_trait]
impl ActionAnnotator for RemoteActionAnnotator {
    fn descriptor(&self) -> BackendDescriptor {
        descriptor(Self::NAME, &self.endpoint)
    }

    async fn annotate_action(&self, initial: &Image, next: &Image, goal_text: &str) -> Result<String, AnnotationError> {
        let req = AnnotateActionRequest {
            initial_png_base64: encode_base64(&initial.encode_png()),
            next_png_base64: encode_base64(&next.encode_png()),
            goal_text: goal_text.to_string(),
        };
        let resp: AnnotateActionResponse = self
            .endpoint
            .call(ANNOTATE_ACTION, &req)
            .await
            .map_err(|e| annotation_error(Self::NAME, e))?;
        Ok(resp.action_text)
    }
}

/// `POST /v1/annotate_layout`: one frame in, layout DSL out.
#[derive(Debug, Clone)]
pub struct RemoteLayoutAnnotator {
    endpoint: Endpoint,
}

impl RemoteLayoutAnnotator {
    pub const NAME: &'static str = "remote-layout-annotator";

    pub fn new(config: EndpointConfig) -> Self {
        RemoteLayoutAnnotator {
            endpoint: Endpoint::new(config),
        }
    }
}

#[async_trait]
impl LayoutAnnotator for RemoteLayoutAnnotator {
    fn descriptor(&self) -> BackendDescriptor {
        descriptor(Self::NAME, &self.endpoint)
    }

    async fn annotate_layout(&self, frame: &Image) -> Result<String, AnnotationError> {
        let req = AnnotateLayoutRequest {
            image_png_base64: encode_base64(&frame.encode_png()),
        };
        let resp: AnnotateLayoutResponse = self
            .endpoint
            .call(ANNOTATE_LAYOUT, &req)
            .await
            .map_err(|e| annotation_error(Self::NAME, e))?;
        Ok(resp.layout_dsl)
    }
}
