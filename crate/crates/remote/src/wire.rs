//! Request and response bodies.

use serde::{Deserialize, Serialize};

pub const PREDICT_LAYOUT: &str = "/v1/predict_layout";
pub const RENDER: &str = "/v1/render";
pub const EMBED: &str = "/v1/embed";
pub const ANNOTATE_ACTION: &str = "/v1/annotate_action";
pub const ANNOTATE_LAYOUT: &str = "/v1/annotate_layout";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictLayoutRequest {
    pub image_png_base64: String,
    pub action_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_layout_dsl: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictLayoutResponse {
    pub layout_dsl: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderRequest {
    pub layout_dsl: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderResponse {
    pub image_png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub image_png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotateActionRequest {
    pub initial_png_base64: String,
    pub next_png_base64: String,
    pub goal_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotateActionResponse {
    pub action_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotateLayoutRequest {
    pub image_png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotateLayoutResponse {
    pub layout_dsl: String,
}
