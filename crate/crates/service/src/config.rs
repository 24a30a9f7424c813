//! Service configuration. Precedence, highest first: command-line flags,
//! environment variables, TOML file, built-in defaults.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use uisim_core::engine::{AppGraph, BuiltinRenderer, LayoutPredictor, RuleBasedPredictor, ScreenRenderer, TransitionEngine};
use uisim_core::raster::{self, Theme};
use uisim_remote::{EndpointConfig, RemotePredictor, RemoteRenderer};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {message}")]
    File { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Where stage-1 predictions come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PredictorSpec {
    /// The bundled demo graph.
    DemoGraph,
    GraphFile(PathBuf),
    Remote(String),
}

impl std::str::FromStr for PredictorSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("rule", "demo")) => Ok(PredictorSpec::DemoGraph),
            Some(("rule", path)) if !path.is_empty() => Ok(PredictorSpec::GraphFile(path.into())),
            Some(("remote", url)) if !url.is_empty() => Ok(PredictorSpec::Remote(url.into())),
            _ => Err(format!("predictor `{s}` is not rule:demo, rule:<graph file> or remote:<url>")),
        }
    }
}

impl TryFrom<String> for PredictorSpec {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PredictorSpec> for String {
    fn from(p: PredictorSpec) -> String {
        match p {
            PredictorSpec::DemoGraph => "rule:demo".into(),
            PredictorSpec::GraphFile(path) => format!("rule:{}", path.display()),
            PredictorSpec::Remote(url) => format!("remote:{url}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RendererSpec {
    Builtin,
    Remote(String),
}

impl std::str::FromStr for RendererSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "builtin" => Ok(RendererSpec::Builtin),
            Some(("remote", url)) if !url.is_empty() => Ok(RendererSpec::Remote(url.into())),
            _ => Err(format!("renderer `{s}` is not builtin or remote:<url>")),
        }
    }
}

impl TryFrom<String> for RendererSpec {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<RendererSpec> for String {
    fn from(r: RendererSpec) -> String {
        match r {
            RendererSpec::Builtin => "builtin".into(),
            RendererSpec::Remote(url) => format!("remote:{url}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub port: u16,
    pub store_dir: PathBuf,
    pub predictor: PredictorSpec,
    pub renderer: RendererSpec,
    pub embedder_url: Option<String>,
    pub theme: String,
    pub width: u32,
    pub height: u32,
    pub predict_timeout_secs: f64,
    pub render_timeout_secs: f64,
    pub max_sessions: usize,
    /// `["*"]` allows any origin.
    pub cors_origins: Vec<String>,
    pub pass_prior_layout: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1".into(),
            port: 8080,
            store_dir: "./uisim-store".into(),
            predictor: PredictorSpec::DemoGraph,
            renderer: RendererSpec::Builtin,
            embedder_url: None,
            theme: "light".into(),
            width: raster::DEFAULT_WIDTH,
            height: raster::DEFAULT_HEIGHT,
            predict_timeout_secs: 60.0,
            render_timeout_secs: 60.0,
            max_sessions: 1024,
            cors_origins: vec!["*".into()],
            pass_prior_layout: false,
        }
    }
}

/// Values given on the command line; `None` leaves lower layers in effect.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub listen: Option<String>,
    pub port: Option<u16>,
    pub store_dir: Option<PathBuf>,
    pub predictor: Option<PredictorSpec>,
    pub renderer: Option<RendererSpec>,
    pub embedder_url: Option<String>,
    pub theme: Option<String>,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub timeout_secs: Option<f64>,
    pub max_sessions: Option<usize>,
    pub cors_origins: Option<Vec<String>>,
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Layers file, environment (read through `env`) and overrides over the
    /// defaults, then validates.
    pub fn resolve(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
        overrides: &ConfigOverrides,
    ) -> Result<Self, ConfigError> {
        let mut c = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                Self::from_toml(&text).map_err(|e| ConfigError::File {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?
            }
            None => ServiceConfig::default(),
        };
        let env = |k: &str| env(k).filter(|v| !v.is_empty());
        if let Some(v) = env("UISIM_LISTEN") {
            c.listen = v;
        }
        if let Some(v) = env("UISIM_PORT") {
            c.port = v.parse().map_err(|_| ConfigError::Invalid(format!("UISIM_PORT `{v}`")))?;
        }
        if let Some(v) = env(uisim_core::session::STORE_DIR_ENV) {
            c.store_dir = v.into();
        }
        if let Some(v) = env(uisim_remote::PREDICTOR_URL_ENV) {
            c.predictor = PredictorSpec::Remote(v);
        }
        if let Some(v) = env(uisim_remote::RENDERER_URL_ENV) {
            c.renderer = RendererSpec::Remote(v);
        }
        if let Some(v) = env(uisim_remote::EMBEDDER_URL_ENV) {
            c.embedder_url = Some(v);
        }
        let o = overrides.clone();
        if let Some(v) = o.listen {
            c.listen = v;
        }
        if let Some(v) = o.port {
            c.port = v;
        }
        if let Some(v) = o.store_dir {
            c.store_dir = v;
        }
        if let Some(v) = o.predictor {
            c.predictor = v;
        }
        if let Some(v) = o.renderer {
            c.renderer = v;
        }
        if let Some(v) = o.embedder_url {
            c.embedder_url = Some(v);
        }
        if let Some(v) = o.theme {
            c.theme = v;
        }
        if let Some(v) = o.width {
            c.width = v;
        }
        if let Some(v) = o.height {
            c.height = v;
        }
        if let Some(v) = o.timeout_secs {
            c.predict_timeout_secs = v;
            c.render_timeout_secs = v;
        }
        if let Some(v) = o.max_sessions {
            c.max_sessions = v;
        }
        if let Some(v) = o.cors_origins {
            c.cors_origins = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.port == 0 {
            return bad("port must be in 1..=65535".into());
        }
        for (name, t) in [
            ("predict_timeout_secs", self.predict_timeout_secs),
            ("render_timeout_secs", self.render_timeout_secs),
        ] {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("{name} must be positive, got {t}"));
            }
        }
        raster::check_resolution(self.width, self.height).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.theme()?;
        if self.max_sessions == 0 {
            return bad("max_sessions must be positive".into());
        }
        Ok(())
    }

    pub fn theme(&self) -> Result<Theme, ConfigError> {
        Theme::by_name(&self.theme).ok_or_else(|| ConfigError::Invalid(format!("unknown theme `{}`", self.theme)))
    }

    pub fn predictor(&self) -> Result<Arc<dyn LayoutPredictor>, ConfigError> {
        Ok(match &self.predictor {
            PredictorSpec::DemoGraph => Arc::new(RuleBasedPredictor::new(Arc::new(AppGraph::demo()), self.theme()?)),
            PredictorSpec::GraphFile(path) => {
                let graph = AppGraph::load(path).map_err(|e| ConfigError::File {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                Arc::new(RuleBasedPredictor::new(Arc::new(graph), self.theme()?))
            }
            PredictorSpec::Remote(url) => Arc::new(RemotePredictor::new(
                EndpointConfig::new(url).with_timeout(Duration::from_secs_f64(self.predict_timeout_secs)),
            )),
        })
    }

    pub fn renderer(&self) -> Result<Arc<dyn ScreenRenderer>, ConfigError> {
        let invalid = |e: raster::RenderError| ConfigError::Invalid(e.to_string());
        Ok(match &self.renderer {
            RendererSpec::Builtin => Arc::new(BuiltinRenderer::new(self.theme()?, self.width, self.height).map_err(invalid)?),
            RendererSpec::Remote(url) => Arc::new(
                RemoteRenderer::new(
                    EndpointConfig::new(url).with_timeout(Duration::from_secs_f64(self.render_timeout_secs)),
                    self.width,
                    self.height,
                )
                .map_err(invalid)?,
            ),
        })
    }

    pub fn engine(&self) -> Result<TransitionEngine, ConfigError> {
        Ok(TransitionEngine::new(self.predictor()?, self.renderer()?).with_prior_layout(self.pass_prior_layout))
    }
}
