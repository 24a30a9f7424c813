//! HTTP/JSON clients for remote predictor, renderer, embedding and
//! annotation backends, and a stub server speaking the same protocol.
//!
//! Every endpoint is `POST <base>/v1/<name>` with a JSON body; any status
//! other than 200 means the backend is unavailable. 429 and 5xx responses
//! are retried with exponential backoff.

mod clients;
pub mod stub;
pub mod wire;

use std::time::Duration;

use base64::Engine as _;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub use clients::{RemoteActionAnnotator, RemoteEmbedder, RemoteLayoutAnnotator, RemotePredictor, RemoteRenderer};

pub const PREDICTOR_URL_ENV: &str = "UISIM_PREDICTOR_URL";
pub const RENDERER_URL_ENV: &str = "UISIM_RENDERER_URL";
pub const EMBEDDER_URL_ENV: &str = "UISIM_EMBEDDER_URL";
pub const ANNOTATOR_URL_ENV: &str = "UISIM_ANNOTATOR_URL";
/// Sent as a bearer token when set.
pub const TOKEN_ENV: &str = "UISIM_BACKEND_TOKEN";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_MAX_RETRIES: u32 = 3;
pub const DEFAULT_INITIAL_BACKOFF: Duration = Duration::from_millis(250);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndpointConfig {
    pub base_url: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub token: Option<String>,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            timeout: DEFAULT_TIMEOUT,
            max_retries: DEFAULT_MAX_RETRIES,
            initial_backoff: DEFAULT_INITIAL_BACKOFF,
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
        }
    }

    /// `None` when the variable is unset or empty.
    pub fn from_env(var: &str) -> Option<Self> {
        std::env::var(var).ok().filter(|v| !v.is_empty()).map(Self::new)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_retries(mut self, max_retries: u32, initial_backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.initial_backoff = initial_backoff;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CallError {
    #[error("{0}")]
    Unavailable(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    /// HTTP 422: the backend understood the request and declined it.
    #[error("{0}")]
    Rejected(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Endpoint {
    client: reqwest::Client,
    config: EndpointConfig,
}

impl Endpoint {
    pub(crate) fn new(config: EndpointConfig) -> Self {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .expect("HTTP client builds");
        Endpoint { client, config }
    }

    pub(crate) fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub(crate) async fn call<Req: Serialize + ?Sized, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, CallError> {
        let url = format!("{}{path}", self.config.base_url);
        let mut attempt = 0;
        loop {
            let mut req = self.client.post(&url).json(body);
            if let Some(token) = &self.config.token {
                req = req.bearer_auth(token);
            }
            let resp = req
                .send()
                .await
                .map_err(|e| CallError::Unavailable(format!("POST {url}: {e}")))?;
            let status = resp.status();
            if status == reqwest::StatusCode::OK {
                let bytes = resp
                    .bytes()
                    .await
                    .map_err(|e| CallError::Unavailable(format!("POST {url}: {e}")))?;
                return serde_json::from_slice(&bytes).map_err(|e| CallError::Malformed(format!("POST {url}: {e}")));
            }
            let retryable = status == reqwest::StatusCode::TOO_MANY_REQUESTS || status.is_server_error();
            if retryable && attempt < self.config.max_retries {
                let delay = self.config.initial_backoff * 2u32.saturating_pow(attempt);
                tracing::debug!(%url, %status, attempt, "retrying after {delay:?}");
                tokio::time::sleep(delay).await;
                attempt += 1;
                continue;
            }
            let text = resp.text().await.unwrap_or_default();
            let snippet: String = text.chars().take(200).collect();
            let message = format!("POST {url}: HTTP {status}: {snippet}");
            return Err(if status == reqwest::StatusCode::UNPROCESSABLE_ENTITY {
                CallError::Rejected(message)
            } else {
                CallError::Unavailable(message)
            });
        }
    }

    /// `GET <base>/healthz`; `Err` carries the reason it is unreachable.
    pub(crate) async fn probe(&self) -> Result<(), String> {
        let url = format!("{}/healthz", self.config.base_url);
        let timeout = self.config.timeout.min(Duration::from_secs(5));
        match self.client.get(&url).timeout(timeout).send().await {
            Ok(r) if r.status().is_success() => Ok(()),
            Ok(r) => Err(format!("GET {url}: HTTP {}", r.status())),
            Err(e) => Err(format!("GET {url}: {e}")),
        }
    }
}

pub fn encode_base64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub fn decode_base64(text: &str) -> Result<Vec<u8>, String> {
    base64::engine::general_purpose::STANDARD
        .decode(text.trim())
        .map_err(|e| e.to_string())
}
