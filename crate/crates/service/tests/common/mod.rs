#![allow(dead_code)]

use std::path::Path;

use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use uisim_core::engine::AppGraph;
use uisim_core::layout::ScreenLayout;
use uisim_core::raster::{self, Image, Theme};
use uisim_remote::stub::{StubConfig, StubServer};
use uisim_service::api::{serve_on, AppState};
use uisim_service::config::{PredictorSpec, RendererSpec, ServiceConfig};

pub const W: u32 = 108;
pub const H: u32 = 240;

pub fn graph_screen(id: &str) -> ScreenLayout {
    AppGraph::demo().screen(id).unwrap().clone()
}

pub fn screen_image(id: &str) -> Image {
    raster::render(&graph_screen(id), &Theme::light(), W, H).unwrap()
}

pub fn screen_png(id: &str) -> Vec<u8> {
    screen_image(id).encode_png()
}

/// Service config pointing both stages at the stub.
pub fn stub_config(stub: &StubServer, store: &Path) -> ServiceConfig {
    ServiceConfig {
        store_dir: store.to_path_buf(),
        predictor: PredictorSpec::Remote(stub.url()),
        renderer: RendererSpec::Remote(stub.url()),
        width: W,
        height: H,
        ..ServiceConfig::default()
    }
}

pub async fn start_stub() -> StubServer {
    StubServer::start(StubConfig::demo()).await.unwrap()
}

pub struct Service {
    pub url: String,
    shutdown: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<()>>,
}

impl Service {
    pub async fn start(config: &ServiceConfig) -> Service {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let state = AppState::from_config(config).unwrap();
        let (tx, rx) = oneshot::channel::<()>();
        let origins = config.cors_origins.clone();
        let handle = tokio::spawn(async move {
            serve_on(listener, state, &origins, async {
                let _ = rx.await;
            })
            .await
            .unwrap();
        });
        Service {
            url,
            shutdown: Some(tx),
            handle: Some(handle),
        }
    }

    /// Graceful shutdown; returns once the server task has finished.
    pub async fn stop(mut self) {
        let _ = self.shutdown.take().unwrap().send(());
        self.handle.take().unwrap().await.unwrap();
    }
}
