//! HTTP front end: training, scoring, diagnostics and homogenization over JSON.
//!
//! | Route | |
//! |---|---|
//! | `GET /health` | `{"status":"ok"}` |
//! | `GET /api/dataset` | current training CSV |
//! | `POST /api/dataset` | replace it, body is CSV, returns `{"rows":n}` |
//! | `POST /api/train` | `{model, config?, seed?, slot?}` returns test metrics |
//! | `POST /api/predict` | `{slot?, lattice_type, thickness, young_modulus, poisson_ratio, conductivity}` |
//! | `GET /api/diagnostics/{slot}` | chart data for a trained slot |
//! | `GET /api/leaderboard?seeds=0-19` | every model kind over the given split seeds |
//! | `GET /api/homogenize?topology=&thickness=&cell_size=&E=&nu=&k=` | solver result |
//!
//! Errors are `{"error": message, "kind": tag}` with a 4xx/5xx status.

pub mod api;
pub mod registry;

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::routing::{get, post};
use axum::Router;
use lattice_core::dataset::{embedded_dataset, Dataset};
use tower_http::services::ServeDir;

use crate::registry::Registry;

pub const DEFAULT_LISTEN_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_MODEL_DIR: &str = "models";

#[derive(Clone, Debug, PartialEq)]
pub struct ServiceConfig {
    pub listen_addr: SocketAddr,
    pub model_dir: PathBuf,
    /// Static files served under `/` when set.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen_addr: DEFAULT_LISTEN_ADDR.parse().expect("valid default address"),
            model_dir: PathBuf::from(DEFAULT_MODEL_DIR),
            static_dir: None,
        }
    }
}

impl ServiceConfig {
    /// Reads `LISTEN_ADDR`, `MODEL_DIR` and `STATIC_DIR`.
    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let mut config = ServiceConfig::default();
        if let Some(addr) = lookup("LISTEN_ADDR").filter(|s| !s.is_empty()) {
            config.listen_addr = addr.parse().map_err(|e| format!("LISTEN_ADDR '{addr}': {e}"))?;
        }
        if let Some(dir) = lookup("MODEL_DIR").filter(|s| !s.is_empty()) {
            config.model_dir = dir.into();
        }
        config.static_dir = lookup("STATIC_DIR").filter(|s| !s.is_empty()).map(PathBuf::from);
        Ok(config)
    }
}

#[derive(Debug)]
pub struct AppState {
    pub registry: Registry,
    dataset: RwLock<Arc<Dataset>>,
}

impl AppState {
    /// Opens the registry; starts from the embedded dataset.
    pub fn open(model_dir: &std::path::Path) -> io::Result<(Arc<Self>, Vec<String>)> {
        let (registry, warnings) = Registry::open(model_dir)?;
        let state = AppState { registry, dataset: RwLock::new(Arc::new(embedded_dataset())) };
        Ok((Arc::new(state), warnings))
    }

    pub fn dataset(&self) -> Arc<Dataset> {
        self.dataset.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn replace_dataset(&self, dataset: Dataset) {
        *self.dataset.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(dataset);
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<&std::path::Path>) -> Router {
    let api = Router::new()
        .route("/health", get(api::health))
        .route("/api/dataset", get(api::get_dataset).post(api::post_dataset))
        .route("/api/train", post(api::train))
        .route("/api/predict", post(api::predict))
        .route("/api/diagnostics/{slot}", get(api::diagnostics))
        .route("/api/leaderboard", get(api::leaderboard))
        .route("/api/homogenize", get(api::homogenize_endpoint))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds, reports the bound address through `on_ready`, and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig, on_ready: impl FnOnce(SocketAddr, &[String])) -> io::Result<()> {
    serve_until(config, on_ready, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

/// As [`serve`], stopping when `shutdown` resolves.
pub async fn serve_until(
    config: ServiceConfig,
    on_ready: impl FnOnce(SocketAddr, &[String]),
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    let (state, warnings) = AppState::open(&config.model_dir)?;
    let listener = tokio::net::TcpListener::bind(config.listen_addr).await?;
    on_ready(listener.local_addr()?, &warnings);
    let app = router(state, config.static_dir.as_deref());
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
