//! HTTP/JSON service over datasets and exploration sessions.
//!
//! Datasets and sessions live in memory. Sessions carry a version number
//! that every mutation bumps; mutating requests may name the version they
//! were made against and are refused with 409 if it is stale.

mod error;
mod handlers;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{delete, get, post, put};
use axum::Router;
use corand::{Dataset, Session};
use parking_lot::RwLock;

pub use error::{ApiError, ApiResult};
pub use handlers::{DatasetInfo, SessionInfo, ViewPayload};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Largest accepted upload, in bytes.
    pub max_upload_bytes: usize,
    /// Views and samples of larger datasets are downsampled to this many rows.
    pub max_points: usize,
    /// Directory for session snapshots written after every mutation.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_upload_bytes: 64 * 1024 * 1024,
            max_points: 20_000,
            snapshot_dir: None,
        }
    }
}

#[derive(Default)]
struct Store {
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
    sessions: RwLock<HashMap<String, Arc<RwLock<Session>>>>,
}

#[derive(Clone)]
pub struct AppState {
    config: Arc<ServiceConfig>,
    store: Arc<Store>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            config: Arc::new(config),
            store: Arc::default(),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// Registers a dataset directly, bypassing upload.
    pub fn insert_dataset(&self, dataset: Dataset) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.store.datasets.write().insert(id.clone(), Arc::new(dataset));
        id
    }

    fn dataset(&self, id: &str) -> ApiResult<Arc<Dataset>> {
        self.store
            .datasets
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("dataset", id))
    }

    fn session(&self, id: &str) -> ApiResult<Arc<RwLock<Session>>> {
        self.store
            .sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    fn persist(&self, session: &Session) {
        let Some(dir) = &self.config.snapshot_dir else {
            return;
        };
        let path = dir.join(format!("{}.json", session.id()));
        let result = std::fs::create_dir_all(dir).and_then(|_| {
            let json = serde_json::to_vec_pretty(&session.snapshot()).map_err(std::io::Error::other)?;
            std::fs::write(&path, json)
        });
        if let Err(e) = result {
            tracing::warn!("could not write snapshot {}: {e}", path.display());
        }
    }
}

pub fn router(state: AppState) -> Router {
    let limit = state.config.max_upload_bytes;
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/datasets", post(handlers::upload_dataset))
        .route("/sessions", post(handlers::create_session))
        .route("/sessions/{id}", get(handlers::get_session))
        .route("/sessions/{id}/view", get(handlers::get_view))
        .route("/sessions/{id}/hypothesis", put(handlers::put_hypothesis))
        .route("/sessions/{id}/suggest", post(handlers::suggest))
        .route("/sessions/{id}/tiles", post(handlers::post_tile))
        .route("/sessions/{id}/tiles/last", delete(handlers::delete_last_tile))
        .route("/sessions/{id}/pcp", get(handlers::get_pcp))
        .route("/sessions/{id}/sample", get(handlers::get_sample))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(config))).await
}
