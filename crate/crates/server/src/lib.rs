//! HTTP front end for a TSDS cache.
//!
//! * `GET /tsdb/{file}.bin?[start:stop]` streams raw little-endian doubles
//!   (Mode 1); without a range it streams the whole file. `{file}.ncml` returns
//!   the series metadata.
//! * `GET /tsds/{dataset}.{suffix}?{constraint}` runs a query and encodes the
//!   result (Mode 2). `/tsds/{file}-v{n}.bin?[start:stop]` is accepted as an
//!   alias for the Mode 1 range form.
//! * `GET /tsds/catalog.json` lists the served datasets.
//!
//! Errors are JSON bodies carrying a machine-readable name and, for
//! constraint errors, the character position of the fault.

pub mod cformat;
pub mod encode;
mod error;
mod mode1;
mod mode2;

use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::extract::Request;
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tsds_core::metadata::{scan_catalog, MetadataError};
use tsds_core::Catalog;

pub use error::{ApiError, ErrorBody};
pub use mode1::{parse_index_range, IndexRange};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Directory scanned for `*.ncml` dataset documents.
    pub catalog_dir: PathBuf,
    /// Directory Mode 1 serves `.bin` and `.ncml` files from.
    pub tsdb_dir: PathBuf,
    /// Largest Mode 1 range, in elements, a single request may ask for.
    pub max_range_elements: u64,
}

impl ServerConfig {
    pub fn new(catalog_dir: impl Into<PathBuf>, tsdb_dir: impl Into<PathBuf>) -> Self {
        ServerConfig {
            catalog_dir: catalog_dir.into(),
            tsdb_dir: tsdb_dir.into(),
            max_range_elements: 1 << 31,
        }
    }
}

/// Shared by every handler. The catalog is swapped whole on reload, so a
/// request always sees one consistent snapshot.
#[derive(Debug)]
pub struct AppState {
    pub config: ServerConfig,
    catalog: RwLock<Arc<Catalog>>,
}

impl AppState {
    pub fn load(config: ServerConfig) -> Result<Self, MetadataError> {
        let catalog = scan_catalog(&config.catalog_dir)?;
        log_catalog(&catalog);
        Ok(AppState {
            config,
            catalog: RwLock::new(Arc::new(catalog)),
        })
    }

    pub fn catalog(&self) -> Arc<Catalog> {
        self.catalog.read().expect("catalog lock poisoned").clone()
    }

    /// Rescans the catalog directory; on failure the old catalog stays.
    pub fn reload(&self) -> Result<usize, MetadataError> {
        let catalog = scan_catalog(&self.config.catalog_dir)?;
        log_catalog(&catalog);
        let n = catalog.len();
        *self.catalog.write().expect("catalog lock poisoned") = Arc::new(catalog);
        Ok(n)
    }
}

fn log_catalog(catalog: &Catalog) {
    tracing::info!(datasets = catalog.len(), quarantined = catalog.quarantined().len(), "catalog loaded");
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/tsdb/{file}", get(mode1::handle))
        .route("/tsds/{name}", get(mode2::handle))
        .layer(middleware::from_fn(log_request))
        .with_state(state)
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let uri = req.uri().clone();
    let started = Instant::now();
    let response = next.run(req).await;
    tracing::info!(
        %method,
        path = %uri,
        status = response.status().as_u16(),
        ms = format_args!("{:.1}", started.elapsed().as_secs_f64() * 1e3),
        "request"
    );
    response
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn serve(
    listener: TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Rescans the catalog each time the process receives SIGHUP.
#[cfg(unix)]
pub fn reload_on_sighup(state: Arc<AppState>) -> std::io::Result<()> {
    use tokio::signal::unix::{signal, SignalKind};
    let mut hup = signal(SignalKind::hangup())?;
    tokio::spawn(async move {
        while hup.recv().await.is_some() {
            match state.reload() {
                Ok(n) => tracing::info!(datasets = n, "catalog reloaded"),
                Err(e) => tracing::error!(error = %e, "catalog reload failed; keeping the old one"),
            }
        }
    });
    Ok(())
}
