//! HTTP job service for sampling, scan and Lyapunov runs.
//!
//! Jobs are persisted one directory each under `<data_dir>/jobs/` and run
//! in submission order; jobs interrupted by a restart are run again.

pub mod api;
pub mod error;
pub mod request;
pub mod runner;
pub mod store;

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use api::{router, AppState};
pub use error::ApiError;
pub use request::{JobKind, JobRequest};
pub use store::{Job, JobStatus, JobStore};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    pub workers: usize,
}

/// Loads the store, resubmits interrupted jobs and starts the runner.
pub fn open_state(data_dir: impl Into<PathBuf>, workers: usize) -> io::Result<AppState> {
    let data_dir = data_dir.into();
    if workers == 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "workers must be at least 1"));
    }
    let (store, pending) = JobStore::open(&data_dir).map_err(|e| {
        io::Error::new(e.kind(), format!("data directory {}: {e}", data_dir.display()))
    })?;
    let store = Arc::new(store);
    let runner = runner::Runner::start(store.clone(), workers);
    for id in pending {
        runner.submit(id);
    }
    Ok(AppState { store, runner })
}

/// Serves until `shutdown` resolves.
pub async fn serve<F>(cfg: ServiceConfig, shutdown: F) -> io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    let state = open_state(&cfg.data_dir, cfg.workers)?;
    let addr = SocketAddr::from(([127, 0, 0, 1], cfg.port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| io::Error::new(e.kind(), format!("binding {addr}: {e}")))?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
