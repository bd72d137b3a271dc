//! The virtual-lab session service.
//!
//! A JSON-over-HTTP API for loading models, running simulation sessions,
//! steering them with stimuli and lesions, forking what-if branches and
//! following their writes live over server-sent events. `docs/api.md` in the
//! repository is the reference for every endpoint.

pub mod error;
pub mod models;
pub mod routes;
pub mod sessions;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::routing::{get, post};
use axum::Router;

use models::ModelStore;
use sessions::{GcPolicy, SessionRegistry};

pub const DEFAULT_ADDR: &str = "127.0.0.1:7878";
pub const DEFAULT_EVENT_BUFFER: usize = 4096;

#[derive(Debug, Clone)]
pub struct Config {
    pub addr: SocketAddr,
    pub model_dir: Option<PathBuf>,
    pub trace_dir: Option<PathBuf>,
    /// Per-subscriber event buffer, in messages.
    pub event_buffer: usize,
    pub gc: GcPolicy,
    pub gc_interval: Duration,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            addr: DEFAULT_ADDR.parse().expect("valid default address"),
            model_dir: None,
            trace_dir: None,
            event_buffer: DEFAULT_EVENT_BUFFER,
            gc: GcPolicy::default(),
            gc_interval: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("environment variable {name}: {reason}")]
pub struct ConfigError {
    pub name: &'static str,
    pub reason: String,
}

impl Config {
    /// Reads `CELLULAT_ADDR`, `CELLULAT_MODEL_DIR`, `CELLULAT_TRACE_DIR`,
    /// `CELLULAT_EVENT_BUFFER`, `CELLULAT_SESSION_MAX_IDLE_SECS` and
    /// `CELLULAT_MAX_SESSIONS` through `var`.
    pub fn from_vars(var: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        fn parsed<T: std::str::FromStr>(name: &'static str, v: Option<String>) -> Result<Option<T>, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            v.map(|s| {
                s.parse::<T>().map_err(|e| ConfigError {
                    name,
                    reason: e.to_string(),
                })
            })
            .transpose()
        }
        let mut c = Config::default();
        if let Some(addr) = parsed("CELLULAT_ADDR", var("CELLULAT_ADDR"))? {
            c.addr = addr;
        }
        c.model_dir = var("CELLULAT_MODEL_DIR").map(PathBuf::from);
        c.trace_dir = var("CELLULAT_TRACE_DIR").map(PathBuf::from);
        if let Some(n) = parsed("CELLULAT_EVENT_BUFFER", var("CELLULAT_EVENT_BUFFER"))? {
            c.event_buffer = n;
        }
        c.gc.max_idle = parsed::<u64>("CELLULAT_SESSION_MAX_IDLE_SECS", var("CELLULAT_SESSION_MAX_IDLE_SECS"))?
            .map(Duration::from_secs);
        c.gc.max_sessions = parsed("CELLULAT_MAX_SESSIONS", var("CELLULAT_MAX_SESSIONS"))?;
        Ok(c)
    }

    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_vars(|k| std::env::var(k).ok())
    }
}

#[derive(Debug)]
pub struct Inner {
    pub models: ModelStore,
    pub sessions: SessionRegistry,
    pub gc: GcPolicy,
}

/// Shared service state, cheap to clone into handlers.
#[derive(Debug, Clone)]
pub struct AppState(Arc<Inner>);

impl std::ops::Deref for AppState {
    type Target = Inner;

    fn deref(&self) -> &Inner {
        &self.0
    }
}

impl AppState {
    /// Bundled scenarios plus the models in `config.model_dir`.
    pub fn new(config: &Config) -> std::io::Result<Self> {
        let models = ModelStore::with_bundled();
        if let Some(dir) = &config.model_dir {
            models.load_dir(dir)?;
        }
        Ok(AppState(Arc::new(Inner {
            models,
            sessions: SessionRegistry::new(config.event_buffer, config.trace_dir.clone()),
            gc: config.gc,
        })))
    }

    pub fn collect_garbage(&self) -> usize {
        let n = self.sessions.gc(self.gc, Instant::now());
        if n > 0 {
            tracing::info!(reclaimed = n, "sessions reclaimed");
        }
        n
    }

    /// Makes room before a new session when a session limit is set.
    pub(crate) fn collect_if_full(&self) {
        if let Some(max) = self.gc.max_sessions {
            if self.sessions.len() >= max {
                let policy = GcPolicy {
                    max_sessions: Some(max.saturating_sub(1)),
                    ..self.gc
                };
                self.sessions.gc(policy, Instant::now());
            }
        }
    }
}

pub fn router(state: AppState) -> Router {
    use routes::*;
    Router::new()
        .route("/health", get(health))
        .route("/models", post(create_model).get(list_models))
        .route("/models/{id}", get(get_model))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/stimuli", post(add_stimulus))
        .route("/sessions/{id}/lesions", post(add_lesion))
        .route("/sessions/{id}/fork", post(fork))
        .route("/sessions/{id}/end", post(end))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/trace", get(get_trace))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

/// Serves until `shutdown` resolves, collecting sessions periodically when a
/// reclamation limit is configured.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    gc_interval: Duration,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if state.gc.max_idle.is_some() || state.gc.max_sessions.is_some() {
        let gc_state = state.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(gc_interval);
            loop {
                tick.tick().await;
                gc_state.collect_garbage();
            }
        });
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
