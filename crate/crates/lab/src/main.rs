//! `cellulat-lab`: runs the session service configured from the environment.

use std::process::ExitCode;

use cellulat_lab::{serve, AppState, Config};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();

    let config = match Config::from_env() {
        Ok(c) => c,
        Err(e) => {
            tracing::error!("{e}");
            return ExitCode::from(2);
        }
    };
    let state = match AppState::new(&config) {
        Ok(s) => s,
        Err(e) => {
            tracing::error!(dir = ?config.model_dir, "cannot read model directory: {e}");
            return ExitCode::from(1);
        }
    };
    let listener = match tokio::net::TcpListener::bind(config.addr).await {
        Ok(l) => l,
        Err(e) => {
            tracing::error!(addr = %config.addr, "cannot bind: {e}");
            return ExitCode::from(1);
        }
    };
    tracing::info!(addr = %config.addr, models = state.models.ids().len(), "listening");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    };
    match serve(listener, state, config.gc_interval, shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            tracing::error!("server error: {e}");
            ExitCode::from(1)
        }
    }
}
