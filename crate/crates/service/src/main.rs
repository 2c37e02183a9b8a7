use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use nonword_service::{router, AppState, Config};
use tracing_subscriber::EnvFilter;

const USAGE: &str =
    "usage: nonword-server [CONFIG.toml]\n\nServes /api/v1 on the configured bind address.\nLog level comes from RUST_LOG (default info).";

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt().with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info"))).init();

    let args: Vec<String> = std::env::args().skip(1).collect();
    let config = match args.as_slice() {
        [] => Ok(Config::parse("").expect("empty config parses")),
        [flag] if flag == "-h" || flag == "--help" => {
            println!("{USAGE}");
            return ExitCode::SUCCESS;
        }
        [flag] if flag == "--version" => {
            println!("nonword-server {}", env!("CARGO_PKG_VERSION"));
            return ExitCode::SUCCESS;
        }
        [path] => Config::load(&PathBuf::from(path)),
        _ => {
            eprintln!("{USAGE}");
            return ExitCode::from(1);
        }
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("nonword-server: {e}");
            return ExitCode::from(2);
        }
    };
    let state = match AppState::from_config(&config) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("nonword-server: {e}");
            return ExitCode::from(2);
        }
    };
    tracing::info!(models = ?state.models.keys().collect::<Vec<_>>(), lexicon = state.lexicon.len(), "loaded");

    let listener = match tokio::net::TcpListener::bind(&config.bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("nonword-server: bind {}: {e}", config.bind);
            return ExitCode::from(2);
        }
    };
    tracing::info!("listening on {}", config.bind);
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await {
        eprintln!("nonword-server: {e}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
