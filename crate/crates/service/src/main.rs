use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use boin_service::{router, AppState, Store};

#[derive(Debug, Parser)]
#[command(
    name = "boin-service",
    version,
    about = "Trial conduct service for optimal interval designs"
)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Append-only session event log.
    #[arg(long, default_value = "boin-sessions.jsonl")]
    data: PathBuf,
    /// Keep sessions in memory only.
    #[arg(long, conflicts_with = "data")]
    in_memory: bool,
    /// Bearer token required on every request.
    #[arg(long, env = "BOIN_SERVICE_TOKEN", hide_env_values = true)]
    token: Option<String>,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let store = if args.in_memory {
        Store::in_memory()
    } else {
        match Store::open(&args.data) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
    };
    tracing::info!(sessions = store.len(), addr = %args.addr, "starting");
    let app = router(AppState::new(store, args.token));
    let listener = match tokio::net::TcpListener::bind(args.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: binding {}: {e}", args.addr);
            return ExitCode::from(1);
        }
    };
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
