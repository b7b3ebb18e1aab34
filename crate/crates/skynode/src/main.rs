use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use skynode::{NodeConfig, NodeState};

/// Serve one catalog archive.
#[derive(Parser)]
#[command(name = "skynode", version)]
struct Args {
    /// Node configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured bind address.
    #[arg(long)]
    bind: Option<SocketAddr>,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let args = Args::parse();
    let cfg = match NodeConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("skynode: {e}");
            return ExitCode::from(2);
        }
    };
    let catalog = match cfg.load_catalog() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("skynode: {e}");
            return ExitCode::from(2);
        }
    };
    let addr = args.bind.unwrap_or(cfg.bind);
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("skynode: cannot bind {addr}: {e}");
            return ExitCode::from(2);
        }
    };
    let local = listener.local_addr().map(|a| a.to_string()).unwrap_or_default();
    tracing::info!(archive = %cfg.archive, "listening on http://{local}");
    let state = Arc::new(NodeState::new(catalog, cfg.stats, cfg.timeout()));
    if let Err(e) = skynode::service::serve(listener, state).await {
        eprintln!("skynode: {e}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
