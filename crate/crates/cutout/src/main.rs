use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use cutout::synth::{generate, TileSynthConfig};
use cutout::TileSet;

/// Image cutout service over a tile set.
#[derive(Parser)]
#[command(name = "cutout", version)]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve a tile-set directory.
    Serve {
        #[arg(long)]
        tiles: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7200")]
        bind: SocketAddr,
    },
    /// Write a synthetic star-field tile set.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// TOML generator settings; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn synth(out: PathBuf, config: Option<PathBuf>, seed: Option<u64>) -> Result<(), String> {
    let mut cfg = match config {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            toml::from_str::<TileSynthConfig>(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => TileSynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let set = generate(&cfg).map_err(|e| e.to_string())?;
    set.save(&out).map_err(|e| e.to_string())?;
    println!("wrote {} tiles and {} objects to {}", set.tiles.len(), set.objects.len(), out.display());
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match Args::parse().cmd {
        Cmd::Synth { out, config, seed } => match synth(out, config, seed) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("cutout: {e}");
                ExitCode::from(2)
            }
        },
        Cmd::Serve { tiles, bind } => {
            let set = match TileSet::load(&tiles) {
                Ok(s) => Arc::new(s),
                Err(e) => {
                    eprintln!("cutout: {e}");
                    return ExitCode::from(2);
                }
            };
            let listener = match tokio::net::TcpListener::bind(bind).await {
                Ok(l) => l,
                Err(e) => {
                    eprintln!("cutout: cannot bind {bind}: {e}");
                    return ExitCode::from(2);
                }
            };
            let local = listener.local_addr().map(|a| a.to_string()).unwrap_or_default();
            tracing::info!("serving {} tiles on http://{local}", set.tiles.len());
            if let Err(e) = cutout::service::serve(listener, set).await {
                eprintln!("cutout: {e}");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
    }
}
