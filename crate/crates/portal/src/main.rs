use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use cutout::synth::TileSynthConfig;
use portal::demo::{self, SAMPLE_SQL};
use portal::service::{respond, SkyQueryRequest};
use portal::{FederationConfig, Mode, Portal, PortalError};
use skyquery_core::synth::SynthConfig;
use skyquery_core::table::ResultTable;

#[derive(Parser)]
#[command(name = "skyquery", about = "Federated cross-match queries over catalog nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a query given inline or as a file path.
    Query {
        query: String,
        #[arg(long, default_value = "data/federation.toml")]
        config: PathBuf,
        #[arg(long, default_value = "daisy")]
        mode: Mode,
        /// Print counts and the call order before executing.
        #[arg(long)]
        explain: bool,
        /// Write the result as CSV, or JSON when the path ends in `.json`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write a graymap of the query area from the cutout member.
        #[arg(long)]
        cutout: Option<PathBuf>,
    },
    /// List federation members with their /info summaries.
    Nodes {
        #[arg(long, default_value = "data/federation.toml")]
        config: PathBuf,
    },
    /// Serve POST /skyquery.
    Serve {
        #[arg(long, default_value = "data/federation.toml")]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7000")]
        bind: SocketAddr,
    },
    /// Launch the synthetic federation in-process and run the sample query.
    Demo {
        #[arg(long, default_value = "daisy")]
        mode: Mode,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        explain: bool,
    },
    /// Write the synthetic catalogs, node configs and tiles to a directory.
    Synth {
        #[arg(long, default_value = "data")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn read_query(q: &str) -> Result<String, PortalError> {
    let path = Path::new(q);
    if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| PortalError::Config(format!("{}: {e}", path.display())))
    } else {
        Ok(q.to_string())
    }
}

fn write_result(path: &Path, table: &ResultTable) -> Result<(), PortalError> {
    let text = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) { table.to_json() } else { table.to_csv() };
    std::fs::write(path, text).map_err(|e| PortalError::Config(format!("{}: {e}", path.display())))
}

async fn query(
    portal: &Portal,
    sql: &str,
    mode: Mode,
    explain: bool,
    output: Option<&Path>,
    cutout: Option<&Path>,
) -> Result<(), PortalError> {
    let ast = portal.prepare(sql)?;
    if explain && ast.xmatch.is_some() && mode == Mode::Daisy {
        let (plan, _) = portal.plan(&ast, None).await?;
        print!("{}", plan.explain());
    }
    let req = SkyQueryRequest { sql: sql.to_string(), mode, cutout: cutout.is_some() };
    let resp = respond(portal, &req).await?;
    print!("{}", resp.result.to_text());
    println!("{} rows, {} bytes transferred", resp.result.num_rows(), resp.transfer_bytes);
    for w in &resp.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = output {
        write_result(path, &resp.result)?;
    }
    if let (Some(path), Some(img)) = (cutout, &resp.image) {
        use base64::Engine;
        let bytes = base64::engine::general_purpose::STANDARD.decode(img).map_err(|e| PortalError::Internal(e.to_string()))?;
        std::fs::write(path, bytes).map_err(|e| PortalError::Config(format!("{}: {e}", path.display())))?;
        eprintln!("cutout written to {}", path.display());
    }
    Ok(())
}

async fn nodes(portal: &Portal) -> Result<(), PortalError> {
    let mut failed = None;
    for m in &portal.config.members {
        println!("{} [{:?}] {}", m.archive_name, m.kind, m.node_url);
        let summary = match m.kind {
            portal::MemberKind::Catalog => portal.client().info(&m.node_url).await.map(|t| t.to_text()).map_err(|e| e.to_string()),
            portal::MemberKind::Cutout => Ok(String::new()),
        };
        match summary {
            Ok(s) => print!("{s}"),
            Err(e) => {
                println!("  unreachable: {e}");
                failed = Some(PortalError::Config(e));
            }
        }
    }
    failed.map_or(Ok(()), Err)
}

async fn run(cli: Cli) -> Result<(), PortalError> {
    match cli.command {
        Command::Query { query: q, config, mode, explain, output, cutout } => {
            let portal = Portal::new(FederationConfig::load(&config)?);
            query(&portal, &read_query(&q)?, mode, explain, output.as_deref(), cutout.as_deref()).await
        }
        Command::Nodes { config } => nodes(&Portal::new(FederationConfig::load(&config)?)).await,
        Command::Serve { config, bind } => {
            let portal = Arc::new(Portal::new(FederationConfig::load(&config)?));
            let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| PortalError::Config(format!("{bind}: {e}")))?;
            eprintln!("portal listening on http://{}", listener.local_addr().map_err(|e| PortalError::Config(e.to_string()))?);
            portal::service::serve(listener, portal).await.map_err(|e| PortalError::Config(e.to_string()))
        }
        Command::Demo { mode, seed, explain } => {
            let mut synth = SynthConfig::default();
            let mut tiles = TileSynthConfig::default();
            if let Some(s) = seed {
                synth.seed = s;
                tiles.seed = s;
            }
            let fed = demo::launch(&synth, Some(&tiles), true).await.map_err(|e| PortalError::Config(e.to_string()))?;
            for m in &fed.config.members {
                eprintln!("{} at {}", m.archive_name, m.node_url);
            }
            println!("{SAMPLE_SQL}\n");
            let portal = Portal::new(fed.config.clone());
            query(&portal, SAMPLE_SQL, mode, explain, None, None).await
        }
        Command::Synth { out, seed } => {
            let mut synth = SynthConfig::default();
            let mut tiles = TileSynthConfig::default();
            if let Some(s) = seed {
                synth.seed = s;
                tiles.seed = s;
            }
            for p in demo::write_dataset(&out, &synth, &tiles).map_err(PortalError::Config)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match run(Cli::parse()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
