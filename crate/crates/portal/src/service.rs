//! `POST /skyquery`, mirroring the CLI.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use skynode::batch::encode_members;
use skyquery_core::table::ResultTable;
use tokio::net::TcpListener;

use crate::error::PortalError;
use crate::exec::{Mode, Portal};
use crate::plan::ExecutionPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkyQueryRequest {
    pub sql: String,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub cutout: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub ra: f64,
    pub dec: f64,
    pub scale: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkyQueryResponse {
    pub result: ResultTable,
    #[serde(default)]
    pub plan: Option<ExecutionPlan>,
    pub transfer_bytes: u64,
    /// `archive:key;…` of each result row.
    #[serde(default)]
    pub members: Vec<String>,
    /// Base64 binary graymap of the query area.
    #[serde(default)]
    pub image: Option<String>,
    #[serde(default)]
    pub image_meta: Option<ImageMeta>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Runs one request; a failed cutout becomes a warning.
pub async fn respond(portal: &Portal, req: &SkyQueryRequest) -> Result<SkyQueryResponse, PortalError> {
    let ast = portal.prepare(&req.sql)?;
    let (out, image) = if req.cutout {
        tokio::join!(portal.run_ast(&ast, req.mode), portal.cutout_for_area(&ast))
    } else {
        (portal.run_ast(&ast, req.mode).await, None)
    };
    let out = out?;
    let mut resp = SkyQueryResponse {
        result: out.result,
        plan: out.plan,
        transfer_bytes: out.transfer_bytes,
        members: out.members.iter().map(|m| encode_members(m)).collect(),
        image: None,
        image_meta: None,
        warnings: Vec::new(),
    };
    match image {
        Some(Ok(img)) => {
            resp.image = Some(base64::engine::general_purpose::STANDARD.encode(&img.p5));
            resp.image_meta = Some(ImageMeta { ra: img.ra, dec: img.dec, scale: img.scale, width: img.size, height: img.size });
        }
        Some(Err(e)) => resp.warnings.push(format!("cutout unavailable: {e}")),
        None if req.cutout => resp.warnings.push("no cutout service or no AREA in the query".into()),
        None => {}
    }
    Ok(resp)
}

async fn skyquery(State(portal): State<Arc<Portal>>, body: Bytes) -> Response {
    let req: SkyQueryRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return PortalError::Plan(format!("malformed request body: {e}")).into_response(),
    };
    match respond(&portal, &req).await {
        Ok(r) => Json(r).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn federation(State(portal): State<Arc<Portal>>) -> Response {
    Json(portal.config.clone()).into_response()
}

pub fn router(portal: Arc<Portal>) -> Router {
    Router::new()
        .route("/skyquery", post(skyquery))
        .route("/federation", get(federation))
        .layer(DefaultBodyLimit::max(1 << 20))
        .with_state(portal)
}

pub async fn serve(listener: TcpListener, portal: Arc<Portal>) -> std::io::Result<()> {
    axum::serve(listener, router(portal)).await
}

pub struct RunningPortal {
    pub url: String,
    pub addr: SocketAddr,
    pub handle: tokio::task::JoinHandle<()>,
}

impl Drop for RunningPortal {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

pub async fn spawn(portal: Arc<Portal>, addr: SocketAddr) -> std::io::Result<RunningPortal> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = serve(listener, portal).await {
            tracing::error!("portal server stopped: {e}");
        }
    });
    Ok(RunningPortal { url: format!("http://{addr}"), addr, handle })
}
