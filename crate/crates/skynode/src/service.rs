use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use skyquery_core::catalog::Catalog;
use tokio::net::TcpListener;

use crate::chain::{run_step, validate_request};
use crate::client::NodeClient;
use crate::error::NodeError;
use crate::plan::{QueryRequest, XMatchRequest, CHAIN_BYTES_HEADER};
use crate::stats::{StatsEntry, StatsLog};

pub struct NodeState {
    pub catalog: Catalog,
    /// Present when transfer accounting is enabled.
    pub stats: Option<Arc<StatsLog>>,
    pub client: NodeClient,
}

impl NodeState {
    pub fn new(catalog: Catalog, stats: bool, timeout: Duration) -> Self {
        Self { catalog, stats: stats.then(Default::default), client: NodeClient::new(timeout) }
    }

    fn log(&self, plan_id: Option<String>, endpoint: &str, request_bytes: usize, response_bytes: usize) {
        if let Some(s) = &self.stats {
            s.record(StatsEntry {
                plan_id,
                endpoint: endpoint.into(),
                request_bytes: request_bytes as u64,
                response_bytes: response_bytes as u64,
            });
        }
    }
}

type Shared = Arc<NodeState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/info", get(info))
        .route("/schema", get(schema))
        .route("/tables", get(tables))
        .route("/columns", get(columns))
        .route("/functions", get(functions))
        .route("/docsearch", get(docsearch))
        .route("/query", post(query))
        .route("/xmatch", post(xmatch))
        .route("/stats", get(stats))
        .layer(DefaultBodyLimit::max(1 << 30))
        .with_state(state)
}

fn param<'a>(q: &'a HashMap<String, String>, name: &str) -> Result<&'a str, NodeError> {
    q.get(name)
        .map(String::as_str)
        .ok_or_else(|| NodeError::bad_request("missing_parameter", format!("query parameter '{name}' is required")))
}

async fn info(State(s): State<Shared>) -> impl IntoResponse {
    Json(s.catalog.info())
}

async fn schema(State(s): State<Shared>) -> impl IntoResponse {
    Json(s.catalog.schema_document())
}

async fn tables(State(s): State<Shared>) -> impl IntoResponse {
    Json(s.catalog.tables_doc())
}

async fn columns(State(s): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Result<Response, NodeError> {
    Ok(Json(s.catalog.columns_doc(param(&q, "table")?)?).into_response())
}

async fn functions(State(s): State<Shared>) -> impl IntoResponse {
    Json(s.catalog.functions_doc())
}

async fn docsearch(State(s): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Result<Response, NodeError> {
    Ok(Json(s.catalog.docsearch(param(&q, "key")?)).into_response())
}

async fn stats(State(s): State<Shared>) -> Result<Response, NodeError> {
    match &s.stats {
        Some(log) => Ok(Json(log.entries()).into_response()),
        None => Err(NodeError::not_found("stats_disabled", "transfer accounting is not enabled on this node")),
    }
}

fn json_response(status: StatusCode, body: Vec<u8>) -> Response {
    let mut r = (status, body).into_response();
    r.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    r
}

fn encode<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("response documents serialize")
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, NodeError> {
    serde_json::from_slice(body).map_err(|e| NodeError::bad_request("bad_request", format!("malformed request body: {e}")))
}

async fn query(State(s): State<Shared>, body: Bytes) -> Response {
    let req = parse_body::<QueryRequest>(&body);
    let plan_id = req.as_ref().ok().and_then(|r| r.plan_id.clone());
    let state = s.clone();
    let result = match req {
        Ok(r) => tokio::task::spawn_blocking(move || state.catalog.query_sql(&r.sql).map_err(NodeError::from))
            .await
            .unwrap_or_else(|e| Err(NodeError::internal(e.to_string()))),
        Err(e) => Err(e),
    };
    let (status, out) = match result {
        Ok(t) => (StatusCode::OK, encode(&t)),
        Err(e) => (StatusCode::from_u16(e.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR), encode(&e.body())),
    };
    s.log(plan_id, "/query", body.len(), out.len());
    json_response(status, out)
}

async fn xmatch_inner(s: &Shared, req: XMatchRequest) -> Result<(Vec<u8>, u64), NodeError> {
    validate_request(&req)?;
    let here = req.plan[0].node_url.clone();
    let (incoming, downstream_bytes) = match req.downstream() {
        Some(next) => {
            let url = next.plan[0].node_url.clone();
            let reply = s.client.xmatch(&url, &next).await.map_err(|e| e.at(&url))?;
            (Some(reply.batch), reply.chain_bytes)
        }
        None => (None, 0),
    };
    let state = s.clone();
    let batch = tokio::task::spawn_blocking(move || run_step(&state.catalog, &req, incoming))
        .await
        .map_err(|e| NodeError::internal(e.to_string()))?
        .map_err(|e| e.at(&here))?;
    Ok((batch.to_table().to_json().into_bytes(), downstream_bytes))
}

async fn xmatch(State(s): State<Shared>, body: Bytes) -> Response {
    let req = parse_body::<XMatchRequest>(&body);
    let plan_id = req.as_ref().ok().and_then(|r| r.plan_id.clone());
    let (status, out, downstream) = match req {
        Ok(r) => match xmatch_inner(&s, r).await {
            Ok((bytes, d)) => (StatusCode::OK, bytes, d),
            Err(e) => (StatusCode::from_u16(e.status).unwrap_or(StatusCode::BAD_GATEWAY), encode(&e.body()), 0),
        },
        Err(e) => (StatusCode::BAD_REQUEST, encode(&e.body()), 0),
    };
    s.log(plan_id, "/xmatch", body.len(), out.len());
    let chain = body.len() as u64 + out.len() as u64 + downstream;
    let mut resp = json_response(status, out);
    resp.headers_mut().insert(CHAIN_BYTES_HEADER, HeaderValue::from(chain));
    resp
}

/// A node serving on a background task.
pub struct RunningNode {
    pub url: String,
    pub addr: SocketAddr,
    pub state: Shared,
    pub handle: tokio::task::JoinHandle<()>,
}

impl RunningNode {
    pub fn stats(&self) -> Option<Arc<StatsLog>> {
        self.state.stats.clone()
    }
}

impl Drop for RunningNode {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

pub async fn serve(listener: TcpListener, state: Shared) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Binds `addr` (port 0 picks a free port) and serves in the background.
pub async fn spawn(state: NodeState, addr: SocketAddr) -> std::io::Result<RunningNode> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let state = Arc::new(state);
    let s = state.clone();
    let handle = tokio::spawn(async move {
        if let Err(e) = serve(listener, s).await {
            tracing::error!("node server stopped: {e}");
        }
    });
    Ok(RunningNode { url: format!("http://{addr}"), addr, state, handle })
}
