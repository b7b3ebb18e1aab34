use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use skyquery_core::catalog::SchemaDocument;
use skyquery_core::table::ResultTable;

use crate::batch::TupleBatch;
use crate::error::{ErrorBody, NodeError};
use crate::plan::{QueryRequest, XMatchRequest, CHAIN_BYTES_HEADER};
use crate::stats::StatsEntry;

/// A response body together with the body sizes of the exchange.
#[derive(Debug, Clone)]
pub struct Exchange<T> {
    pub body: T,
    pub request_bytes: u64,
    pub response_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct XMatchReply {
    pub batch: TupleBatch,
    pub request_bytes: u64,
    pub response_bytes: u64,
    /// Bytes of this exchange plus every exchange further down the chain.
    pub chain_bytes: u64,
}

/// HTTP client for the node endpoints.
#[derive(Debug, Clone)]
pub struct NodeClient {
    http: reqwest::Client,
}

fn endpoint(base: &str, path: &str) -> String {
    format!("{}{}", base.trim_end_matches('/'), path)
}

impl NodeClient {
    pub fn new(timeout: Duration) -> Self {
        let http = reqwest::Client::builder().timeout(timeout).build().expect("http client configuration");
        Self { http }
    }

    async fn send(&self, base: &str, rb: reqwest::RequestBuilder) -> Result<(reqwest::header::HeaderMap, Vec<u8>), NodeError> {
        let transport = |e: reqwest::Error| {
            if e.is_timeout() {
                NodeError::new(504, "timeout", format!("no response from {base}: {e}")).at(base)
            } else {
                NodeError::unreachable(base, format!("{base}: {e}"))
            }
        };
        let resp = rb.send().await.map_err(transport)?;
        let status = resp.status();
        let headers = resp.headers().clone();
        let bytes = resp.bytes().await.map_err(transport)?.to_vec();
        if status.is_success() {
            return Ok((headers, bytes));
        }
        let err = match serde_json::from_slice::<ErrorBody>(&bytes) {
            Ok(body) => NodeError { status: status.as_u16(), detail: body.error },
            Err(_) => NodeError::new(
                status.as_u16(),
                "http_error",
                format!("{status}: {}", String::from_utf8_lossy(&bytes[..bytes.len().min(200)])),
            ),
        };
        Err(err.at(base))
    }

    fn decode<T: DeserializeOwned>(base: &str, bytes: &[u8]) -> Result<T, NodeError> {
        serde_json::from_slice(bytes)
            .map_err(|e| NodeError::new(502, "bad_response", format!("undecodable response: {e}")).at(base))
    }

    async fn get<T: DeserializeOwned>(&self, base: &str, path: &str, query: &[(&str, &str)]) -> Result<T, NodeError> {
        let (_, bytes) = self.send(base, self.http.get(endpoint(base, path)).query(query)).await?;
        Self::decode(base, &bytes)
    }

    async fn post<B: Serialize>(&self, base: &str, path: &str, body: &B) -> Result<(reqwest::header::HeaderMap, Vec<u8>, u64), NodeError> {
        let payload = serde_json::to_vec(body).expect("request types serialize");
        let n = payload.len() as u64;
        let rb = self
            .http
            .post(endpoint(base, path))
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(payload);
        let (h, b) = self.send(base, rb).await?;
        Ok((h, b, n))
    }

    pub async fn info(&self, base: &str) -> Result<ResultTable, NodeError> {
        self.get(base, "/info", &[]).await
    }

    pub async fn schema(&self, base: &str) -> Result<SchemaDocument, NodeError> {
        self.get(base, "/schema", &[]).await
    }

    pub async fn tables(&self, base: &str) -> Result<ResultTable, NodeError> {
        self.get(base, "/tables", &[]).await
    }

    pub async fn columns(&self, base: &str, table: &str) -> Result<ResultTable, NodeError> {
        self.get(base, "/columns", &[("table", table)]).await
    }

    pub async fn functions(&self, base: &str) -> Result<ResultTable, NodeError> {
        self.get(base, "/functions", &[]).await
    }

    pub async fn docsearch(&self, base: &str, key: &str) -> Result<ResultTable, NodeError> {
        self.get(base, "/docsearch", &[("key", key)]).await
    }

    pub async fn stats(&self, base: &str) -> Result<Vec<StatsEntry>, NodeError> {
        self.get(base, "/stats", &[]).await
    }

    pub async fn query(&self, base: &str, req: &QueryRequest) -> Result<Exchange<ResultTable>, NodeError> {
        let (_, bytes, n) = self.post(base, "/query", req).await?;
        Ok(Exchange { body: Self::decode(base, &bytes)?, request_bytes: n, response_bytes: bytes.len() as u64 })
    }

    pub async fn xmatch(&self, base: &str, req: &XMatchRequest) -> Result<XMatchReply, NodeError> {
        let (headers, bytes, n) = self.post(base, "/xmatch", req).await?;
        let table: ResultTable = Self::decode(base, &bytes)?;
        let batch = TupleBatch::from_table(table).map_err(|e| e.at(base))?;
        let response_bytes = bytes.len() as u64;
        let chain_bytes = headers
            .get(CHAIN_BYTES_HEADER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok())
            .unwrap_or(n + response_bytes);
        Ok(XMatchReply { batch, request_bytes: n, response_bytes, chain_bytes })
    }
}
