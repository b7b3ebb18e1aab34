use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::{Deserialize, Serialize};
use skyquery_core::catalog::CatalogError;

/// Wire form of every error: `{"error": {"code", "message", "hop"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hop: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{}: {}", .detail.code, .detail.hop.as_ref().map(|h| format!(" at {h}")).unwrap_or_default(), .detail.message)]
pub struct NodeError {
    pub status: u16,
    pub detail: ErrorDetail,
}

impl NodeError {
    pub fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        Self { status, detail: ErrorDetail { code: code.into(), message: message.into(), hop: None } }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(400, code, message)
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(404, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(500, "internal", message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(500, "config_error", message)
    }

    pub fn unreachable(url: &str, message: impl Into<String>) -> Self {
        Self::new(502, "unreachable", message).at(url)
    }

    /// Annotates the hop unless a deeper hop already did.
    pub fn at(mut self, hop: &str) -> Self {
        if self.detail.hop.is_none() {
            self.detail.hop = Some(hop.to_string());
        }
        self
    }

    pub fn code(&self) -> &str {
        &self.detail.code
    }

    pub fn hop(&self) -> Option<&str> {
        self.detail.hop.as_deref()
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody { error: self.detail.clone() }
    }
}

impl From<CatalogError> for NodeError {
    fn from(e: CatalogError) -> Self {
        let status = match &e {
            CatalogError::UnknownTable(_) => 404,
            CatalogError::Io { .. } | CatalogError::Htm(_) => 500,
            _ => 400,
        };
        NodeError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for NodeError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, axum::Json(self.body())).into_response()
    }
}
