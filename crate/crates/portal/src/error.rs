use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use skynode::{ErrorBody, ErrorDetail, NodeError};
use skyquery_core::query::QueryError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PortalError {
    #[error("{0}")]
    Query(#[from] QueryError),
    /// The query is well formed but cannot run on this federation.
    #[error("{0}")]
    Plan(String),
    #[error("member {archive}: {error}")]
    Member { archive: String, error: NodeError },
    #[error("config: {0}")]
    Config(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl PortalError {
    pub fn member(archive: &str, error: NodeError) -> Self {
        Self::Member { archive: archive.to_string(), error }
    }

    /// True when a member could not be reached or answered garbage, as
    /// opposed to rejecting the query.
    pub fn is_transport(&self) -> bool {
        match self {
            Self::Member { error, .. } => error.status == 502 || error.status == 504,
            Self::Config(_) => true,
            _ => false,
        }
    }

    /// CLI exit status: 1 for query errors, 2 for config or transport.
    pub fn exit_code(&self) -> u8 {
        if self.is_transport() {
            2
        } else {
            1
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            Self::Query(_) | Self::Plan(_) => 400,
            Self::Member { error, .. } if error.status == 504 => 504,
            Self::Member { error, .. } if error.status == 502 => 502,
            Self::Member { error, .. } if error.status < 500 => 400,
            Self::Member { .. } => 502,
            Self::Config(_) | Self::Internal(_) => 500,
        }
    }

    pub fn body(&self) -> ErrorBody {
        let detail = match self {
            Self::Query(e) => ErrorDetail { code: "query_error".into(), message: e.to_string(), hop: None },
            Self::Plan(m) => ErrorDetail { code: "plan_error".into(), message: m.clone(), hop: None },
            Self::Member { archive, error } => ErrorDetail {
                code: error.code().to_string(),
                message: format!("{archive}: {}", error.detail.message),
                hop: error.hop().map(str::to_string),
            },
            Self::Config(m) => ErrorDetail { code: "config_error".into(), message: m.clone(), hop: None },
            Self::Internal(m) => ErrorDetail { code: "internal".into(), message: m.clone(), hop: None },
        };
        ErrorBody { error: detail }
    }
}

impl IntoResponse for PortalError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, axum::Json(self.body())).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let unreachable = PortalError::member("SDSS", NodeError::unreachable("http://x", "refused"));
        assert_eq!((unreachable.exit_code(), unreachable.status()), (2, 502));
        assert_eq!(unreachable.body().error.hop.as_deref(), Some("http://x"));
        let rejected = PortalError::member("SDSS", NodeError::bad_request("unknown_column", "no column 'q'"));
        assert_eq!((rejected.exit_code(), rejected.status()), (1, 400));
        assert_eq!(PortalError::Plan("x".into()).exit_code(), 1);
        assert_eq!(PortalError::Config("x".into()).exit_code(), 2);
    }
}
