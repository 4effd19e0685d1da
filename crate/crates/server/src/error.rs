use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use tsds_core::metadata::MetadataError;
use tsds_core::{QueryError, StoreError};

use crate::cformat::BadFormatFragment;

/// Error response body: `{"error": name, "message": ..., "position": n}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, name: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: name.to_owned(),
                message: message.into(),
                position: None,
            },
        }
    }

    pub fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", format!("no such dataset or file: {what}"))
    }

    pub fn bad_request(name: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, name, message)
    }

    pub fn internal(name: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, name, message)
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let status = match &e {
            QueryError::Metadata(MetadataError::NotFound(_)) => StatusCode::NOT_FOUND,
            _ if e.is_client_error() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "query failed");
        }
        ApiError {
            status,
            body: ErrorBody {
                error: e.name().to_owned(),
                position: e.position(),
                message: e.to_string(),
            },
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match &e {
            StoreError::IndexNegative { .. }
            | StoreError::IndexInverted { .. }
            | StoreError::RangeTooLarge(_) => Self::bad_request(e.name(), e.to_string()),
            StoreError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, e.name(), e.to_string()),
            _ => {
                tracing::error!(error = %e, "store failure");
                Self::internal(e.name(), e.to_string())
            }
        }
    }
}

impl From<BadFormatFragment> for ApiError {
    fn from(e: BadFormatFragment) -> Self {
        Self::internal("BadFormatFragment", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
