use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use risemf_core::Error as CoreError;
use serde_json::{json, Value};

/// JSON error body `{code, message, details}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("unknown {what} `{id}`"))
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    /// Scene parse/validation failures, with the location or issue list.
    pub fn from_scene_error(err: CoreError) -> Self {
        let details = match &err {
            CoreError::Syntax { line, column, .. } => json!({ "line": line, "column": column }),
            CoreError::Schema { path, .. } => json!({ "path": path }),
            CoreError::Invariant(issues) => json!({ "issues": issues }),
            _ => Value::Null,
        };
        let status = match err {
            CoreError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, err.code(), err.to_string()).with_details(details)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "details": self.details });
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
