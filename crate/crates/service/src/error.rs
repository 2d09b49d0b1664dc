use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

#[derive(Debug)]
pub enum ApiError {
    Malformed {
        message: String,
        line: usize,
        column: usize,
    },
    UnsupportedMediaType,
    Validation {
        field: Option<String>,
        message: String,
    },
    Infeasible(String),
    ReplicationCap {
        requested: usize,
        cap: usize,
    },
    Internal(String),
}

impl ApiError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError::Validation {
            field: Some(field.into()),
            message: message.into(),
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Malformed { .. } => StatusCode::BAD_REQUEST,
            ApiError::UnsupportedMediaType => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            ApiError::Validation { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Infeasible(_) => StatusCode::CONFLICT,
            ApiError::ReplicationCap { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn body(&self) -> Value {
        match self {
            ApiError::Malformed {
                message,
                line,
                column,
            } => json!({
                "error": "malformed_json",
                "message": message,
                "line": line,
                "column": column,
            }),
            ApiError::UnsupportedMediaType => json!({
                "error": "unsupported_media_type",
                "message": "request bodies must be application/json",
            }),
            ApiError::Validation { field, message } => json!({
                "error": "validation",
                "field": field,
                "message": message,
            }),
            ApiError::Infeasible(message) => json!({
                "error": "infeasible",
                "message": message,
            }),
            ApiError::ReplicationCap { requested, cap } => json!({
                "error": "replication_cap",
                "message": format!(
                    "{requested} replications requested; this server runs at most {cap} per request"
                ),
                "cap": cap,
            }),
            ApiError::Internal(message) => json!({
                "error": "internal",
                "message": message,
            }),
        }
    }
}

impl From<rankdesign::Error> for ApiError {
    fn from(e: rankdesign::Error) -> Self {
        match e {
            rankdesign::Error::Infeasible(_) => ApiError::Infeasible(e.to_string()),
            rankdesign::Error::Domain { name, .. } => ApiError::field(name, e.to_string()),
            rankdesign::Error::InvalidInput(_) => ApiError::Validation {
                field: None,
                message: e.to_string(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}
