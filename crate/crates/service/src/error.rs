use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// JSON error envelope returned by every failing endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, &format!("{what}.not_found"), format!("no {what} with id {id}"))
    }

    pub fn stale(current: u64, expected: u64) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "session.stale_version",
            format!("session is at version {current}, request was made against {expected}"),
        )
        .with_detail(serde_json::json!({ "current": current, "expected": expected }))
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn too_large(limit: usize) -> Self {
        Self::new(StatusCode::PAYLOAD_TOO_LARGE, "upload.too_large", format!("upload exceeds {limit} bytes"))
            .with_detail(serde_json::json!({ "limit": limit }))
    }
}

impl From<corand::Error> for ApiError {
    fn from(e: corand::Error) -> Self {
        use corand::Error as E;
        let status = match &e {
            E::NoView | E::NothingToRollBack => StatusCode::CONFLICT,
            E::ZeroCovariance | E::ZeroDenominator => StatusCode::UNPROCESSABLE_ENTITY,
            E::Io(_) | E::Json(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        let detail = match &e {
            E::BadRow { line, .. } => Some(serde_json::json!({ "line": line })),
            _ => None,
        };
        Self {
            status: status.as_u16(),
            code: e.code().to_string(),
            message: e.to_string(),
            detail,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
