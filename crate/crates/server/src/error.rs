use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

/// An error as returned to HTTP clients: `{"code": ..., "message": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status: status.as_u16(), code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "CONFIG", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "UNAUTHORIZED", "admin bearer token required")
    }

    pub fn unknown_study(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UNKNOWN_STUDY", format!("no study {id:?}"))
    }

    pub fn unknown_lineup(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UNKNOWN_LINEUP", format!("lineup {id:?} is not part of this study"))
    }

    pub fn io(e: std::io::Error) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "IO", e.to_string())
    }
}

impl From<vislineup::Error> for ApiError {
    fn from(e: vislineup::Error) -> Self {
        use vislineup::Error as E;
        let status = match &e {
            E::OutOfRangeSelection { .. } | E::MissingReason | E::InvalidRating(_) | E::InvalidArgument(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            E::NoEvaluations => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(Body { code: self.code, message: &self.message })).into_response()
    }
}
