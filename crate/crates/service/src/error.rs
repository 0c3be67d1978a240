use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use verispace_core::Error;

/// Error payload of every endpoint: `{code, message}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
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
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, code, message)
    }

    pub fn not_found(id: &str) -> Self {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no session `{id}`"),
        )
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::UnknownActivity(_) => "unknown_activity",
            Error::AlreadyVerified(_) => {
                return ApiError::conflict("already_verified", e.to_string())
            }
            Error::HorizonReached(_) => {
                return ApiError::conflict("terminal_session", e.to_string())
            }
            Error::InvalidConfig(_) => "invalid_config",
            Error::UnknownRule(_) => "unknown_rule",
            Error::InvalidNetwork(_)
            | Error::UnknownNode(_)
            | Error::MalformedAssignment { .. }
            | Error::InvalidScenario(_)
            | Error::Unsupported(_)
            | Error::ImpossibleEvidence => "invalid_scenario",
            _ => return ApiError::internal(e.to_string()),
        };
        ApiError::bad_request(code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            code: self.code,
            message: &self.message,
        };
        (self.status, Json(body)).into_response()
    }
}
