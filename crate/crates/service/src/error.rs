use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use taxoalign::analysis::AnalysisError;
use taxoalign::parser::ParseError;
use taxoalign::EngineError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("the alignment text has {} parse error(s)", .0.len())]
    Parse(Vec<ParseError>),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown world {0}")]
    UnknownWorld(usize),
    #[error("unknown job `{0}`")]
    UnknownJob(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    BudgetExceeded(String),
    #[error("session record `{id}` is corrupt: {reason}")]
    CorruptRecord { id: String, reason: String },
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("computation still running")]
    Pending { job: String },
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) | ApiError::Parse(_) => StatusCode::BAD_REQUEST,
            ApiError::UnknownSession(_) | ApiError::UnknownWorld(_) | ApiError::UnknownJob(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::BudgetExceeded(_) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::CorruptRecord { .. } | ApiError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
            ApiError::Pending { .. } => StatusCode::ACCEPTED,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Parse(_) => "parse_error",
            ApiError::UnknownSession(_) => "unknown_session",
            ApiError::UnknownWorld(_) => "unknown_world",
            ApiError::UnknownJob(_) => "unknown_job",
            ApiError::Conflict(_) => "no_matching_world",
            ApiError::Unprocessable(_) => "invalid_state",
            ApiError::BudgetExceeded(_) => "budget_exceeded",
            ApiError::CorruptRecord { .. } => "corrupt_record",
            ApiError::Storage(_) => "storage",
            ApiError::Pending { .. } => "pending",
        }
    }

    /// Rebuilds an error recorded by a failed job.
    pub fn from_code(code: &str, message: String) -> ApiError {
        match code {
            "budget_exceeded" => ApiError::BudgetExceeded(message),
            "invalid_state" => ApiError::Unprocessable(message),
            _ => ApiError::Storage(message),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::BudgetExceeded { .. } => ApiError::BudgetExceeded(e.to_string()),
            other => ApiError::Unprocessable(other.to_string()),
        }
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Engine(inner) => inner.into(),
            AnalysisError::UnknownPair(..) | AnalysisError::EmptyAnswer => ApiError::BadRequest(e.to_string()),
            AnalysisError::NoMatchingWorld => ApiError::Conflict(e.to_string()),
            other => ApiError::Unprocessable(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        let body = match &self {
            ApiError::Pending { job } => json!({
                "job": job,
                "status": "running",
                "poll": format!("/api/jobs/{job}"),
            }),
            ApiError::Parse(errors) => json!({
                "error": self.code(),
                "message": self.to_string(),
                "errors": errors,
            }),
            _ => json!({ "error": self.code(), "message": self.to_string() }),
        };
        (status, Json(body)).into_response()
    }
}
