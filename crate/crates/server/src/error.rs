use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use studyu_core::expression::ExpressionError;
use studyu_core::model::ParseError;
use studyu_store::StoreError;

/// Error body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.to_owned(),
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", "a valid researcher token is required")
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn route_not_found() -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
    }
}

/// HTTP status for each store error code.
pub fn status_for(err: &StoreError) -> StatusCode {
    use StoreError::*;
    match err {
        NotFound { .. } | UserUnknown => StatusCode::NOT_FOUND,
        RevisionConflict { .. } | AlreadyPublished | StudyNotPublished | EnrollmentNotActive | DuplicateResult { .. } => {
            StatusCode::CONFLICT
        }
        ValidationFailed(_)
        | TermsNotAccepted
        | NotEligible(_)
        | TooManyInterventions(_)
        | TooFewInterventions(_)
        | UnknownIntervention(_)
        | ConsentRequired
        | InvalidAnswers(_)
        | UnscheduledTask { .. }
        | PayloadMismatch(_)
        | LateSubmission { .. }
        | FutureDay { .. }
        | Schedule(_) => StatusCode::UNPROCESSABLE_ENTITY,
        InvalidRequest(_) => StatusCode::BAD_REQUEST,
        Storage(_) => StatusCode::SERVICE_UNAVAILABLE,
        Corrupt { .. } => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        let status = status_for(&err);
        let base = ApiError::new(status, err.code(), err.to_string());
        match err {
            StoreError::NotEligible(failed) => base.with_details(json!({ "reasons": failed })),
            StoreError::ValidationFailed(report) => base.with_details(json!({ "report": report })),
            StoreError::RevisionConflict { expected, actual } => {
                base.with_details(json!({ "expected": expected, "actual": actual }))
            }
            _ => base,
        }
    }
}

impl From<ExpressionError> for ApiError {
    fn from(err: ExpressionError) -> Self {
        StoreError::InvalidAnswers(err).into()
    }
}

impl From<ParseError> for ApiError {
    fn from(err: ParseError) -> Self {
        match err {
            ParseError::Decode { kind, path, message } => {
                ApiError::new(StatusCode::BAD_REQUEST, "malformed_study", format!("{path}: {message}"))
                    .with_details(json!({ "kind": format!("{kind:?}"), "path": path }))
            }
            ParseError::Invalid(report) => StoreError::ValidationFailed(report).into(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        ApiError::bad_request(rejection.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(rejection: PathRejection) -> Self {
        ApiError::bad_request(rejection.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(rejection: QueryRejection) -> Self {
        ApiError::bad_request(rejection.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, axum::Json(self)).into_response()
    }
}
