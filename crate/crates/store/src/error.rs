use studyu_core::expression::{ExpressionError, FailedCriterion};
use studyu_core::model::{TaskId, ValidationReport};
use studyu_core::schedule::ScheduleError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("{entity} {id} not found")]
    NotFound { entity: &'static str, id: String },
    #[error("revision conflict: expected {expected}, stored {actual}")]
    RevisionConflict { expected: u64, actual: u64 },
    #[error("study is published and can no longer be changed")]
    AlreadyPublished,
    #[error("study is not published")]
    StudyNotPublished,
    #[error("study definition has validation errors")]
    ValidationFailed(ValidationReport),
    #[error("terms of use must be accepted")]
    TermsNotAccepted,
    #[error("unknown user")]
    UserUnknown,
    #[error("not eligible for this study")]
    NotEligible(Vec<FailedCriterion>),
    #[error("exactly two interventions must be selected, got {0}")]
    TooManyInterventions(usize),
    #[error("exactly two different interventions must be selected, got {0}")]
    TooFewInterventions(usize),
    #[error("intervention {0} is not part of the study")]
    UnknownIntervention(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("consent is required to enroll")]
    ConsentRequired,
    #[error("invalid answers: {0}")]
    InvalidAnswers(#[from] ExpressionError),
    #[error("enrollment is not active")]
    EnrollmentNotActive,
    #[error("task {task} already has a result for day {day}")]
    DuplicateResult { task: TaskId, day: u32 },
    #[error("task {task} is not scheduled on day {day}")]
    UnscheduledTask { task: TaskId, day: u32 },
    #[error("payload does not match task {0}")]
    PayloadMismatch(TaskId),
    #[error("results for day {day} can no longer be submitted")]
    LateSubmission { day: u32 },
    #[error("day {day} has not started yet")]
    FutureDay { day: u32 },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("stored record {key} is unreadable: {message}")]
    Corrupt { key: String, message: String },
}

impl StoreError {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::NotFound { .. } => "not_found",
            StoreError::RevisionConflict { .. } => "revision_conflict",
            StoreError::AlreadyPublished => "already_published",
            StoreError::StudyNotPublished => "study_not_published",
            StoreError::ValidationFailed(_) => "validation_failed",
            StoreError::TermsNotAccepted => "terms_not_accepted",
            StoreError::UserUnknown => "user_unknown",
            StoreError::NotEligible(_) => "not_eligible",
            StoreError::TooManyInterventions(_) => "too_many_interventions",
            StoreError::TooFewInterventions(_) => "too_few_interventions",
            StoreError::UnknownIntervention(_) => "unknown_intervention",
            StoreError::InvalidRequest(_) => "invalid_request",
            StoreError::ConsentRequired => "consent_required",
            StoreError::InvalidAnswers(_) => "invalid_answers",
            StoreError::EnrollmentNotActive => "enrollment_not_active",
            StoreError::DuplicateResult { .. } => "duplicate_result",
            StoreError::UnscheduledTask { .. } => "unscheduled_task",
            StoreError::PayloadMismatch(_) => "payload_mismatch",
            StoreError::LateSubmission { .. } => "late_submission",
            StoreError::FutureDay { .. } => "future_day",
            StoreError::Schedule(_) => "schedule_error",
            StoreError::Storage(_) => "storage_unavailable",
            StoreError::Corrupt { .. } => "storage_corrupt",
        }
    }
}
