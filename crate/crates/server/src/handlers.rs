use axum::extract::{FromRequest, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use studyu_core::expression::{check_eligibility as eligibility_verdict, next_question, FailedCriterion, FlowStep};
use studyu_core::model::{decode_study, serialize_study, AnswerSet, Question};
use studyu_store::{EnrollmentRequest, ExportOptions, NewTaskResult, TrialStore};

use crate::{ApiError, AppState};

/// `axum::Json` with errors in the API's format.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct Json<T>(pub T);

impl<T: Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> Response {
        axum::Json(self.0).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Run a store call off the async worker threads.
async fn blocking<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&TrialStore) -> Result<T, studyu_store::StoreError> + Send + 'static,
{
    let store = state.store.clone();
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

fn created<T: Serialize>(value: T) -> Response {
    (StatusCode::CREATED, axum::Json(value)).into_response()
}

fn canonical_study(study: &studyu_core::model::Study) -> Response {
    let body = serialize_study(&study.metadata, &study.details);
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

// ---- participants ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NewUser {
    pub terms_accepted: bool,
}

pub async fn create_user(State(state): State<AppState>, Json(body): Json<NewUser>) -> ApiResult<Response> {
    let user = blocking(&state, move |s| s.create_user(body.terms_accepted)).await?;
    Ok(created(user))
}

pub async fn delete_user(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    blocking(&state, move |s| s.delete_user(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

pub async fn list_studies(State(state): State<AppState>) -> ApiResult<Response> {
    Ok(Json(blocking(&state, |s| s.list_published()).await?).into_response())
}

pub async fn get_study(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let study = blocking(&state, move |s| s.get_published(&id)).await?;
    Ok(canonical_study(&study))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EligibilityCheck {
    #[serde(default)]
    pub answers: AnswerSet,
}

/// Either the next question to ask or, once the questionnaire is complete, the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EligibilityStep {
    pub next_question: Option<Question>,
    pub eligible: Option<bool>,
    pub failed_criteria: Vec<FailedCriterion>,
}

pub async fn check_eligibility(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<EligibilityCheck>,
) -> ApiResult<Json<EligibilityStep>> {
    let study = blocking(&state, move |s| s.get_published(&id)).await?;
    let questions = &study.details.eligibility_questions;
    let step = match next_question(questions, &body.answers)? {
        FlowStep::Ask(q) => EligibilityStep {
            next_question: Some(q.clone()),
            eligible: None,
            failed_criteria: Vec::new(),
        },
        FlowStep::Done => {
            let verdict = eligibility_verdict(&study.details.eligibility_criteria, &body.answers, questions)?;
            EligibilityStep {
                next_question: None,
                eligible: Some(verdict.eligible),
                failed_criteria: verdict.failed_criteria,
            }
        }
    };
    Ok(Json(step))
}

pub async fn enroll(State(state): State<AppState>, Json(body): Json<EnrollmentRequest>) -> ApiResult<Response> {
    let enrollment = blocking(&state, move |s| s.enroll(body)).await?;
    Ok(created(enrollment))
}

pub async fn get_enrollment(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&state, move |s| s.get_enrollment(&id)).await?).into_response())
}

pub async fn record_result(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<NewTaskResult>,
) -> ApiResult<Response> {
    let result = blocking(&state, move |s| s.record_task_result(&id, body)).await?;
    Ok(created(result))
}

pub async fn report(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let unlock = state.demo_unlock_reports;
    Ok(Json(blocking(&state, move |s| s.report(&id, unlock)).await?).into_response())
}

pub async fn schedule(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&state, move |s| s.schedule_view(&id)).await?).into_response())
}

pub async fn opt_out(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    blocking(&state, move |s| s.opt_out(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

// ---- designer ----

pub async fn designer_list(State(state): State<AppState>) -> ApiResult<Response> {
    Ok(Json(blocking(&state, |s| s.list_studies()).await?).into_response())
}

pub async fn designer_get(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&state, move |s| s.get_study(&id)).await?).into_response())
}

/// Split `{"expectedRevision": n, "metadata": .., "details": ..}` and decode the study part strictly.
fn draft_body(mut body: Value) -> ApiResult<(u64, studyu_core::model::Study)> {
    let Some(object) = body.as_object_mut() else {
        return Err(ApiError::bad_request("expected a JSON object"));
    };
    let expected = match object.remove("expectedRevision") {
        None => 0,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| ApiError::bad_request("expectedRevision must be a non-negative integer"))?,
    };
    let bytes = serde_json::to_vec(&body).expect("values serialize");
    Ok((expected, decode_study(&bytes)?))
}

pub async fn designer_save(State(state): State<AppState>, Json(body): Json<Value>) -> ApiResult<Response> {
    let (expected, study) = draft_body(body)?;
    save(state, expected, study).await
}

pub async fn designer_update(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<Value>,
) -> ApiResult<Response> {
    let (expected, study) = draft_body(body)?;
    if study.metadata.study_id.as_str() != id {
        return Err(ApiError::bad_request(format!(
            "metadata.studyId {:?} does not match the path",
            study.metadata.study_id.as_str()
        )));
    }
    save(state, expected, study).await
}

async fn save(state: AppState, expected: u64, study: studyu_core::model::Study) -> ApiResult<Response> {
    let id = study.metadata.study_id.to_string();
    let stored = blocking(&state, move |s| {
        s.save_draft(study.metadata, study.details, expected)?;
        s.get_study(&id)
    })
    .await?;
    let status = if expected == 0 { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, axum::Json(stored.metadata)).into_response())
}

pub async fn designer_delete(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    blocking(&state, move |s| s.delete_draft(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PublishRequest {
    pub expected_revision: u64,
}

pub async fn designer_publish(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<PublishRequest>,
) -> ApiResult<Response> {
    Ok(Json(blocking(&state, move |s| s.publish(&id, body.expected_revision)).await?).into_response())
}

pub async fn designer_export(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let options = ExportOptions {
        include_user_pseudonym: state.export_include_user_pseudonym,
    };
    let csv = blocking(&state, move |s| s.export_csv(&id, options)).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ClockUpdate {
    pub now: DateTime<Utc>,
}

/// Move the settable clock; only available when the service runs on one.
pub async fn set_clock(State(state): State<AppState>, Json(body): Json<ClockUpdate>) -> ApiResult<Json<ClockUpdate>> {
    let clock = state.manual_clock.as_ref().ok_or_else(|| {
        ApiError::new(StatusCode::CONFLICT, "clock_not_settable", "the service follows wall-clock time")
    })?;
    clock.set(body.now);
    Ok(Json(body))
}
