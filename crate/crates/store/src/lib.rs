//! Persistence and lifecycle rules for studies, anonymous users and enrollments.
//!
//! Key layout in the backend (values are JSON):
//!
//! | key                          | value                                   |
//! |------------------------------|-----------------------------------------|
//! | `study/{study_id}`           | [`StoredStudy`]                         |
//! | `user/{user_id}`             | [`AnonymousUser`]                       |
//! | `enrollment/{enrollment_id}` | [`Enrollment`] without its results      |
//! | `result/{enrollment_id}/{n}` | the n-th [`TaskResult`], zero-padded    |
//! | `opted-out/{enrollment_id}`  | opt-out time; the data itself is gone   |
//!
//! Writes are serialized through one lock and committed as single atomic batches.

mod backend;
mod clock;
mod entropy;
mod error;
mod export;
mod views;

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use studyu_core::analysis::{build_report, ReportBundle};
use studyu_core::enrollment::{
    Enrollment, EnrollmentId, EnrollmentStatus, ResultPayload, TaskResult, UserId, DELETED_USER,
};
use studyu_core::expression::{check_eligibility, complete_with_defaults};
use studyu_core::model::{
    validate_study, AnswerSet, InterventionId, Study, StudyDetails, StudyId, StudyMetadata, TaskContent, TaskId,
};
use studyu_core::schedule::{generate_phase_sequence, is_scheduled};

pub use backend::{FileBackend, KvBackend, MemoryBackend, WriteOp};
pub use clock::{Clock, ManualClock, SystemClock};
pub use entropy::{Entropy, OsEntropy, SeededEntropy};
pub use error::StoreError;
pub use export::ExportOptions;
pub use views::{DayView, PhaseView, ScheduleView};

/// Largest accepted distance from UTC, in minutes.
pub const MAX_UTC_OFFSET_MINUTES: i32 = 14 * 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StoredStudy {
    pub metadata: StudyMetadata,
    pub details: StudyDetails,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub published_at: Option<DateTime<Utc>>,
}

impl StoredStudy {
    pub fn study(&self) -> Study {
        Study {
            metadata: self.metadata.clone(),
            details: self.details.clone(),
        }
    }
}

/// An account with no personal data: an opaque id and two timestamps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AnonymousUser {
    pub user_id: UserId,
    pub created_at: DateTime<Utc>,
    pub terms_accepted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EnrollmentRequest {
    pub user_id: UserId,
    pub study_id: StudyId,
    pub selections: Vec<InterventionId>,
    #[serde(default)]
    pub eligibility_answers: AnswerSet,
    pub consent: bool,
    /// Schedule seed; drawn by the server when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub utc_offset_minutes: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NewTaskResult {
    pub task_id: TaskId,
    /// Defaults to the participant's current study day.
    #[serde(default)]
    pub study_day: Option<u32>,
    pub payload: ResultPayload,
}

pub struct TrialStore {
    backend: Arc<dyn KvBackend>,
    clock: Arc<dyn Clock>,
    entropy: Arc<dyn Entropy>,
    write: Mutex<()>,
}

fn study_key(id: &str) -> String {
    format!("study/{id}")
}

fn user_key(id: &str) -> String {
    format!("user/{id}")
}

fn enrollment_key(id: &str) -> String {
    format!("enrollment/{id}")
}

fn results_prefix(id: &str) -> String {
    format!("result/{id}/")
}

fn opted_out_key(id: &str) -> String {
    format!("opted-out/{id}")
}

fn encode<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("store records serialize")
}

fn decode<T: DeserializeOwned>(key: &str, raw: &str) -> Result<T, StoreError> {
    serde_json::from_str(raw).map_err(|e| StoreError::Corrupt {
        key: key.to_owned(),
        message: e.to_string(),
    })
}

fn not_found(entity: &'static str, id: &str) -> StoreError {
    StoreError::NotFound {
        entity,
        id: id.to_owned(),
    }
}

impl TrialStore {
    pub fn new(backend: Arc<dyn KvBackend>, clock: Arc<dyn Clock>, entropy: Arc<dyn Entropy>) -> Self {
        Self {
            backend,
            clock,
            entropy,
            write: Mutex::new(()),
        }
    }

    /// Volatile store with the system clock and OS randomness.
    pub fn in_memory() -> Self {
        Self::new(Arc::new(MemoryBackend::new()), Arc::new(SystemClock), Arc::new(OsEntropy))
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn read<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, StoreError> {
        self.backend.get(key)?.map(|raw| decode(key, &raw)).transpose()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, ()> {
        self.write.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Every stored key and value, in key order.
    pub fn dump(&self) -> Result<Vec<(String, String)>, StoreError> {
        self.backend.scan_prefix("")
    }

    // ---- studies ----

    pub fn get_study(&self, study_id: &str) -> Result<StoredStudy, StoreError> {
        self.read(&study_key(study_id))?.ok_or_else(|| not_found("study", study_id))
    }

    /// Drafts and published studies, ordered by id.
    pub fn list_studies(&self) -> Result<Vec<StudyMetadata>, StoreError> {
        self.backend
            .scan_prefix("study/")?
            .into_iter()
            .map(|(k, v)| decode::<StoredStudy>(&k, &v).map(|s| s.metadata))
            .collect()
    }

    pub fn list_published(&self) -> Result<Vec<StudyMetadata>, StoreError> {
        Ok(self.list_studies()?.into_iter().filter(|m| m.published).collect())
    }

    /// A published study; drafts are invisible here.
    pub fn get_published(&self, study_id: &str) -> Result<Study, StoreError> {
        let stored = self.get_study(study_id)?;
        if !stored.metadata.published {
            return Err(not_found("study", study_id));
        }
        Ok(stored.study())
    }

    /// Create or replace a draft if `expected_revision` matches the stored one
    /// (0 for a new study). Returns the new revision.
    pub fn save_draft(
        &self,
        mut metadata: StudyMetadata,
        details: StudyDetails,
        expected_revision: u64,
    ) -> Result<u64, StoreError> {
        let report = validate_study(&details, &metadata, false);
        if report.has_errors() {
            return Err(StoreError::ValidationFailed(report));
        }
        let _guard = self.lock();
        let key = study_key(metadata.study_id.as_str());
        let existing: Option<StoredStudy> = self.read(&key)?;
        let now = self.clock.now();
        let (actual, created_at) = match &existing {
            Some(s) if s.metadata.published => return Err(StoreError::AlreadyPublished),
            Some(s) => (s.metadata.revision, s.created_at),
            None => (0, now),
        };
        if actual != expected_revision {
            return Err(StoreError::RevisionConflict {
                expected: expected_revision,
                actual,
            });
        }
        metadata.revision = actual + 1;
        metadata.published = false;
        let stored = StoredStudy {
            metadata,
            details,
            created_at,
            updated_at: now,
            published_at: None,
        };
        self.backend.commit(vec![WriteOp::put(key, encode(&stored))])?;
        Ok(stored.metadata.revision)
    }

    /// Validate for publication and freeze the study.
    pub fn publish(&self, study_id: &str, expected_revision: u64) -> Result<StudyMetadata, StoreError> {
        let _guard = self.lock();
        let mut stored = self.get_study(study_id)?;
        if stored.metadata.published {
            return Err(StoreError::AlreadyPublished);
        }
        if stored.metadata.revision != expected_revision {
            return Err(StoreError::RevisionConflict {
                expected: expected_revision,
                actual: stored.metadata.revision,
            });
        }
        let report = validate_study(&stored.details, &stored.metadata, true);
        if report.has_errors() {
            return Err(StoreError::ValidationFailed(report));
        }
        let now = self.clock.now();
        stored.metadata.published = true;
        stored.published_at = Some(now);
        stored.updated_at = now;
        self.backend.commit(vec![WriteOp::put(study_key(study_id), encode(&stored))])?;
        Ok(stored.metadata)
    }

    pub fn delete_draft(&self, study_id: &str) -> Result<(), StoreError> {
        let _guard = self.lock();
        let stored = self.get_study(study_id)?;
        if stored.metadata.published {
            return Err(StoreError::AlreadyPublished);
        }
        self.backend.commit(vec![WriteOp::delete(study_key(study_id))])
    }

    // ---- users ----

    pub fn create_user(&self, terms_accepted: bool) -> Result<AnonymousUser, StoreError> {
        if !terms_accepted {
            return Err(StoreError::TermsNotAccepted);
        }
        let now = self.clock.now();
        let user = AnonymousUser {
            user_id: UserId::new(self.entropy.uuid().to_string()),
            created_at: now,
            terms_accepted_at: now,
        };
        let _guard = self.lock();
        self.backend
            .commit(vec![WriteOp::put(user_key(user.user_id.as_str()), encode(&user))])?;
        Ok(user)
    }

    pub fn get_user(&self, user_id: &str) -> Result<AnonymousUser, StoreError> {
        self.read(&user_key(user_id))?.ok_or(StoreError::UserUnknown)
    }

    /// Remove the account and its running enrollments; finished enrollments stay,
    /// detached from the account.
    pub fn delete_user(&self, user_id: &str) -> Result<(), StoreError> {
        let _guard = self.lock();
        self.get_user(user_id)?;
        let now = self.clock.now();
        let mut batch = vec![WriteOp::delete(user_key(user_id))];
        for mut enrollment in self.all_enrollments()?.into_iter().filter(|e| e.user_id == user_id) {
            let id = enrollment.enrollment_id.to_string();
            if effective_status(&enrollment, now) == EnrollmentStatus::Active {
                batch.extend(self.deletion_ops(&id)?);
            } else {
                enrollment.status = EnrollmentStatus::Finished;
                enrollment.user_id = UserId::new(DELETED_USER);
                enrollment.results.clear();
                batch.push(WriteOp::put(enrollment_key(&id), encode(&enrollment)));
            }
        }
        self.backend.commit(batch)
    }

    // ---- enrollments ----

    fn load_enrollment(&self, id: &str) -> Result<Option<Enrollment>, StoreError> {
        let key = enrollment_key(id);
        let Some(mut enrollment) = self.read::<Enrollment>(&key)? else {
            return Ok(None);
        };
        enrollment.results = self
            .backend
            .scan_prefix(&results_prefix(id))?
            .into_iter()
            .map(|(k, v)| decode(&k, &v))
            .collect::<Result<_, _>>()?;
        Ok(Some(enrollment))
    }

    fn all_enrollments(&self) -> Result<Vec<Enrollment>, StoreError> {
        let ids: Vec<String> = self
            .backend
            .scan_prefix("enrollment/")?
            .into_iter()
            .map(|(k, _)| k["enrollment/".len()..].to_owned())
            .collect();
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            out.extend(self.load_enrollment(&id)?);
        }
        Ok(out)
    }

    fn deletion_ops(&self, id: &str) -> Result<Vec<WriteOp>, StoreError> {
        let mut ops = vec![WriteOp::delete(enrollment_key(id))];
        ops.extend(
            self.backend
                .scan_prefix(&results_prefix(id))?
                .into_iter()
                .map(|(k, _)| WriteOp::delete(k)),
        );
        Ok(ops)
    }

    /// The enrollment with its results and its status as of now.
    pub fn get_enrollment(&self, enrollment_id: &str) -> Result<Enrollment, StoreError> {
        let mut enrollment = self
            .load_enrollment(enrollment_id)?
            .ok_or_else(|| not_found("enrollment", enrollment_id))?;
        enrollment.status = effective_status(&enrollment, self.clock.now());
        Ok(enrollment)
    }

    pub fn enroll(&self, request: EnrollmentRequest) -> Result<Enrollment, StoreError> {
        self.get_user(request.user_id.as_str())?;
        let study = self.get_study(request.study_id.as_str())?;
        if !study.metadata.published {
            return Err(StoreError::StudyNotPublished);
        }
        let details = study.details;
        let distinct: BTreeSet<&InterventionId> = request.selections.iter().collect();
        if request.selections.len() > 2 {
            return Err(StoreError::TooManyInterventions(request.selections.len()));
        }
        if distinct.len() < 2 {
            return Err(StoreError::TooFewInterventions(distinct.len()));
        }
        if let Some(unknown) = request.selections.iter().find(|i| details.intervention(i.as_str()).is_none()) {
            return Err(StoreError::UnknownIntervention(unknown.to_string()));
        }
        if !request.consent {
            return Err(StoreError::ConsentRequired);
        }
        if request.utc_offset_minutes.abs() > MAX_UTC_OFFSET_MINUTES {
            return Err(StoreError::InvalidRequest(format!(
                "utcOffsetMinutes must lie within ±{MAX_UTC_OFFSET_MINUTES}"
            )));
        }

        let now = self.clock.now();
        let answers = complete_with_defaults(&details.eligibility_questions, &request.eligibility_answers, now)?;
        let verdict = check_eligibility(&details.eligibility_criteria, &answers, &details.eligibility_questions)?;
        if !verdict.eligible {
            return Err(StoreError::NotEligible(verdict.failed_criteria));
        }

        let [a, b] = [request.selections[0].clone(), request.selections[1].clone()];
        let seed = request.seed.unwrap_or_else(|| self.entropy.seed());
        let phase_sequence = generate_phase_sequence(&details.schedule, &a, &b, seed)?;
        let started_on = (now + Duration::minutes(i64::from(request.utc_offset_minutes))).date_naive();
        let enrollment = Enrollment {
            enrollment_id: EnrollmentId::new(self.entropy.uuid().to_string()),
            user_id: request.user_id,
            study_id: request.study_id,
            study_revision: study.metadata.revision,
            snapshot: details,
            selections: [a, b],
            phase_sequence,
            eligibility_answers: answers,
            consent_given_at: now,
            started_on,
            utc_offset_minutes: request.utc_offset_minutes,
            status: EnrollmentStatus::Active,
            results: Vec::new(),
        };
        let _guard = self.lock();
        // the account may have been deleted since the check above
        self.get_user(enrollment.user_id.as_str())?;
        self.backend.commit(vec![WriteOp::put(
            enrollment_key(enrollment.enrollment_id.as_str()),
            encode(&enrollment),
        )])?;
        Ok(enrollment)
    }

    /// Append a task result for the current day or, until the end of the
    /// following day, for the previous one.
    pub fn record_task_result(&self, enrollment_id: &str, new: NewTaskResult) -> Result<TaskResult, StoreError> {
        let _guard = self.lock();
        let mut enrollment = self
            .load_enrollment(enrollment_id)?
            .ok_or_else(|| not_found("enrollment", enrollment_id))?;
        let now = self.clock.now();
        let total = enrollment.total_days();
        let today = enrollment.study_day_at(now);
        let status = effective_status(&enrollment, now);
        if status != enrollment.status {
            self.store_status(&mut enrollment, status)?;
        }
        if status != EnrollmentStatus::Active {
            return Err(StoreError::EnrollmentNotActive);
        }

        let day = match new.study_day {
            Some(day) => day,
            None => u32::try_from(today.max(0)).unwrap_or(u32::MAX),
        };
        if day > total && today > i64::from(total) {
            self.store_status(&mut enrollment, EnrollmentStatus::Finished)?;
            return Err(StoreError::EnrollmentNotActive);
        }
        if i64::from(day) > today {
            return Err(StoreError::FutureDay { day });
        }
        if i64::from(day) + 1 < today {
            return Err(StoreError::LateSubmission { day });
        }
        let task_id = new.task_id;
        if !is_scheduled(&enrollment.phase_sequence, &enrollment.snapshot, day, task_id.as_str()) {
            return Err(StoreError::UnscheduledTask { task: task_id, day });
        }
        if enrollment.result_for(task_id.as_str(), day).is_some() {
            return Err(StoreError::DuplicateResult { task: task_id, day });
        }
        let task = enrollment.snapshot.task(task_id.as_str()).expect("scheduled tasks exist");
        let payload = match (&task.content, new.payload) {
            (TaskContent::Checkmark {}, ResultPayload::Completed {}) => ResultPayload::Completed {},
            (TaskContent::Questionnaire { questions }, ResultPayload::Answers { answers }) => ResultPayload::Answers {
                answers: complete_with_defaults(questions, &answers, now)?,
            },
            _ => return Err(StoreError::PayloadMismatch(task_id)),
        };

        let result = TaskResult {
            result_id: self.entropy.uuid().to_string().into(),
            task_id,
            study_day: day,
            completed_at: now,
            payload,
        };
        let key = format!("{}{:08}", results_prefix(enrollment_id), enrollment.results.len());
        self.backend.commit(vec![WriteOp::put(key, encode(&result))])?;
        Ok(result)
    }

    fn store_status(&self, enrollment: &mut Enrollment, status: EnrollmentStatus) -> Result<(), StoreError> {
        enrollment.status = status;
        let mut record = enrollment.clone();
        record.results.clear();
        self.backend.commit(vec![WriteOp::put(
            enrollment_key(enrollment.enrollment_id.as_str()),
            encode(&record),
        )])
    }

    /// Permanently delete a running enrollment and all of its results.
    pub fn opt_out(&self, enrollment_id: &str) -> Result<(), StoreError> {
        let _guard = self.lock();
        let now = self.clock.now();
        let Some(enrollment) = self.load_enrollment(enrollment_id)? else {
            return if self.backend.get(&opted_out_key(enrollment_id))?.is_some() {
                Err(StoreError::EnrollmentNotActive)
            } else {
                Err(not_found("enrollment", enrollment_id))
            };
        };
        if effective_status(&enrollment, now) != EnrollmentStatus::Active {
            return Err(StoreError::EnrollmentNotActive);
        }
        let mut batch = self.deletion_ops(enrollment_id)?;
        batch.push(WriteOp::put(opted_out_key(enrollment_id), encode(&now)));
        self.backend.commit(batch)
    }

    pub fn schedule_view(&self, enrollment_id: &str) -> Result<ScheduleView, StoreError> {
        let enrollment = self.get_enrollment(enrollment_id)?;
        let today = enrollment.study_day_at(self.clock.now());
        views::schedule_view(&enrollment, today, enrollment.status)
    }

    /// Report as of now; `unlock` shows sections before the minimum length is reached.
    pub fn report(&self, enrollment_id: &str, unlock: bool) -> Result<ReportBundle, StoreError> {
        let enrollment = self.get_enrollment(enrollment_id)?;
        Ok(build_report(&enrollment, self.clock.now(), unlock))
    }

    /// CSV of all enrollments in a published study.
    pub fn export_csv(&self, study_id: &str, options: ExportOptions) -> Result<String, StoreError> {
        let study = self.get_study(study_id)?;
        if !study.metadata.published {
            return Err(StoreError::StudyNotPublished);
        }
        let enrollments: Vec<Enrollment> = self
            .all_enrollments()?
            .into_iter()
            .filter(|e| e.study_id == study_id)
            .collect();
        Ok(export::export_csv(&study.details, &enrollments, options))
    }
}

/// Running enrollments finish once the day after the last study day has passed.
pub fn effective_status(enrollment: &Enrollment, now: DateTime<Utc>) -> EnrollmentStatus {
    match enrollment.status {
        EnrollmentStatus::Active if enrollment.study_day_at(now) > i64::from(enrollment.total_days()) + 1 => {
            EnrollmentStatus::Finished
        }
        status => status,
    }
}
