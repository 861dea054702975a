//! A participant's running copy of a study (snapshot, selections, schedule) and their task results.

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{string_id, AnswerSet, InterventionId, StudyDetails, StudyId, TaskId};
use crate::schedule::{Completion, PhaseSequence};

string_id!(
    /// Pseudonymous enrollment identifier; the only participant key researchers ever see.
    EnrollmentId
);
string_id!(
    /// Random anonymous account identifier (UUID v4 text).
    UserId
);
string_id!(ResultId);

/// Marker that replaces the user id of retained enrollments when the account is deleted.
pub const DELETED_USER: &str = "deleted-user";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EnrollmentStatus {
    Active,
    Finished,
    OptedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum ResultPayload {
    Completed {},
    Answers { answers: AnswerSet },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskResult {
    pub result_id: ResultId,
    pub task_id: TaskId,
    pub study_day: u32,
    pub completed_at: DateTime<Utc>,
    pub payload: ResultPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Enrollment {
    pub enrollment_id: EnrollmentId,
    pub user_id: UserId,
    pub study_id: StudyId,
    pub study_revision: u64,
    /// Deep copy of the study taken at enrollment.
    pub snapshot: StudyDetails,
    pub selections: [InterventionId; 2],
    pub phase_sequence: PhaseSequence,
    pub eligibility_answers: AnswerSet,
    pub consent_given_at: DateTime<Utc>,
    /// Local calendar date of study day 1.
    pub started_on: NaiveDate,
    /// Participant's UTC offset recorded at enrollment; fixes day boundaries for the whole study.
    pub utc_offset_minutes: i32,
    pub status: EnrollmentStatus,
    pub results: Vec<TaskResult>,
}

impl Enrollment {
    /// 1-based study day containing `at` in the participant's recorded local time.
    /// Zero or negative before the study starts.
    pub fn study_day_at(&self, at: DateTime<Utc>) -> i64 {
        let local = (at + Duration::minutes(i64::from(self.utc_offset_minutes))).date_naive();
        (local - self.started_on).num_days() + 1
    }

    pub fn total_days(&self) -> u32 {
        self.phase_sequence.total_days
    }

    pub fn completions(&self) -> BTreeSet<Completion> {
        self.results
            .iter()
            .map(|r| Completion::new(r.study_day, r.task_id.clone()))
            .collect()
    }

    pub fn result_for(&self, task: &str, study_day: u32) -> Option<&TaskResult> {
        self.results
            .iter()
            .find(|r| r.study_day == study_day && r.task_id.as_str() == task)
    }
}
