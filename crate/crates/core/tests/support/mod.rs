//! Builders for enrollments with hand-written results.
#![allow(dead_code)]

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use studyu_core::enrollment::{Enrollment, EnrollmentStatus, ResultPayload, TaskResult};
use studyu_core::model::{AnswerSet, AnswerValue, Study};
use studyu_core::schedule::generate_phase_sequence;

pub fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 4, 1).unwrap()
}

/// Noon UTC on `study_day` of an enrollment started on [`start_date`].
pub fn noon(study_day: u32) -> DateTime<Utc> {
    Utc.from_utc_datetime(&start_date().and_hms_opt(12, 0, 0).unwrap()) + Duration::days(i64::from(study_day) - 1)
}

pub fn enroll(study: &Study, a: &str, b: &str, seed: u64) -> Enrollment {
    let details = study.details.clone();
    let phase_sequence = generate_phase_sequence(&details.schedule, &a.into(), &b.into(), seed).unwrap();
    Enrollment {
        enrollment_id: "enrollment-1".into(),
        user_id: "user-1".into(),
        study_id: study.metadata.study_id.clone(),
        study_revision: study.metadata.revision,
        snapshot: details,
        selections: [a.into(), b.into()],
        phase_sequence,
        eligibility_answers: AnswerSet::default(),
        consent_given_at: noon(1),
        started_on: start_date(),
        utc_offset_minutes: 0,
        status: EnrollmentStatus::Active,
        results: Vec::new(),
    }
}

pub fn complete(enrollment: &mut Enrollment, day: u32, task: &str) {
    push(enrollment, day, task, ResultPayload::Completed {});
}

/// Answer questions of an observation task by id.
pub fn answer(enrollment: &mut Enrollment, day: u32, task: &str, values: &[(&str, AnswerValue)]) {
    let questions = enrollment.snapshot.task(task).unwrap().questions().to_vec();
    let mut answers = AnswerSet::default();
    for (id, value) in values {
        let question = questions.iter().find(|q| q.id.as_str() == *id).unwrap();
        answers.record(question, value.clone(), noon(day)).unwrap();
    }
    push(enrollment, day, task, ResultPayload::Answers { answers });
}

fn push(enrollment: &mut Enrollment, day: u32, task: &str, payload: ResultPayload) {
    let n = enrollment.results.len();
    enrollment.results.push(TaskResult {
        result_id: format!("result-{n}").into(),
        task_id: task.into(),
        study_day: day,
        completed_at: noon(day) + Duration::seconds(n as i64),
        payload,
    });
}

/// Complete the active intervention's tasks on `day` (none in a baseline phase).
pub fn do_interventions(enrollment: &mut Enrollment, day: u32) {
    let phase = enrollment.phase_sequence.phase_on(day).unwrap().clone();
    if let Some(id) = phase.kind.intervention() {
        let tasks: Vec<String> = enrollment
            .snapshot
            .intervention(id.as_str())
            .unwrap()
            .tasks
            .iter()
            .map(|t| t.id.to_string())
            .collect();
        for task in tasks {
            complete(enrollment, day, &task);
        }
    }
}
