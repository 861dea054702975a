#![allow(dead_code)]

use std::sync::Arc;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use studyu_core::enrollment::{Enrollment, ResultPayload};
use studyu_core::fixtures;
use studyu_core::model::{AnswerSet, AnswerValue, Question};
use studyu_store::{
    EnrollmentRequest, KvBackend, ManualClock, MemoryBackend, NewTaskResult, SeededEntropy, TrialStore,
};

pub struct Harness {
    pub store: TrialStore,
    pub clock: Arc<ManualClock>,
    pub backend: Arc<MemoryBackend>,
}

pub fn start() -> DateTime<Utc> {
    Utc.from_utc_datetime(&NaiveDate::from_ymd_opt(2024, 4, 1).unwrap().and_hms_opt(9, 0, 0).unwrap())
}

impl Harness {
    pub fn new() -> Self {
        let clock = Arc::new(ManualClock::new(start()));
        let backend = Arc::new(MemoryBackend::new());
        let store = TrialStore::new(backend.clone(), clock.clone(), Arc::new(SeededEntropy::new(11)));
        Self { store, clock, backend }
    }

    /// Save and publish the back-pain fixture.
    pub fn publish_back_pain(&self) {
        let study = fixtures::back_pain();
        let rev = self.store.save_draft(study.metadata, study.details, 0).unwrap();
        self.store.publish("back-pain", rev).unwrap();
    }

    /// Move the clock to 09:00 UTC on the given study day of an enrollment started on day 1.
    pub fn goto_day(&self, day: u32) {
        self.clock.set(start() + Duration::days(i64::from(day) - 1));
    }

    /// Move the clock to 09:00 UTC on a study day of `enrollment`.
    pub fn goto(&self, enrollment: &Enrollment, day: u32) {
        let first = Utc.from_utc_datetime(&enrollment.started_on.and_hms_opt(9, 0, 0).unwrap());
        self.clock.set(first + Duration::days(i64::from(day) - 1));
    }

    pub fn enroll(&self, user: &str) -> Enrollment {
        self.store.enroll(request(user, &["willow_bark_tea", "arnica_balm"])).unwrap()
    }

    pub fn raw(&self, key: &str) -> Option<String> {
        self.backend.get(key).unwrap()
    }
}

pub fn eligible_answers() -> AnswerSet {
    let questions = fixtures::back_pain().details.eligibility_questions;
    answers(
        &questions,
        &[
            ("chronic_pain", AnswerValue::Boolean(true)),
            ("sex", AnswerValue::choice(["female"])),
            ("pregnant", AnswerValue::Boolean(false)),
        ],
    )
}

pub fn answers(questions: &[Question], values: &[(&str, AnswerValue)]) -> AnswerSet {
    let mut set = AnswerSet::default();
    for (id, value) in values {
        let q = questions.iter().find(|q| q.id.as_str() == *id).unwrap();
        set.record(q, value.clone(), start()).unwrap();
    }
    set
}

pub fn request(user: &str, selections: &[&str]) -> EnrollmentRequest {
    EnrollmentRequest {
        user_id: user.into(),
        study_id: "back-pain".into(),
        selections: selections.iter().map(|s| (*s).into()).collect(),
        eligibility_answers: eligible_answers(),
        consent: true,
        seed: Some(7),
        utc_offset_minutes: 0,
    }
}

pub fn checkmark(task: &str, day: u32) -> NewTaskResult {
    NewTaskResult {
        task_id: task.into(),
        study_day: Some(day),
        payload: ResultPayload::Completed {},
    }
}

pub fn pain(enrollment: &Enrollment, day: u32, intensity: f64, painkiller: bool) -> NewTaskResult {
    let questions = enrollment.snapshot.task("pain_diary").unwrap().questions().to_vec();
    let mut values = vec![
        ("pain_intensity", AnswerValue::Number(intensity)),
        ("painkiller_taken", AnswerValue::Boolean(painkiller)),
    ];
    if painkiller {
        values.push(("painkiller_relief", AnswerValue::Number(2.0)));
    }
    NewTaskResult {
        task_id: "pain_diary".into(),
        study_day: Some(day),
        payload: ResultPayload::Answers {
            answers: answers(&questions, &values),
        },
    }
}

/// Intervention task ids active on `day`.
pub fn intervention_tasks(enrollment: &Enrollment, day: u32) -> Vec<String> {
    let phase = enrollment.phase_sequence.phase_on(day).unwrap();
    match phase.kind.intervention() {
        Some(id) => enrollment
            .snapshot
            .intervention(id.as_str())
            .unwrap()
            .tasks
            .iter()
            .map(|t| t.id.to_string())
            .collect(),
        None => Vec::new(),
    }
}

/// Complete every task on each day in `days`, moving the clock along.
pub fn walk(h: &Harness, enrollment: &Enrollment, days: std::ops::RangeInclusive<u32>) {
    for day in days {
        h.goto(enrollment, day);
        for task in intervention_tasks(enrollment, day) {
            h.store
                .record_task_result(enrollment.enrollment_id.as_str(), checkmark(&task, day))
                .unwrap();
        }
        let active_b = enrollment.phase_sequence.phase_on(day).unwrap().kind.intervention()
            == Some(enrollment.phase_sequence.intervention_b());
        let value = if active_b { 3.0 } else { 6.0 } + f64::from(day % 3);
        h.store
            .record_task_result(enrollment.enrollment_id.as_str(), pain(enrollment, day, value, day % 4 == 0))
            .unwrap();
    }
}
