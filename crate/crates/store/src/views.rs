use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use studyu_core::enrollment::{Enrollment, EnrollmentId, EnrollmentStatus};
use studyu_core::model::{StudyId, TaskId};
use studyu_core::schedule::{day_plan, DayPlan, PhaseKind};

use crate::StoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PhaseView {
    pub index: usize,
    pub kind: PhaseKind,
    pub start_day: u32,
    pub end_day: u32,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DayView {
    pub plan: DayPlan,
    pub completed: Vec<TaskId>,
}

/// The participant's journey: phases with dates and today's tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScheduleView {
    pub enrollment_id: EnrollmentId,
    pub study_id: StudyId,
    pub status: EnrollmentStatus,
    pub started_on: NaiveDate,
    /// Current study day; may lie outside `1..=total_days`.
    pub today: i64,
    pub total_days: u32,
    pub phases: Vec<PhaseView>,
    /// Earliest date on which the report can unlock with full adherence.
    pub results_available_on: NaiveDate,
    /// Today's tasks, absent outside the study period.
    pub day: Option<DayView>,
}

pub(crate) fn date_of(enrollment: &Enrollment, study_day: u32) -> NaiveDate {
    enrollment.started_on + Days::new(u64::from(study_day.saturating_sub(1)))
}

pub(crate) fn schedule_view(enrollment: &Enrollment, today: i64, status: EnrollmentStatus) -> Result<ScheduleView, StoreError> {
    let seq = &enrollment.phase_sequence;
    let phases = seq
        .phases
        .iter()
        .map(|p| PhaseView {
            index: p.index,
            kind: p.kind.clone(),
            start_day: p.start_day,
            end_day: p.end_day(),
            start_date: date_of(enrollment, p.start_day),
            end_date: date_of(enrollment, p.end_day()),
        })
        .collect();
    let day = match u32::try_from(today) {
        Ok(d) if (1..=seq.total_days).contains(&d) => {
            let plan = day_plan(seq, &enrollment.snapshot, enrollment.started_on, d)?;
            let completed = plan
                .tasks
                .iter()
                .filter(|t| enrollment.result_for(t.task_id.as_str(), d).is_some())
                .map(|t| t.task_id.clone())
                .collect();
            Some(DayView { plan, completed })
        }
        _ => None,
    };
    let minimum = enrollment.snapshot.minimum_study_length_days.get();
    Ok(ScheduleView {
        enrollment_id: enrollment.enrollment_id.clone(),
        study_id: enrollment.study_id.clone(),
        status,
        started_on: enrollment.started_on,
        today,
        total_days: seq.total_days,
        phases,
        results_available_on: date_of(enrollment, minimum),
        day,
    })
}
