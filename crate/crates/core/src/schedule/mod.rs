//! Crossover phase sequences, daily task plans and progress accounting.
//!
//! A cycle is one phase of each selected intervention. Sequence kinds fix the
//! order inside each cycle:
//!
//! * alternating: every cycle is `[A, B]`;
//! * counterbalanced: orientations mirror, `[A, B]`, `[B, A]`, `[A, B]`, ...;
//! * randomized: each cycle is `[B, A]` when the next [`SplitMix64`] output has
//!   its top bit set, `[A, B]` otherwise.
//!
//! An optional baseline phase always comes first.

mod rng;

use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rng::SplitMix64;

use crate::model::{InterventionId, SequenceKind, StudyDetails, StudySchedule, TaskId, TimeWindow};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("both selected interventions are {0}")]
    SameIntervention(InterventionId),
    #[error("study day {day} is outside 1..={total}")]
    DayOutOfRange { day: u32, total: u32 },
    #[error("task {task} is not scheduled on study day {day}")]
    UnscheduledCompletion { day: u32, task: TaskId },
    #[error("intervention {0} is not part of the study")]
    UnknownIntervention(InterventionId),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum PhaseKind {
    Baseline,
    Intervention { intervention: InterventionId },
}

impl PhaseKind {
    pub fn intervention(&self) -> Option<&InterventionId> {
        match self {
            PhaseKind::Baseline => None,
            PhaseKind::Intervention { intervention } => Some(intervention),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Phase {
    /// 0-based position in the sequence.
    pub index: usize,
    pub kind: PhaseKind,
    /// 1-based study day on which the phase starts.
    pub start_day: u32,
    pub length_days: u32,
}

impl Phase {
    pub fn end_day(&self) -> u32 {
        self.start_day + self.length_days - 1
    }

    pub fn contains(&self, day: u32) -> bool {
        day >= self.start_day && day <= self.end_day()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PhaseSequence {
    pub phases: Vec<Phase>,
    pub total_days: u32,
    pub seed: u64,
    /// The two compared interventions, A then B.
    pub selections: [InterventionId; 2],
}

impl PhaseSequence {
    pub fn phase_on(&self, day: u32) -> Option<&Phase> {
        self.phases.iter().find(|p| p.contains(day))
    }

    pub fn has_baseline(&self) -> bool {
        self.phases.first().is_some_and(|p| p.kind == PhaseKind::Baseline)
    }

    pub fn intervention_a(&self) -> &InterventionId {
        &self.selections[0]
    }

    pub fn intervention_b(&self) -> &InterventionId {
        &self.selections[1]
    }
}

pub fn total_duration_days(schedule: &StudySchedule) -> u32 {
    let phases = 2 * schedule.number_of_cycles.get() + u32::from(schedule.include_baseline);
    schedule.phase_duration_days.get() * phases
}

pub fn generate_phase_sequence(
    schedule: &StudySchedule,
    a: &InterventionId,
    b: &InterventionId,
    seed: u64,
) -> Result<PhaseSequence, ScheduleError> {
    if a == b {
        return Err(ScheduleError::SameIntervention(a.clone()));
    }
    let mut rng = SplitMix64::new(seed);
    let mut kinds = Vec::new();
    if schedule.include_baseline {
        kinds.push(PhaseKind::Baseline);
    }
    for cycle in 0..schedule.number_of_cycles.get() {
        let reversed = match schedule.sequence {
            SequenceKind::Alternating => false,
            SequenceKind::Counterbalanced => cycle % 2 == 1,
            SequenceKind::Randomized => rng.next_bit(),
        };
        let (first, second) = if reversed { (b, a) } else { (a, b) };
        kinds.push(PhaseKind::Intervention { intervention: first.clone() });
        kinds.push(PhaseKind::Intervention { intervention: second.clone() });
    }

    let length = schedule.phase_duration_days.get();
    let phases: Vec<Phase> = kinds
        .into_iter()
        .enumerate()
        .map(|(index, kind)| Phase {
            index,
            kind,
            start_day: 1 + index as u32 * length,
            length_days: length,
        })
        .collect();
    Ok(PhaseSequence {
        total_days: total_duration_days(schedule),
        phases,
        seed,
        selections: [a.clone(), b.clone()],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PlannedTaskKind {
    Intervention,
    Observation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlannedTask {
    pub task_id: TaskId,
    pub title: String,
    pub kind: PlannedTaskKind,
    pub windows: Vec<TimeWindow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DayPlan {
    pub study_day: u32,
    pub calendar_date: NaiveDate,
    pub phase_index: usize,
    pub active: PhaseKind,
    pub tasks: Vec<PlannedTask>,
}

impl DayPlan {
    pub fn intervention_tasks(&self) -> impl Iterator<Item = &PlannedTask> {
        self.tasks.iter().filter(|t| t.kind == PlannedTaskKind::Intervention)
    }

    pub fn observation_tasks(&self) -> impl Iterator<Item = &PlannedTask> {
        self.tasks.iter().filter(|t| t.kind == PlannedTaskKind::Observation)
    }
}

/// Tasks due on `study_day`, ordered by their earliest window start.
pub fn day_plan(
    seq: &PhaseSequence,
    study: &StudyDetails,
    start_date: NaiveDate,
    study_day: u32,
) -> Result<DayPlan, ScheduleError> {
    let phase = seq.phase_on(study_day).ok_or(ScheduleError::DayOutOfRange {
        day: study_day,
        total: seq.total_days,
    })?;

    let mut tasks = Vec::new();
    if let Some(id) = phase.kind.intervention() {
        let intervention = study
            .intervention(id.as_str())
            .ok_or_else(|| ScheduleError::UnknownIntervention(id.clone()))?;
        tasks.extend(intervention.tasks.iter().map(|t| (PlannedTaskKind::Intervention, t)));
    }
    tasks.extend(study.observations.iter().map(|o| (PlannedTaskKind::Observation, &o.task)));
    tasks.sort_by_key(|(_, t)| t.earliest_start());

    Ok(DayPlan {
        study_day,
        calendar_date: start_date + Days::new(u64::from(study_day - 1)),
        phase_index: phase.index,
        active: phase.kind.clone(),
        tasks: tasks
            .into_iter()
            .map(|(kind, t)| PlannedTask {
                task_id: t.id.clone(),
                title: t.title.clone(),
                kind,
                windows: t.schedule.clone(),
            })
            .collect(),
    })
}

/// A task marked done on a study day.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Completion {
    pub study_day: u32,
    pub task_id: TaskId,
}

impl Completion {
    pub fn new(study_day: u32, task_id: impl Into<TaskId>) -> Self {
        Self {
            study_day,
            task_id: task_id.into(),
        }
    }
}

/// Whether `task` is due on `day`.
pub fn is_scheduled(seq: &PhaseSequence, study: &StudyDetails, day: u32, task: &str) -> bool {
    let Some(phase) = seq.phase_on(day) else {
        return false;
    };
    if study.is_observation_task(task) {
        return true;
    }
    phase
        .kind
        .intervention()
        .and_then(|id| study.intervention(id.as_str()))
        .is_some_and(|i| i.tasks.iter().any(|t| t.id.as_str() == task))
}

/// Days on which every intervention task and at least one observation was completed.
pub fn countable_days(
    seq: &PhaseSequence,
    study: &StudyDetails,
    completions: &BTreeSet<Completion>,
) -> Result<BTreeSet<u32>, ScheduleError> {
    if let Some(bad) = completions
        .iter()
        .find(|c| !is_scheduled(seq, study, c.study_day, c.task_id.as_str()))
    {
        return Err(ScheduleError::UnscheduledCompletion {
            day: bad.study_day,
            task: bad.task_id.clone(),
        });
    }
    let days: BTreeSet<u32> = completions.iter().map(|c| c.study_day).collect();
    Ok(days
        .into_iter()
        .filter(|&day| is_countable(seq, study, completions, day))
        .collect())
}

fn is_countable(seq: &PhaseSequence, study: &StudyDetails, completions: &BTreeSet<Completion>, day: u32) -> bool {
    let done = |task: &TaskId| completions.contains(&Completion::new(day, task.clone()));
    let observed = study.observations.iter().any(|o| done(&o.task.id));
    let Some(phase) = seq.phase_on(day) else {
        return false;
    };
    let interventions_done = match phase.kind.intervention() {
        None => true,
        Some(id) => study
            .intervention(id.as_str())
            .is_some_and(|i| i.tasks.iter().all(|t| done(&t.id))),
    };
    observed && interventions_done
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PhaseProgress {
    pub phase_index: usize,
    pub completed_days: u32,
    pub length_days: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskCount {
    pub task_id: TaskId,
    pub completed: u32,
    pub scheduled_to_date: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProgressSummary {
    pub days_elapsed: u32,
    pub countable_days: u32,
    pub required_days: u32,
    pub per_phase_completed: Vec<PhaseProgress>,
    pub power_reached: bool,
    pub per_task_counts: Vec<TaskCount>,
}

/// Progress as of study day `today` (1-based; days after today are ignored).
///
/// Completions of tasks not due on their day are not counted.
pub fn progress(
    seq: &PhaseSequence,
    study: &StudyDetails,
    completions: &BTreeSet<Completion>,
    today: u32,
) -> ProgressSummary {
    let days_elapsed = today.min(seq.total_days);
    let relevant: BTreeSet<Completion> = completions
        .iter()
        .filter(|c| c.study_day <= days_elapsed && is_scheduled(seq, study, c.study_day, c.task_id.as_str()))
        .cloned()
        .collect();
    let countable = countable_days(seq, study, &relevant).unwrap_or_default();

    let per_phase_completed = seq
        .phases
        .iter()
        .map(|p| PhaseProgress {
            phase_index: p.index,
            completed_days: countable.iter().filter(|&&d| p.contains(d)).count() as u32,
            length_days: p.length_days,
        })
        .collect();

    let mut task_ids: Vec<&TaskId> = Vec::new();
    for id in &seq.selections {
        if let Some(intervention) = study.intervention(id.as_str()) {
            task_ids.extend(intervention.tasks.iter().map(|t| &t.id));
        }
    }
    task_ids.extend(study.observations.iter().map(|o| &o.task.id));
    let per_task_counts = task_ids
        .into_iter()
        .map(|task| TaskCount {
            task_id: task.clone(),
            completed: relevant.iter().filter(|c| &c.task_id == task).count() as u32,
            scheduled_to_date: (1..=days_elapsed)
                .filter(|&d| is_scheduled(seq, study, d, task.as_str()))
                .count() as u32,
        })
        .collect();

    let countable_days = countable.len() as u32;
    let required_days = study.minimum_study_length_days.get();
    ProgressSummary {
        days_elapsed,
        countable_days,
        required_days,
        per_phase_completed,
        power_reached: countable_days >= required_days,
        per_task_counts,
    }
}
