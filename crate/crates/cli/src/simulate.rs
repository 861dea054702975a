//! Seeded simulated participants walking a study end to end.
//!
//! Outcome model for the primary numeric property:
//! `level + effect·[active = B] + trend·day + N(0, noise_sd²)`.
//! Every other question gets a random valid answer. Each participant draws
//! from its own ChaCha stream, so results do not depend on run order or transport.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use studyu_core::analysis::{ReportBundle, SectionBody, WaldStatus};
use studyu_core::enrollment::{Enrollment, ResultPayload};
use studyu_core::expression::{check_eligibility, next_question, FlowStep};
use studyu_core::model::{
    AnswerSet, AnswerValue, DataReference, Question, ResponseFormat, Study, TaskContent,
};
use studyu_core::schedule::day_plan;
use studyu_store::{
    EnrollmentRequest, ExportOptions, ManualClock, MemoryBackend, NewTaskResult, SeededEntropy, StoreError,
    TrialStore,
};

use crate::client::{ApiClient, ClientError};

/// Eligibility questionnaires are redrawn this many times before giving up.
const ELIGIBILITY_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationParams {
    pub participants: usize,
    pub seed: u64,
    /// Shift of the outcome while the second selected intervention is active.
    pub effect: f64,
    pub noise_sd: f64,
    /// Probability that any single task is completed.
    pub adherence: f64,
    /// Outcome change per study day.
    pub trend: f64,
    /// Outcome level without effect; the middle of the slider when absent.
    pub level: Option<f64>,
}

impl Default for SimulationParams {
    fn default() -> Self {
        Self {
            participants: 100,
            seed: 1,
            effect: 0.0,
            noise_sd: 1.0,
            adherence: 1.0,
            trend: 0.0,
            level: None,
        }
    }
}

impl SimulationParams {
    pub fn check(&self) -> Result<(), String> {
        let finite = [self.effect, self.noise_sd, self.adherence, self.trend, self.level.unwrap_or(0.0)];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err("simulation parameters must be finite".into());
        }
        if self.noise_sd < 0.0 {
            return Err("--noise-sd must not be negative".into());
        }
        if !(0.0..=1.0).contains(&self.adherence) {
            return Err("--adherence must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Failure reported by a transport, keyed by API error code.
#[derive(Debug, Clone, PartialEq)]
pub struct StepError {
    pub code: String,
    pub message: String,
}

impl From<StoreError> for StepError {
    fn from(e: StoreError) -> Self {
        Self {
            code: e.code().to_owned(),
            message: e.to_string(),
        }
    }
}

impl From<ClientError> for StepError {
    fn from(e: ClientError) -> Self {
        Self {
            code: e.code().to_owned(),
            message: e.to_string(),
        }
    }
}

/// What the simulator needs from a deployment.
pub trait Transport {
    fn create_user(&mut self) -> Result<String, StepError>;
    fn enroll(&mut self, request: &EnrollmentRequest) -> Result<Enrollment, StepError>;
    fn set_time(&mut self, at: DateTime<Utc>) -> Result<(), StepError>;
    fn record(&mut self, enrollment: &str, result: &NewTaskResult) -> Result<(), StepError>;
    fn report(&mut self, enrollment: &str) -> Result<ReportBundle, StepError>;
}

/// A private in-memory store on a manual clock, with reports unlocked as on a demo server.
pub struct InProcess {
    pub store: TrialStore,
    clock: Arc<ManualClock>,
}

impl InProcess {
    /// Fresh store with `study` published.
    pub fn new(study: &Study, seed: u64) -> Result<Self, StepError> {
        let clock = Arc::new(ManualClock::new(simulation_start()));
        let store = TrialStore::new(
            Arc::new(MemoryBackend::new()),
            clock.clone(),
            Arc::new(SeededEntropy::new(seed)),
        );
        let id = study.metadata.study_id.as_str();
        let rev = store.save_draft(study.metadata.clone(), study.details.clone(), 0)?;
        store.publish(id, rev)?;
        Ok(Self { store, clock })
    }

    pub fn export_csv(&self, study_id: &str) -> Result<String, StepError> {
        Ok(self.store.export_csv(study_id, ExportOptions::default())?)
    }
}

impl Transport for InProcess {
    fn create_user(&mut self) -> Result<String, StepError> {
        Ok(self.store.create_user(true)?.user_id.to_string())
    }

    fn enroll(&mut self, request: &EnrollmentRequest) -> Result<Enrollment, StepError> {
        Ok(self.store.enroll(request.clone())?)
    }

    fn set_time(&mut self, at: DateTime<Utc>) -> Result<(), StepError> {
        self.clock.set(at);
        Ok(())
    }

    fn record(&mut self, enrollment: &str, result: &NewTaskResult) -> Result<(), StepError> {
        self.store.record_task_result(enrollment, result.clone())?;
        Ok(())
    }

    fn report(&mut self, enrollment: &str) -> Result<ReportBundle, StepError> {
        Ok(self.store.report(enrollment, true)?)
    }
}

/// A running service; it must be on a settable clock and the client needs the researcher token.
pub struct OverHttp {
    pub client: ApiClient,
}

impl Transport for OverHttp {
    fn create_user(&mut self) -> Result<String, StepError> {
        Ok(self.client.create_user()?.user_id.to_string())
    }

    fn enroll(&mut self, request: &EnrollmentRequest) -> Result<Enrollment, StepError> {
        Ok(self.client.enroll(request)?)
    }

    fn set_time(&mut self, at: DateTime<Utc>) -> Result<(), StepError> {
        Ok(self.client.set_clock(at)?)
    }

    fn record(&mut self, enrollment: &str, result: &NewTaskResult) -> Result<(), StepError> {
        self.client.record(enrollment, result)?;
        Ok(())
    }

    fn report(&mut self, enrollment: &str) -> Result<ReportBundle, StepError> {
        Ok(self.client.report(enrollment)?)
    }
}

/// 09:00 UTC on the first simulated day.
pub fn simulation_start() -> DateTime<Utc> {
    Utc.from_utc_datetime(&NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(9, 0, 0).unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Decision {
    Significant,
    NotSignificant,
    NotAssessable,
    /// The report was still locked.
    Locked,
    /// The primary section, or an earlier step, failed; see `code`.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParticipantOutcome {
    pub participant: usize,
    pub selections: Vec<String>,
    pub schedule_seed: u64,
    pub decision: Decision,
    pub code: Option<String>,
    pub estimate: Option<f64>,
    pub standard_error: Option<f64>,
    pub statistic: Option<f64>,
    pub countable_days: u32,
    /// Task submissions the service refused.
    pub rejected_results: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationSummary {
    pub study_id: String,
    pub params: SimulationParams,
    pub participants: usize,
    pub significant: usize,
    pub not_significant: usize,
    pub not_assessable: usize,
    pub assessable: usize,
    pub significant_fraction: f64,
    /// Participants without a Wald decision, by reason.
    pub failures: BTreeMap<String, usize>,
    pub outcomes: Vec<ParticipantOutcome>,
}

fn slider_mid(study: &Study, reference: &DataReference) -> f64 {
    study
        .details
        .task(reference.task.as_str())
        .and_then(|t| t.questions().iter().find(|q| q.id.as_str() == reference.property.as_str()))
        .and_then(|q| q.response.slider())
        .map_or(0.0, |s| (s.minimum + s.maximum) / 2.0)
}

fn random_answer(question: &Question, rng: &mut ChaCha8Rng) -> AnswerValue {
    match &question.response {
        ResponseFormat::Boolean {} => AnswerValue::Boolean(rng.random_bool(0.5)),
        ResponseFormat::Choice { multiple, choices } => {
            let mut picked: Vec<_> = choices.iter().filter(|_| *multiple && rng.random_bool(0.5)).collect();
            if picked.is_empty() {
                picked.push(&choices[rng.random_range(0..choices.len())]);
            }
            AnswerValue::choice(picked.into_iter().map(|c| c.id.clone()))
        }
        ResponseFormat::VisualAnalogue(s) | ResponseFormat::AnnotatedScale(s) => {
            let steps = ((s.maximum - s.minimum) / s.step).floor() as u64;
            AnswerValue::Number(s.minimum + s.step * rng.random_range(0..=steps) as f64)
        }
    }
}

/// Answer questions in flow order; `fixed` supplies the value of a question when it returns one.
fn fill(
    questions: &[Question],
    at: DateTime<Utc>,
    rng: &mut ChaCha8Rng,
    mut fixed: impl FnMut(&Question, &mut ChaCha8Rng) -> Option<AnswerValue>,
) -> AnswerSet {
    let mut answers = AnswerSet::default();
    while let Ok(FlowStep::Ask(q)) = next_question(questions, &answers) {
        let value = fixed(q, rng).unwrap_or_else(|| random_answer(q, rng));
        if answers.record(q, value, at).is_err() {
            let fallback = random_answer(q, rng);
            answers.record(q, fallback, at).expect("random answers conform");
        }
    }
    answers
}

fn clamp_to_slider(question: &Question, value: f64) -> f64 {
    match question.response.slider() {
        Some(s) => value.clamp(s.minimum, s.maximum),
        None => value,
    }
}

fn fail(outcome: &mut ParticipantOutcome, err: StepError) {
    outcome.decision = Decision::Failed;
    outcome.code = Some(err.code);
}

/// Simulate one participant; errors end the participant, not the batch.
pub fn simulate_participant(
    study: &Study,
    params: &SimulationParams,
    index: usize,
    transport: &mut dyn Transport,
) -> ParticipantOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(index as u64);
    let mut outcome = ParticipantOutcome {
        participant: index + 1,
        selections: Vec::new(),
        schedule_seed: 0,
        decision: Decision::Failed,
        code: None,
        estimate: None,
        standard_error: None,
        statistic: None,
        countable_days: 0,
        rejected_results: 0,
    };
    let details = &study.details;
    let start = simulation_start();

    let mut eligibility = None;
    for _ in 0..ELIGIBILITY_ATTEMPTS {
        let answers = fill(&details.eligibility_questions, start, &mut rng, |_, _| None);
        let eligible = check_eligibility(&details.eligibility_criteria, &answers, &details.eligibility_questions)
            .is_ok_and(|v| v.eligible);
        if eligible {
            eligibility = Some(answers);
            break;
        }
    }
    let Some(eligibility_answers) = eligibility else {
        outcome.code = Some("not_eligible".into());
        return outcome;
    };
    let mut ids: Vec<_> = details.intervention_set.interventions.iter().map(|i| i.id.clone()).collect();
    ids.shuffle(&mut rng);
    ids.truncate(2);
    outcome.selections = ids.iter().map(|i| i.to_string()).collect();
    outcome.schedule_seed = rng.random();

    let reference = details.report_specification.primary.reference().clone();
    let level = params.level.unwrap_or_else(|| slider_mid(study, &reference));
    let noise = Normal::new(0.0, params.noise_sd).expect("noise sd checked");

    let enrollment = match transport.set_time(start).and_then(|_| transport.create_user()).and_then(|user| {
        transport.enroll(&EnrollmentRequest {
            user_id: user.into(),
            study_id: study.metadata.study_id.clone(),
            selections: ids,
            eligibility_answers,
            consent: true,
            seed: Some(outcome.schedule_seed),
            utc_offset_minutes: 0,
        })
    }) {
        Ok(e) => e,
        Err(err) => {
            fail(&mut outcome, err);
            return outcome;
        }
    };
    let eid = enrollment.enrollment_id.to_string();
    let seq = &enrollment.phase_sequence;
    let total = enrollment.total_days();

    for day in 1..=total {
        let now = start + Duration::days(i64::from(day) - 1);
        if let Err(err) = transport.set_time(now) {
            fail(&mut outcome, err);
            return outcome;
        }
        let plan = day_plan(seq, &enrollment.snapshot, enrollment.started_on, day).expect("day within the study");
        let on_b = plan.active.intervention() == Some(seq.intervention_b());
        for planned in &plan.tasks {
            if !rng.random_bool(params.adherence) {
                continue;
            }
            let task = enrollment.snapshot.task(planned.task_id.as_str()).expect("planned tasks exist");
            let payload = match &task.content {
                TaskContent::Checkmark {} => ResultPayload::Completed {},
                TaskContent::Questionnaire { questions } => {
                    let answers = fill(questions, now, &mut rng, |q, rng| {
                        let primary = task.id == reference.task && q.id.as_str() == reference.property.as_str();
                        primary.then(|| {
                            let mut y = level + params.trend * f64::from(day) + noise.sample(rng);
                            if on_b {
                                y += params.effect;
                            }
                            AnswerValue::Number(clamp_to_slider(q, y))
                        })
                    });
                    ResultPayload::Answers { answers }
                }
            };
            let result = NewTaskResult {
                task_id: task.id.clone(),
                study_day: Some(day),
                payload,
            };
            if transport.record(&eid, &result).is_err() {
                outcome.rejected_results += 1;
            }
        }
    }

    let report = match transport.report(&eid) {
        Ok(r) => r,
        Err(err) => {
            fail(&mut outcome, err);
            return outcome;
        }
    };
    outcome.countable_days = report.progress.countable_days;
    if report.locked {
        outcome.decision = Decision::Locked;
        return outcome;
    }
    match report.sections.first().map(|s| &s.body) {
        Some(SectionBody::LinearRegression(r)) => {
            outcome.decision = match r.decision.status {
                WaldStatus::Significant => Decision::Significant,
                WaldStatus::NotSignificant => Decision::NotSignificant,
                WaldStatus::NotAssessable => Decision::NotAssessable,
            };
            outcome.estimate = Some(r.decision.estimate);
            outcome.standard_error = Some(r.decision.standard_error);
            outcome.statistic = r.decision.statistic;
        }
        Some(SectionBody::Error { code, .. }) => outcome.code = Some(code.clone()),
        Some(SectionBody::Average(_)) => outcome.code = Some("primary_not_regression".into()),
        None => outcome.code = Some("empty_report".into()),
    }
    outcome
}

pub fn simulate(study: &Study, params: &SimulationParams, transport: &mut dyn Transport) -> SimulationSummary {
    let outcomes: Vec<ParticipantOutcome> = (0..params.participants)
        .map(|i| simulate_participant(study, params, i, transport))
        .collect();
    summarize(study, params, outcomes)
}

pub fn summarize(study: &Study, params: &SimulationParams, outcomes: Vec<ParticipantOutcome>) -> SimulationSummary {
    let count = |d: Decision| outcomes.iter().filter(|o| o.decision == d).count();
    let significant = count(Decision::Significant);
    let not_significant = count(Decision::NotSignificant);
    let mut failures = BTreeMap::new();
    for o in &outcomes {
        let reason = match o.decision {
            Decision::Locked => Some("locked".to_owned()),
            Decision::Failed => Some(o.code.clone().unwrap_or_else(|| "failed".into())),
            _ => None,
        };
        if let Some(r) = reason {
            *failures.entry(r).or_insert(0) += 1;
        }
    }
    let n = outcomes.len();
    SimulationSummary {
        study_id: study.metadata.study_id.to_string(),
        params: *params,
        participants: n,
        significant,
        not_significant,
        not_assessable: count(Decision::NotAssessable),
        assessable: significant + not_significant,
        significant_fraction: if n == 0 { 0.0 } else { significant as f64 / n as f64 },
        failures,
        outcomes,
    }
}

fn opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.digits$}"))
}

impl SimulationSummary {
    /// One line per participant, then the aggregate line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            let decision = match (o.decision, &o.code) {
                (Decision::Failed, Some(code)) => code.clone(),
                (d, _) => serde_json::to_value(d).unwrap().as_str().unwrap().to_owned(),
            };
            let _ = writeln!(
                out,
                "participant {:>5} arms={} schedule_seed={} days={} decision={} estimate={} se={} z={}{}",
                o.participant,
                o.selections.join("/"),
                o.schedule_seed,
                o.countable_days,
                decision,
                opt(o.estimate, 4),
                opt(o.standard_error, 4),
                opt(o.statistic, 3),
                if o.rejected_results > 0 { format!(" rejected={}", o.rejected_results) } else { String::new() },
            );
        }
        let _ = writeln!(
            out,
            "significant {}/{} fraction {:.4} assessable {} not_significant {} not_assessable {}",
            self.significant,
            self.participants,
            self.significant_fraction,
            self.assessable,
            self.not_significant,
            self.not_assessable,
        );
        if !self.failures.is_empty() {
            let parts: Vec<String> = self.failures.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "undecided {}", parts.join(" "));
        }
        out
    }
}
