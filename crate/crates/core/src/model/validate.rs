use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::answer::conform_value;
use super::expression::{Expression, Predicate};
use super::types::*;
use crate::schedule::total_duration_days;

/// Deepest `Not` nesting accepted in an expression.
pub const MAX_EXPRESSION_DEPTH: usize = 32;

/// Column names the CSV export always emits.
pub const FIXED_EXPORT_COLUMNS: [&str; 7] = [
    "participant_id",
    "enrollment_day",
    "study_day",
    "phase_index",
    "active_intervention",
    "task_id",
    "property_id",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Finding {
    pub path: String,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.path, self.severity, self.message)
    }
}

/// Validation findings sorted by path.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReferenceError {
    #[error("no task {0}")]
    UnknownTask(String),
    #[error("task {task} has no property {property}")]
    UnknownProperty { task: String, property: String },
    #[error("property {property} of task {task} holds choices, which have no numeric or boolean value")]
    UnsupportedProperty { task: String, property: String },
}

/// Kind of value a task property carries.
pub fn property_kind(details: &StudyDetails, task: &str, property: &str) -> Result<ValueKind, ReferenceError> {
    let found = details
        .task(task)
        .ok_or_else(|| ReferenceError::UnknownTask(task.to_owned()))?;
    let unknown = || ReferenceError::UnknownProperty {
        task: task.to_owned(),
        property: property.to_owned(),
    };
    match &found.content {
        TaskContent::Checkmark {} if property == COMPLETED_PROPERTY => Ok(ValueKind::Boolean),
        TaskContent::Checkmark {} => Err(unknown()),
        TaskContent::Questionnaire { questions } => {
            let question = questions.iter().find(|q| q.id.as_str() == property).ok_or_else(unknown)?;
            match question.response {
                ResponseFormat::Boolean {} => Ok(ValueKind::Boolean),
                ResponseFormat::VisualAnalogue(_) | ResponseFormat::AnnotatedScale(_) => Ok(ValueKind::Numeric),
                ResponseFormat::Choice { .. } => Err(ReferenceError::UnsupportedProperty {
                    task: task.to_owned(),
                    property: property.to_owned(),
                }),
            }
        }
    }
}

struct Collector {
    findings: Vec<Finding>,
}

impl Collector {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            path: path.into(),
            severity: Severity::Error,
            message: message.into(),
        });
    }

    fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            path: path.into(),
            severity: Severity::Warning,
            message: message.into(),
        });
    }

    fn require_text(&mut self, path: String, value: &str, what: &str) {
        if value.trim().is_empty() {
            self.error(path, format!("{what} must not be empty"));
        }
    }

    fn unique<'a>(&mut self, seen: &mut HashSet<&'a str>, id: &'a str, path: String, what: &str) {
        if id.trim().is_empty() {
            self.error(path, format!("{what} id must not be empty"));
        } else if !seen.insert(id) {
            self.error(path, format!("duplicate {what} id {id:?}"));
        }
    }
}

/// Check every structural invariant of a study; `for_publish` adds the publish gate.
///
/// Pure and deterministic: findings are sorted by path, then severity and message.
pub fn validate_study(details: &StudyDetails, metadata: &StudyMetadata, for_publish: bool) -> ValidationReport {
    let mut c = Collector { findings: Vec::new() };

    c.require_text("$.metadata.studyId".into(), metadata.study_id.as_str(), "study id");
    c.require_text("$.metadata.title".into(), &metadata.title, "title");
    if for_publish {
        c.require_text(
            "$.metadata.irb.protocolNumber".into(),
            &metadata.irb.protocol_number,
            "IRB protocol number",
        );
    }

    check_interventions(&mut c, details);
    check_observations(&mut c, details);
    check_task_ids(&mut c, details);

    let questions_path = "$.details.eligibilityQuestions";
    check_questions(&mut c, &details.eligibility_questions, questions_path);
    let mut criterion_ids = HashSet::new();
    for (i, criterion) in details.eligibility_criteria.iter().enumerate() {
        let path = format!("$.details.eligibilityCriteria[{i}]");
        c.unique(&mut criterion_ids, criterion.id.as_str(), format!("{path}.id"), "criterion");
        c.require_text(format!("{path}.reason"), &criterion.reason, "exclusion reason");
        check_expression(
            &mut c,
            &criterion.expression,
            &details.eligibility_questions,
            None,
            &format!("{path}.expression"),
        );
    }
    if for_publish && !details.eligibility_criteria.is_empty() && details.eligibility_questions.is_empty() {
        c.error(
            questions_path,
            "eligibility criteria are defined but there are no eligibility questions",
        );
    }

    let total = total_duration_days(&details.schedule);
    if details.minimum_study_length_days.get() > total {
        c.error(
            "$.details.minimumStudyLengthDays",
            format!(
                "minimum study length of {} days exceeds the scheduled duration of {total} days",
                details.minimum_study_length_days
            ),
        );
    }

    if for_publish && details.consent.is_empty() {
        c.error("$.details.consent", "at least one consent item is required to publish");
    }
    let mut consent_ids = HashSet::new();
    for (i, item) in details.consent.iter().enumerate() {
        let path = format!("$.details.consent[{i}]");
        c.unique(&mut consent_ids, item.id.as_str(), format!("{path}.id"), "consent item");
        c.require_text(format!("{path}.title"), &item.title, "consent title");
        c.require_text(format!("{path}.text"), &item.text, "consent text");
    }

    let mut section_ids = HashSet::new();
    let sections = std::iter::once(("$.details.reportSpecification.primary".to_owned(), &details.report_specification.primary))
        .chain(
            details
                .report_specification
                .secondary
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("$.details.reportSpecification.secondary[{i}]"), s)),
        );
    for (path, section) in sections {
        c.unique(&mut section_ids, section.id.as_str(), format!("{path}.id"), "report section");
        check_reference(&mut c, details, section.reference(), &format!("{path}.content.reference"));
    }

    let mut export_ids = HashSet::new();
    let mut columns = HashSet::new();
    for (i, result) in details.results.iter().enumerate() {
        let path = format!("$.details.results[{i}]");
        c.unique(&mut export_ids, result.id.as_str(), format!("{path}.id"), "result");
        let column = result.column_name.as_str();
        if column.trim().is_empty() {
            c.error(format!("{path}.columnName"), "column name must not be empty");
        } else if FIXED_EXPORT_COLUMNS.contains(&column) {
            c.error(format!("{path}.columnName"), format!("column name {column:?} is reserved"));
        } else if !columns.insert(column) {
            c.error(format!("{path}.columnName"), format!("duplicate column name {column:?}"));
        }
        check_reference(&mut c, details, &result.reference, &format!("{path}.reference"));
    }

    let mut findings = c.findings;
    findings.sort();
    findings.dedup();
    ValidationReport { findings }
}

fn check_interventions(c: &mut Collector, details: &StudyDetails) {
    let interventions = &details.intervention_set.interventions;
    let base = "$.details.interventionSet.interventions";
    if interventions.len() < 2 {
        c.error(base, format!("at least 2 interventions are required, found {}", interventions.len()));
    }
    let mut ids = HashSet::new();
    for (i, intervention) in interventions.iter().enumerate() {
        let path = format!("{base}[{i}]");
        c.unique(&mut ids, intervention.id.as_str(), format!("{path}.id"), "intervention");
        c.require_text(format!("{path}.name"), &intervention.name, "intervention name");
        if intervention.description.trim().is_empty() {
            c.warning(format!("{path}.description"), "intervention has no description");
        }
        if intervention.tasks.is_empty() {
            c.error(format!("{path}.tasks"), "an intervention needs at least one task");
        }
        for (j, task) in intervention.tasks.iter().enumerate() {
            check_task(c, task, &format!("{path}.tasks[{j}]"));
        }
    }
}

fn check_observations(c: &mut Collector, details: &StudyDetails) {
    if details.observations.is_empty() {
        c.warning("$.details.observations", "study has no observations; reports will be empty");
    }
    let mut ids = HashSet::new();
    for (i, observation) in details.observations.iter().enumerate() {
        let path = format!("$.details.observations[{i}]");
        c.unique(&mut ids, observation.id.as_str(), format!("{path}.id"), "observation");
        c.require_text(format!("{path}.title"), &observation.title, "observation title");
        if observation.task.is_checkmark() {
            c.error(format!("{path}.task.content"), "observation tasks must be questionnaires");
        }
        check_task(c, &observation.task, &format!("{path}.task"));
    }
}

fn check_task_ids(c: &mut Collector, details: &StudyDetails) {
    let mut seen = HashSet::new();
    for (i, intervention) in details.intervention_set.interventions.iter().enumerate() {
        for (j, task) in intervention.tasks.iter().enumerate() {
            let path = format!("$.details.interventionSet.interventions[{i}].tasks[{j}].id");
            c.unique(&mut seen, task.id.as_str(), path, "task");
        }
    }
    for (i, observation) in details.observations.iter().enumerate() {
        let path = format!("$.details.observations[{i}].task.id");
        c.unique(&mut seen, observation.task.id.as_str(), path, "task");
    }
}

fn check_task(c: &mut Collector, task: &Task, path: &str) {
    c.require_text(format!("{path}.title"), &task.title, "task title");
    if task.schedule.is_empty() {
        c.warning(format!("{path}.schedule"), "task has no completion window");
    }
    for (i, window) in task.schedule.iter().enumerate() {
        if window.start >= window.end {
            c.error(format!("{path}.schedule[{i}]"), "window must end after it starts");
        }
        for (j, other) in task.schedule.iter().enumerate().skip(i + 1) {
            if window.overlaps(other) {
                c.error(format!("{path}.schedule[{j}]"), format!("window overlaps window {i}"));
            }
        }
    }
    if let TaskContent::Questionnaire { questions } = &task.content {
        let questions_path = format!("{path}.content.questions");
        if questions.is_empty() {
            c.error(questions_path.clone(), "a questionnaire needs at least one question");
        }
        check_questions(c, questions, &questions_path);
    }
}

fn check_questions(c: &mut Collector, questions: &[Question], base: &str) {
    let mut ids = HashSet::new();
    for (i, question) in questions.iter().enumerate() {
        let path = format!("{base}[{i}]");
        c.unique(&mut ids, question.id.as_str(), format!("{path}.id"), "question");
        c.require_text(format!("{path}.prompt"), &question.prompt, "prompt");
        check_response(c, &question.response, &format!("{path}.response"));
        if let Err(e) = conform_value(question, &question.default_answer) {
            c.error(format!("{path}.defaultAnswer"), e.to_string());
        }
        if let Some(conditional) = &question.conditional {
            check_expression(c, conditional, questions, Some(i), &format!("{path}.conditional"));
        }
    }
}

fn check_response(c: &mut Collector, response: &ResponseFormat, path: &str) {
    match response {
        ResponseFormat::Boolean {} => {}
        ResponseFormat::Choice { choices, .. } => {
            if choices.len() < 2 {
                c.error(format!("{path}.choices"), "a choice question needs at least 2 choices");
            }
            let mut ids = HashSet::new();
            for (i, choice) in choices.iter().enumerate() {
                c.unique(&mut ids, choice.id.as_str(), format!("{path}.choices[{i}].id"), "choice");
                c.require_text(format!("{path}.choices[{i}].text"), &choice.text, "choice text");
            }
        }
        ResponseFormat::VisualAnalogue(slider) | ResponseFormat::AnnotatedScale(slider) => {
            let finite = [slider.minimum, slider.maximum, slider.initial, slider.step]
                .iter()
                .all(|x| x.is_finite());
            if !finite {
                c.error(path, "slider bounds must be finite");
                return;
            }
            if slider.minimum >= slider.maximum {
                c.error(format!("{path}.maximum"), "maximum must exceed minimum");
            }
            if slider.step <= 0.0 {
                c.error(format!("{path}.step"), "step must be positive");
            } else if slider.minimum < slider.maximum && slider.step_count().is_none() {
                c.error(format!("{path}.step"), "range is not a whole number of steps");
            }
            if slider.initial < slider.minimum || slider.initial > slider.maximum {
                c.error(format!("{path}.initial"), "initial value lies outside the range");
            }
            for (i, annotation) in slider.annotations.iter().enumerate() {
                if annotation.value < slider.minimum || annotation.value > slider.maximum {
                    c.warning(format!("{path}.annotations[{i}]"), "annotation lies outside the range");
                }
            }
        }
    }
}

/// `before`: when set, the expression may only reference questions earlier than this index.
fn check_expression(c: &mut Collector, expr: &Expression, questions: &[Question], before: Option<usize>, path: &str) {
    if expr.depth() > MAX_EXPRESSION_DEPTH {
        c.error(path, format!("expression nests deeper than {MAX_EXPRESSION_DEPTH} levels"));
        return;
    }
    let (target, predicate) = expr.leaf();
    let Some(index) = questions.iter().position(|q| &q.id == target) else {
        c.error(path, format!("expression references unknown question {target:?}"));
        return;
    };
    if let Some(limit) = before {
        if index >= limit {
            c.error(path, format!("condition may only reference earlier questions, not {target:?}"));
        }
    }
    let question = &questions[index];
    match (predicate, &question.response) {
        (Predicate::Boolean { .. }, ResponseFormat::Boolean {}) => {}
        (Predicate::Choice { selected }, ResponseFormat::Choice { choices, .. }) => {
            if !choices.iter().any(|ch| &ch.id == selected) {
                c.error(path, format!("question {target:?} has no choice {selected:?}"));
            }
        }
        (Predicate::Numeric { value, .. }, ResponseFormat::VisualAnalogue(_) | ResponseFormat::AnnotatedScale(_)) => {
            if !value.is_finite() {
                c.error(path, "numeric comparison needs a finite constant");
            }
        }
        (_, response) => c.error(
            path,
            format!("predicate does not fit {} question {target:?}", response.kind_name()),
        ),
    }
}

fn check_reference(c: &mut Collector, details: &StudyDetails, reference: &DataReference, path: &str) {
    match property_kind(details, reference.task.as_str(), reference.property.as_str()) {
        Ok(kind) if kind == reference.kind => {}
        Ok(kind) => c.error(path, format!("reference expects a {} value but the property is {kind}", reference.kind)),
        Err(e) => c.error(path, e.to_string()),
    }
}
