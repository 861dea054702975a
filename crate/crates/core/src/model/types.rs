use std::fmt;
use std::num::NonZeroU32;

use chrono::{NaiveTime, Timelike};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::answer::AnswerValue;
use super::expression::Expression;
use super::ids::*;

/// Property exposed by every checkmark task.
pub const COMPLETED_PROPERTY: &str = "completed";

/// A complete study definition: the document researchers author and publish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Study {
    pub metadata: StudyMetadata,
    pub details: StudyDetails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StudyMetadata {
    pub study_id: StudyId,
    pub title: String,
    pub description: String,
    pub icon_name: String,
    pub contact: Contact,
    pub irb: IrbApproval,
    pub published: bool,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Contact {
    pub organization: String,
    pub researcher_name: String,
    pub email: String,
    pub website: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct IrbApproval {
    pub board_name: String,
    pub protocol_number: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StudyDetails {
    pub intervention_set: InterventionSet,
    pub observations: Vec<Observation>,
    pub eligibility_questions: Vec<Question>,
    pub eligibility_criteria: Vec<EligibilityCriterion>,
    pub schedule: StudySchedule,
    pub consent: Vec<ConsentItem>,
    pub report_specification: ReportSpecification,
    pub results: Vec<StudyResult>,
    pub minimum_study_length_days: NonZeroU32,
}

impl StudyDetails {
    pub fn intervention(&self, id: &str) -> Option<&Intervention> {
        self.intervention_set
            .interventions
            .iter()
            .find(|i| i.id.as_str() == id)
    }

    /// Every task of the study, intervention tasks first, in definition order.
    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.intervention_set
            .interventions
            .iter()
            .flat_map(|i| i.tasks.iter())
            .chain(self.observations.iter().map(|o| &o.task))
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks().find(|t| t.id.as_str() == id)
    }

    pub fn is_observation_task(&self, id: &str) -> bool {
        self.observations.iter().any(|o| o.task.id.as_str() == id)
    }

    /// Report sections in display order: primary first, then secondary.
    pub fn report_sections(&self) -> impl Iterator<Item = &ReportSection> {
        std::iter::once(&self.report_specification.primary)
            .chain(self.report_specification.secondary.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct InterventionSet {
    pub interventions: Vec<Intervention>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Intervention {
    pub id: InterventionId,
    pub name: String,
    pub description: String,
    pub icon_name: String,
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Task {
    pub id: TaskId,
    pub title: String,
    /// Completion windows within a day.
    pub schedule: Vec<TimeWindow>,
    pub content: TaskContent,
}

impl Task {
    pub fn questions(&self) -> &[Question] {
        match &self.content {
            TaskContent::Checkmark {} => &[],
            TaskContent::Questionnaire { questions } => questions,
        }
    }

    pub fn is_checkmark(&self) -> bool {
        matches!(self.content, TaskContent::Checkmark {})
    }

    pub fn earliest_start(&self) -> Option<TimeOfDay> {
        self.schedule.iter().map(|w| w.start).min()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum TaskContent {
    Checkmark {},
    Questionnaire { questions: Vec<Question> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TimeWindow {
    pub start: TimeOfDay,
    pub end: TimeOfDay,
}

impl TimeWindow {
    pub fn overlaps(&self, other: &TimeWindow) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Local wall-clock time with minute resolution, written `"HH:MM"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeOfDay(NaiveTime);

impl TimeOfDay {
    pub fn new(hour: u32, minute: u32) -> Option<Self> {
        NaiveTime::from_hms_opt(hour, minute, 0).map(Self)
    }

    pub fn time(&self) -> NaiveTime {
        self.0
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0.hour(), self.0.minute())
    }
}

impl std::str::FromStr for TimeOfDay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        let well_formed = bytes.len() == 5
            && bytes[2] == b':'
            && bytes.iter().enumerate().all(|(i, b)| i == 2 || b.is_ascii_digit());
        if !well_formed {
            return Err(format!("expected HH:MM, got {s:?}"));
        }
        let hour: u32 = s[..2].parse().map_err(|_| format!("bad hour in {s:?}"))?;
        let minute: u32 = s[3..].parse().map_err(|_| format!("bad minute in {s:?}"))?;
        TimeOfDay::new(hour, minute).ok_or_else(|| format!("time of day out of range: {s:?}"))
    }
}

impl Serialize for TimeOfDay {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeOfDay {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(de::Error::custom)
    }
}

/// `#RRGGBB` color, kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Color(String);

impl Color {
    pub fn parse(s: &str) -> Result<Self, String> {
        let b = s.as_bytes();
        if b.len() == 7 && b[0] == b'#' && b[1..].iter().all(u8::is_ascii_hexdigit) {
            Ok(Self(s.to_owned()))
        } else {
            Err(format!("expected #RRGGBB color, got {s:?}"))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Serialize for Color {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Color {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Color::parse(&raw).map_err(de::Error::custom)
    }
}

/// Observations are questionnaire tasks scheduled on every study day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Observation {
    pub id: ObservationId,
    pub title: String,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Question {
    pub id: QuestionId,
    pub prompt: String,
    pub rationale: String,
    pub response: ResponseFormat,
    /// Ask only when this evaluates true; otherwise `default_answer` applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditional: Option<Expression>,
    pub default_answer: AnswerValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum ResponseFormat {
    Boolean {},
    Choice { multiple: bool, choices: Vec<Choice> },
    VisualAnalogue(SliderConfig),
    AnnotatedScale(SliderConfig),
}

impl ResponseFormat {
    pub fn slider(&self) -> Option<&SliderConfig> {
        match self {
            ResponseFormat::VisualAnalogue(s) | ResponseFormat::AnnotatedScale(s) => Some(s),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ResponseFormat::Boolean {} => "boolean",
            ResponseFormat::Choice { .. } => "choice",
            ResponseFormat::VisualAnalogue(_) => "visualAnalogue",
            ResponseFormat::AnnotatedScale(_) => "annotatedScale",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Choice {
    pub id: ChoiceId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SliderConfig {
    pub minimum: f64,
    pub maximum: f64,
    pub initial: f64,
    pub step: f64,
    pub annotations: Vec<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<Gradient>,
}

/// Tolerance for slider grid arithmetic.
pub const GRID_TOLERANCE: f64 = 1e-9;

impl SliderConfig {
    /// Number of steps between minimum and maximum, if the range divides evenly.
    pub fn step_count(&self) -> Option<u64> {
        if !(self.step > 0.0) || !(self.maximum > self.minimum) {
            return None;
        }
        let steps = (self.maximum - self.minimum) / self.step;
        let rounded = steps.round();
        ((steps - rounded).abs() <= GRID_TOLERANCE * rounded.max(1.0)).then_some(rounded as u64)
    }

    /// Snap `value` to the nearest grid point `minimum + k·step`.
    /// Returns `None` when the value lies outside `[minimum, maximum]`.
    pub fn snap(&self, value: f64) -> Option<f64> {
        if !value.is_finite() {
            return None;
        }
        let span = self.maximum - self.minimum;
        let tolerance = GRID_TOLERANCE * span.abs().max(1.0);
        if value < self.minimum - tolerance || value > self.maximum + tolerance {
            return None;
        }
        let k = ((value - self.minimum) / self.step).round();
        let snapped = self.minimum + k * self.step;
        Some(snapped.clamp(self.minimum, self.maximum))
    }

    /// Every grid value, lowest first.
    pub fn grid(&self) -> Vec<f64> {
        match self.step_count() {
            Some(n) => (0..=n).map(|k| self.minimum + k as f64 * self.step).collect(),
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Annotation {
    pub value: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Gradient {
    pub min_color: Color,
    pub max_color: Color,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EligibilityCriterion {
    pub id: CriterionId,
    /// Shown to the participant when the criterion excludes them.
    pub reason: String,
    pub expression: Expression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StudySchedule {
    pub number_of_cycles: NonZeroU32,
    pub phase_duration_days: NonZeroU32,
    pub include_baseline: bool,
    pub sequence: SequenceKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SequenceKind {
    Alternating,
    Counterbalanced,
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConsentItem {
    pub id: ConsentItemId,
    pub title: String,
    pub text: String,
    pub icon_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ReportSpecification {
    pub primary: ReportSection,
    pub secondary: Vec<ReportSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ReportSection {
    pub id: SectionId,
    pub title: String,
    pub content: SectionContent,
}

impl ReportSection {
    pub fn reference(&self) -> &DataReference {
        match &self.content {
            SectionContent::Average { reference, .. }
            | SectionContent::LinearRegression { reference, .. } => reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum SectionContent {
    #[serde(rename_all = "camelCase")]
    Average {
        reference: DataReference,
        aggregate: Aggregation,
    },
    #[serde(rename_all = "camelCase")]
    LinearRegression {
        reference: DataReference,
        improvement_direction: ImprovementDirection,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Aggregation {
    Day,
    Phase,
    Intervention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ImprovementDirection {
    HigherIsBetter,
    LowerIsBetter,
}

/// Points at one property of one task's results.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DataReference {
    pub task: TaskId,
    pub property: PropertyId,
    pub kind: ValueKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ValueKind {
    Numeric,
    Boolean,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueKind::Numeric => "numeric",
            ValueKind::Boolean => "boolean",
        })
    }
}

/// One exported column of the researcher CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StudyResult {
    pub id: ExportId,
    pub reference: DataReference,
    pub column_name: String,
}
