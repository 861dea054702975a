use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::ids::{ChoiceId, QuestionId};
use super::types::{Question, ResponseFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "camelCase", deny_unknown_fields)]
pub enum AnswerValue {
    Boolean(bool),
    Choice(BTreeSet<ChoiceId>),
    Number(f64),
}

impl AnswerValue {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AnswerValue::Boolean(_) => "boolean",
            AnswerValue::Choice(_) => "choice",
            AnswerValue::Number(_) => "number",
        }
    }

    pub fn choice<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<ChoiceId>,
    {
        AnswerValue::Choice(ids.into_iter().map(Into::into).collect())
    }

    /// Numeric view used by reports: booleans map to 0/1, choices have none.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            AnswerValue::Boolean(b) => Some(if *b { 1.0 } else { 0.0 }),
            AnswerValue::Number(x) => Some(*x),
            AnswerValue::Choice(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Answer {
    pub question_id: QuestionId,
    pub value: AnswerValue,
    pub answered_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnswerError {
    #[error("question {question} expects a {expected} answer, got {got}")]
    KindMismatch {
        question: QuestionId,
        expected: &'static str,
        got: &'static str,
    },
    #[error("question {question} has no choice {choice}")]
    UnknownChoice { question: QuestionId, choice: ChoiceId },
    #[error("question {question} needs exactly one choice, got {count}")]
    SingleChoiceViolated { question: QuestionId, count: usize },
    #[error("question {question} needs at least one choice")]
    EmptySelection { question: QuestionId },
    #[error("answer {value} to question {question} is outside the slider range")]
    OutOfRange { question: QuestionId, value: f64 },
}

/// Type-check `value` against `question`; numeric answers come back snapped to the slider grid.
pub fn conform_value(question: &Question, value: &AnswerValue) -> Result<AnswerValue, AnswerError> {
    let mismatch = |expected| AnswerError::KindMismatch {
        question: question.id.clone(),
        expected,
        got: value.kind_name(),
    };
    match (&question.response, value) {
        (ResponseFormat::Boolean {}, AnswerValue::Boolean(_)) => Ok(value.clone()),
        (ResponseFormat::Boolean {}, _) => Err(mismatch("boolean")),
        (ResponseFormat::Choice { multiple, choices }, AnswerValue::Choice(selected)) => {
            if let Some(unknown) = selected.iter().find(|c| !choices.iter().any(|x| &x.id == *c)) {
                return Err(AnswerError::UnknownChoice {
                    question: question.id.clone(),
                    choice: unknown.clone(),
                });
            }
            if !multiple && selected.len() != 1 {
                return Err(AnswerError::SingleChoiceViolated {
                    question: question.id.clone(),
                    count: selected.len(),
                });
            }
            if selected.is_empty() {
                return Err(AnswerError::EmptySelection {
                    question: question.id.clone(),
                });
            }
            Ok(value.clone())
        }
        (ResponseFormat::Choice { .. }, _) => Err(mismatch("choice")),
        (ResponseFormat::VisualAnalogue(slider) | ResponseFormat::AnnotatedScale(slider), AnswerValue::Number(x)) => slider
            .snap(*x)
            .map(AnswerValue::Number)
            .ok_or(AnswerError::OutOfRange {
                question: question.id.clone(),
                value: *x,
            }),
        (ResponseFormat::VisualAnalogue(_) | ResponseFormat::AnnotatedScale(_), _) => Err(mismatch("number")),
    }
}

/// Answers keyed by question, in the order they were given.
///
/// Serialized as a JSON array of [`Answer`]s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnswerSet {
    answers: IndexMap<QuestionId, Answer>,
}

impl AnswerSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, question: &str) -> Option<&Answer> {
        self.answers.get(question)
    }

    pub fn contains(&self, question: &str) -> bool {
        self.answers.contains_key(question)
    }

    pub fn position(&self, question: &str) -> Option<usize> {
        self.answers.get_index_of(question)
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Answer> {
        self.answers.values()
    }

    /// Insert without type-checking. Replaces an existing answer in place.
    pub fn insert_unchecked(&mut self, answer: Answer) {
        self.answers.insert(answer.question_id.clone(), answer);
    }

    /// Type-check, snap and insert.
    pub fn record(
        &mut self,
        question: &Question,
        value: AnswerValue,
        answered_at: DateTime<Utc>,
    ) -> Result<(), AnswerError> {
        let value = conform_value(question, &value)?;
        self.insert_unchecked(Answer {
            question_id: question.id.clone(),
            value,
            answered_at,
        });
        Ok(())
    }

    /// Keep only the first `len` answers.
    pub fn truncate(&mut self, len: usize) {
        self.answers.truncate(len);
    }
}

impl FromIterator<Answer> for AnswerSet {
    fn from_iter<I: IntoIterator<Item = Answer>>(iter: I) -> Self {
        let mut set = AnswerSet::new();
        for answer in iter {
            set.insert_unchecked(answer);
        }
        set
    }
}

impl Serialize for AnswerSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.answers.values())
    }
}

impl<'de> Deserialize<'de> for AnswerSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let answers = Vec::<Answer>::deserialize(deserializer)?;
        let mut set = AnswerSet::new();
        for answer in answers {
            if set.contains(answer.question_id.as_str()) {
                return Err(serde::de::Error::custom(format!(
                    "duplicate answer for question {}",
                    answer.question_id
                )));
            }
            set.insert_unchecked(answer);
        }
        Ok(set)
    }
}
