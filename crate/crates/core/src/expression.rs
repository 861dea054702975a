//! Evaluation of eligibility expressions and the one-question-at-a-time flow.
//!
//! Questions whose conditional evaluates false are skipped and count as
//! answered with their default. Unanswered questions inside an expression
//! likewise evaluate through their default answer.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AnswerError, AnswerSet, AnswerValue, CriterionId, EligibilityCriterion, Expression, Predicate, Question,
    QuestionId,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpressionError {
    #[error("unknown question {0}")]
    UnknownQuestion(QuestionId),
    #[error("question {0} was answered before an earlier question")]
    OutOfOrderAnswer(QuestionId),
    #[error("question {0} is skipped by its condition but carries a non-default answer")]
    SkippedQuestionAnswered(QuestionId),
    #[error("predicate on question {0} does not match its answer type")]
    PredicateMismatch(QuestionId),
    #[error("questionnaire incomplete: question {0} is still unanswered")]
    IncompleteQuestionnaire(QuestionId),
    #[error(transparent)]
    InvalidAnswer(#[from] AnswerError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowStep<'a> {
    Ask(&'a Question),
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FailedCriterion {
    pub criterion_id: CriterionId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EligibilityVerdict {
    pub eligible: bool,
    pub failed_criteria: Vec<FailedCriterion>,
}

fn find<'a>(questions: &'a [Question], id: &str) -> Result<&'a Question, ExpressionError> {
    questions
        .iter()
        .find(|q| q.id.as_str() == id)
        .ok_or_else(|| ExpressionError::UnknownQuestion(QuestionId::new(id)))
}

fn effective_value<'a>(question: &'a Question, answers: &'a AnswerSet) -> &'a AnswerValue {
    answers
        .get(question.id.as_str())
        .map(|a| &a.value)
        .unwrap_or(&question.default_answer)
}

fn test_predicate(target: &QuestionId, predicate: &Predicate, value: &AnswerValue) -> Result<bool, ExpressionError> {
    match (predicate, value) {
        (Predicate::Boolean { equals }, AnswerValue::Boolean(b)) => Ok(b == equals),
        (Predicate::Choice { selected }, AnswerValue::Choice(set)) => Ok(set.contains(selected)),
        (Predicate::Numeric { operator, value: constant }, AnswerValue::Number(x)) => Ok(operator.holds(*x, *constant)),
        _ => Err(ExpressionError::PredicateMismatch(target.clone())),
    }
}

pub fn evaluate_expression(expr: &Expression, answers: &AnswerSet, questions: &[Question]) -> Result<bool, ExpressionError> {
    match expr {
        Expression::Value { target, predicate } => {
            let question = find(questions, target.as_str())?;
            test_predicate(target, predicate, effective_value(question, answers))
        }
        Expression::Not { expression } => Ok(!evaluate_expression(expression, answers, questions)?),
    }
}

fn is_asked(question: &Question, answers: &AnswerSet, questions: &[Question]) -> Result<bool, ExpressionError> {
    match &question.conditional {
        Some(condition) => evaluate_expression(condition, answers, questions),
        None => Ok(true),
    }
}

/// The first question still to ask, or `Done`.
pub fn next_question<'a>(questions: &'a [Question], answers: &AnswerSet) -> Result<FlowStep<'a>, ExpressionError> {
    let mut last_position = None;
    for answer in answers.iter() {
        let index = questions
            .iter()
            .position(|q| q.id == answer.question_id)
            .ok_or_else(|| ExpressionError::UnknownQuestion(answer.question_id.clone()))?;
        if last_position.is_some_and(|last| index < last) {
            return Err(ExpressionError::OutOfOrderAnswer(answer.question_id.clone()));
        }
        last_position = Some(index);
    }

    for (i, question) in questions.iter().enumerate() {
        let answered = answers.get(question.id.as_str());
        if !is_asked(question, answers, questions)? {
            if answered.is_some_and(|a| a.value != question.default_answer) {
                return Err(ExpressionError::SkippedQuestionAnswered(question.id.clone()));
            }
            continue;
        }
        if answered.is_some() {
            continue;
        }
        if let Some(later) = questions[i + 1..].iter().find(|q| answers.contains(q.id.as_str())) {
            return Err(ExpressionError::OutOfOrderAnswer(later.id.clone()));
        }
        return Ok(FlowStep::Ask(question));
    }
    Ok(FlowStep::Done)
}

/// Replace the answer to `question_id` and drop every answer given after it.
pub fn amend_answer(
    questions: &[Question],
    answers: &AnswerSet,
    question_id: &str,
    value: AnswerValue,
    answered_at: DateTime<Utc>,
) -> Result<AnswerSet, ExpressionError> {
    let position = answers
        .position(question_id)
        .ok_or_else(|| ExpressionError::UnknownQuestion(QuestionId::new(question_id)))?;
    let question = find(questions, question_id)?;
    let mut amended = answers.clone();
    amended.truncate(position);
    amended.record(question, value, answered_at)?;
    Ok(amended)
}

/// All criteria must hold; every failing criterion is reported, in definition order.
pub fn check_eligibility(
    criteria: &[EligibilityCriterion],
    answers: &AnswerSet,
    questions: &[Question],
) -> Result<EligibilityVerdict, ExpressionError> {
    if let FlowStep::Ask(pending) = next_question(questions, answers)? {
        return Err(ExpressionError::IncompleteQuestionnaire(pending.id.clone()));
    }
    let mut failed_criteria = Vec::new();
    for criterion in criteria {
        if !evaluate_expression(&criterion.expression, answers, questions)? {
            failed_criteria.push(FailedCriterion {
                criterion_id: criterion.id.clone(),
                reason: criterion.reason.clone(),
            });
        }
    }
    Ok(EligibilityVerdict {
        eligible: failed_criteria.is_empty(),
        failed_criteria,
    })
}

/// Type-check and snap externally supplied answers against their questions.
pub fn conform_answers(questions: &[Question], answers: &AnswerSet) -> Result<AnswerSet, ExpressionError> {
    let mut out = AnswerSet::new();
    for answer in answers.iter() {
        let question = find(questions, answer.question_id.as_str())?;
        out.record(question, answer.value.clone(), answer.answered_at)?;
    }
    Ok(out)
}

/// Validate a finished questionnaire run and fill skipped questions with their defaults.
///
/// The result lists answers in question order.
pub fn complete_with_defaults(
    questions: &[Question],
    answers: &AnswerSet,
    filled_at: DateTime<Utc>,
) -> Result<AnswerSet, ExpressionError> {
    let answers = conform_answers(questions, answers)?;
    if let FlowStep::Ask(pending) = next_question(questions, &answers)? {
        return Err(ExpressionError::IncompleteQuestionnaire(pending.id.clone()));
    }
    let mut complete = AnswerSet::new();
    for question in questions {
        match answers.get(question.id.as_str()) {
            Some(answer) => complete.insert_unchecked(answer.clone()),
            None => complete.record(question, question.default_answer.clone(), filled_at)?,
        }
    }
    Ok(complete)
}
