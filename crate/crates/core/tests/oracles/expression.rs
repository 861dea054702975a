//! Boolean questionnaires evaluated by brute force, without the engine's types.

use chrono::{TimeZone, Utc};
use studyu_core::expression::{check_eligibility, next_question, FlowStep};
use studyu_core::model::{AnswerSet, AnswerValue, EligibilityCriterion, Expression, Question, ResponseFormat};

/// `Value(target = equals)` under `negations` nested `Not`s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expr {
    pub target: usize,
    pub equals: bool,
    pub negations: u8,
}

impl Expr {
    pub fn depth(&self) -> usize {
        1 + self.negations as usize
    }

    /// Unanswered questions read as their default.
    pub fn eval(&self, answers: &[Option<bool>], defaults: &[bool]) -> bool {
        let value = answers[self.target].unwrap_or(defaults[self.target]);
        (value == self.equals) != (self.negations % 2 == 1)
    }

    pub fn to_engine(&self) -> Expression {
        let mut expr = Expression::value(
            qid(self.target).as_str(),
            studyu_core::model::Predicate::Boolean { equals: self.equals },
        );
        for _ in 0..self.negations {
            expr = Expression::negate(expr);
        }
        expr
    }
}

#[derive(Debug, Clone)]
pub struct BoolQuestionnaire {
    pub defaults: Vec<bool>,
    pub conditions: Vec<Option<Expr>>,
}

pub fn qid(i: usize) -> String {
    format!("q{i}")
}

/// Every expression over questions `0..questions` with depth at most `max_depth`.
pub fn expressions(questions: usize, max_depth: usize) -> Vec<Expr> {
    let mut out = Vec::new();
    for target in 0..questions {
        for equals in [false, true] {
            for negations in 0..max_depth as u8 {
                out.push(Expr { target, equals, negations });
            }
        }
    }
    out
}

/// Every questionnaire of `size` boolean questions, each optionally conditional
/// on an earlier question via an expression of depth at most `max_depth`.
pub fn questionnaires(size: usize, max_depth: usize) -> Vec<BoolQuestionnaire> {
    let mut all = vec![BoolQuestionnaire { defaults: vec![], conditions: vec![] }];
    for i in 0..size {
        let mut options: Vec<Option<Expr>> = vec![None];
        options.extend(expressions(i, max_depth).into_iter().map(Some));
        let mut next = Vec::new();
        for q in &all {
            for default in [false, true] {
                for cond in &options {
                    let mut grown = q.clone();
                    grown.defaults.push(default);
                    grown.conditions.push(*cond);
                    next.push(grown);
                }
            }
        }
        all = next;
    }
    all
}

impl BoolQuestionnaire {
    pub fn len(&self) -> usize {
        self.defaults.len()
    }

    /// Walk the questionnaire answering question `i` with bit `i` of `responses`.
    /// Skipped questions stay `None`.
    pub fn walk(&self, responses: u32) -> Vec<Option<bool>> {
        let mut answers = vec![None; self.len()];
        for i in 0..self.len() {
            let asked = self.conditions[i].is_none_or(|c| c.eval(&answers, &self.defaults));
            if asked {
                answers[i] = Some(responses >> i & 1 == 1);
            }
        }
        answers
    }

    pub fn to_engine(&self) -> Vec<Question> {
        (0..self.len())
            .map(|i| Question {
                id: qid(i).into(),
                prompt: format!("Question {i}?"),
                rationale: String::new(),
                response: ResponseFormat::Boolean {},
                conditional: self.conditions[i].map(|c| c.to_engine()),
                default_answer: AnswerValue::Boolean(self.defaults[i]),
            })
            .collect()
    }
}

/// Result of checking the engine against the oracle over one space of cases.
#[derive(Debug, Default)]
pub struct Tally {
    pub checks: u64,
    pub mismatches: u64,
    pub first_mismatch: Option<String>,
}

impl Tally {
    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.mismatches += 1;
            if self.first_mismatch.is_none() {
                self.first_mismatch = Some(describe());
            }
        }
    }
}

/// Drive the engine's flow and eligibility check over all questionnaires of up to
/// `max_questions` boolean questions, all response patterns and all expressions
/// of depth ≤ `max_depth`, comparing against the oracle.
pub fn exhaustive_agreement(max_questions: usize, max_depth: usize) -> Tally {
    let at = Utc.with_ymd_and_hms(2024, 1, 1, 9, 0, 0).unwrap();
    let mut tally = Tally::default();
    for size in 1..=max_questions {
        let exprs = expressions(size, max_depth);
        let criteria: Vec<EligibilityCriterion> = exprs
            .iter()
            .enumerate()
            .map(|(i, e)| EligibilityCriterion {
                id: format!("c{i}").into(),
                reason: format!("criterion {i}"),
                expression: e.to_engine(),
            })
            .collect();
        for questionnaire in questionnaires(size, max_depth) {
            let questions = questionnaire.to_engine();
            for responses in 0..(1u32 << size) {
                let expected_answers = questionnaire.walk(responses);

                let mut answers = AnswerSet::default();
                let mut asked = vec![false; size];
                let flow_ok = loop {
                    match next_question(&questions, &answers) {
                        Ok(FlowStep::Ask(q)) => {
                            let i: usize = q.id.as_str()[1..].parse().unwrap();
                            if asked[i] {
                                break false;
                            }
                            asked[i] = true;
                            answers
                                .record(q, AnswerValue::Boolean(responses >> i & 1 == 1), at)
                                .unwrap();
                        }
                        Ok(FlowStep::Done) => break true,
                        Err(_) => break false,
                    }
                };
                let asked_matches = (0..size).all(|i| asked[i] == expected_answers[i].is_some());
                tally.record(flow_ok && asked_matches, || {
                    format!("flow of {questionnaire:?} with responses {responses:b}: asked {asked:?}")
                });

                let Ok(verdict) = check_eligibility(&criteria, &answers, &questions) else {
                    tally.record(false, || format!("eligibility errored for {questionnaire:?}"));
                    continue;
                };
                for (i, expr) in exprs.iter().enumerate() {
                    let expected = expr.eval(&expected_answers, &questionnaire.defaults);
                    let failed = verdict.failed_criteria.iter().any(|f| f.criterion_id.as_str() == format!("c{i}"));
                    tally.record(expected != failed, || {
                        format!("{expr:?} on {questionnaire:?} with responses {responses:b}: oracle {expected}")
                    });
                }
                let expected_eligible = exprs.iter().all(|e| e.eval(&expected_answers, &questionnaire.defaults));
                tally.record(verdict.eligible == expected_eligible, || "overall verdict".into());
            }
        }
    }
    tally
}
