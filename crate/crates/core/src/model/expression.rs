use serde::{Deserialize, Serialize};

use super::ids::{ChoiceId, QuestionId};

/// Boolean expression over questionnaire answers.
///
/// Only value tests and negation exist; conjunction is expressed by listing
/// several eligibility criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum Expression {
    Value {
        target: QuestionId,
        predicate: Predicate,
    },
    Not {
        expression: Box<Expression>,
    },
}

impl Expression {
    pub fn value(target: impl Into<QuestionId>, predicate: Predicate) -> Self {
        Expression::Value {
            target: target.into(),
            predicate,
        }
    }

    pub fn negate(inner: Expression) -> Self {
        Expression::Not {
            expression: Box::new(inner),
        }
    }

    /// Nesting depth; a bare value test has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Expression::Value { .. } => 1,
            Expression::Not { expression } => 1 + expression.depth(),
        }
    }

    /// The value test at the bottom of the negation chain.
    pub fn leaf(&self) -> (&QuestionId, &Predicate) {
        match self {
            Expression::Value { target, predicate } => (target, predicate),
            Expression::Not { expression } => expression.leaf(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum Predicate {
    /// Boolean answer equals `equals`.
    Boolean { equals: bool },
    /// Choice `selected` is among the selected choices.
    Choice { selected: ChoiceId },
    /// Numeric answer compared against `value`.
    Numeric { operator: Comparison, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    LessOrEqual,
    #[serde(rename = "=")]
    Equal,
    #[serde(rename = ">=")]
    GreaterOrEqual,
    #[serde(rename = ">")]
    Greater,
}

impl Comparison {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Less => lhs < rhs,
            Comparison::LessOrEqual => lhs <= rhs,
            Comparison::Equal => lhs == rhs,
            Comparison::GreaterOrEqual => lhs >= rhs,
            Comparison::Greater => lhs > rhs,
        }
    }
}
