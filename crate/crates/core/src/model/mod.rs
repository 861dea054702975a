//! The study-definition model shared by every other part of the platform.

mod answer;
mod codec;
mod expression;
mod ids;
mod types;
mod validate;

pub use answer::{conform_value, Answer, AnswerError, AnswerSet, AnswerValue};
pub use codec::{decode_study, parse_study, serialize_study, to_canonical_json, DecodeErrorKind, ParseError};
pub use expression::{Comparison, Expression, Predicate};
pub use ids::*;
pub(crate) use ids::string_id;
pub use types::*;
pub use validate::{
    property_kind, validate_study, Finding, ReferenceError, Severity, ValidationReport, FIXED_EXPORT_COLUMNS,
    MAX_EXPRESSION_DEPTH,
};
