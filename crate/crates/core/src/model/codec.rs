//! Reading and writing the JSON study-definition format.
//!
//! Decoding is closed-schema: unknown members anywhere are rejected. Encoding
//! is canonical: object members sorted, two-space indentation, trailing newline.

use serde_json::{Map, Value};
use serde_path_to_error::Segment;
use thiserror::Error;

use super::types::{Study, StudyDetails, StudyMetadata};
use super::validate::{validate_study, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeErrorKind {
    MalformedDocument,
    UnknownField,
    TypeMismatch,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{kind:?} at {path}: {message}")]
    Decode {
        kind: DecodeErrorKind,
        /// JSONPath-like location, e.g. `$.details.schedule.phaseDurationDays`.
        path: String,
        message: String,
    },
    #[error("study failed validation with {} error(s)", .0.errors().count())]
    Invalid(ValidationReport),
}

impl ParseError {
    pub fn kind(&self) -> Option<DecodeErrorKind> {
        match self {
            ParseError::Decode { kind, .. } => Some(*kind),
            ParseError::Invalid(_) => None,
        }
    }

    pub fn path(&self) -> Option<&str> {
        match self {
            ParseError::Decode { path, .. } => Some(path),
            ParseError::Invalid(_) => None,
        }
    }
}

/// Decode a study document without cross-reference validation.
pub fn decode_study(bytes: &[u8]) -> Result<Study, ParseError> {
    // serde accepts a sequence for a struct; a study document must be an object
    if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'[') {
        return Err(ParseError::Decode {
            kind: DecodeErrorKind::MalformedDocument,
            path: "$".into(),
            message: "a study document must be a JSON object".into(),
        });
    }
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let study: Study = serde_path_to_error::deserialize(&mut de).map_err(convert_error)?;
    de.end().map_err(|e| ParseError::Decode {
        kind: DecodeErrorKind::MalformedDocument,
        path: "$".into(),
        message: e.to_string(),
    })?;
    Ok(study)
}

/// Decode a study document and reject it unless it passes structural validation.
pub fn parse_study(bytes: &[u8]) -> Result<(StudyMetadata, StudyDetails), ParseError> {
    let study = decode_study(bytes)?;
    let report = validate_study(&study.details, &study.metadata, false);
    if report.has_errors() {
        return Err(ParseError::Invalid(report));
    }
    Ok((study.metadata, study.details))
}

/// Canonical encoding of a study.
pub fn serialize_study(metadata: &StudyMetadata, details: &StudyDetails) -> Vec<u8> {
    let study = StudyRef { metadata, details };
    let value = serde_json::to_value(study).expect("study types serialize infallibly");
    to_canonical_json(&value)
}

#[derive(serde::Serialize)]
struct StudyRef<'a> {
    metadata: &'a StudyMetadata,
    details: &'a StudyDetails,
}

/// Sorted members, two-space indentation, trailing newline.
pub fn to_canonical_json(value: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&sort_members(value)).expect("json values serialize");
    out.push(b'\n');
    out
}

fn sort_members(value: &Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            let mut sorted = Map::new();
            for (k, v) in entries {
                sorted.insert(k.clone(), sort_members(v));
            }
            Value::Object(sorted)
        }
        Value::Array(items) => Value::Array(items.iter().map(sort_members).collect()),
        other => other.clone(),
    }
}

fn render_path(path: &serde_path_to_error::Path) -> String {
    let mut out = String::from("$");
    for segment in path.iter() {
        match segment {
            Segment::Seq { index } => out.push_str(&format!("[{index}]")),
            Segment::Map { key } => {
                out.push('.');
                out.push_str(key);
            }
            Segment::Enum { variant } => {
                out.push('.');
                out.push_str(variant);
            }
            Segment::Unknown => {}
        }
    }
    out
}

fn backticked(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

fn convert_error(err: serde_path_to_error::Error<serde_json::Error>) -> ParseError {
    let mut path = render_path(err.path());
    let inner = err.inner();
    let message = inner.to_string();
    let kind = if inner.is_syntax() || inner.is_eof() {
        DecodeErrorKind::MalformedDocument
    } else if message.starts_with("missing field") {
        if let Some(field) = backticked(&message) {
            path.push('.');
            path.push_str(field);
        }
        DecodeErrorKind::MalformedDocument
    } else if message.starts_with("unknown field") {
        if let Some(field) = backticked(&message) {
            if !path.ends_with(&format!(".{field}")) {
                path.push('.');
                path.push_str(field);
            }
        }
        DecodeErrorKind::UnknownField
    } else if message.contains(r#"expected "type" or "value""#) {
        // adjacently tagged answer values report stray members this way
        DecodeErrorKind::UnknownField
    } else if message.starts_with("invalid type: ") && path == "$" {
        DecodeErrorKind::MalformedDocument
    } else {
        DecodeErrorKind::TypeMismatch
    };
    ParseError::Decode {
        kind,
        path,
        message,
    }
}
