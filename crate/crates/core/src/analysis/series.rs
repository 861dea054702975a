use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::enrollment::{Enrollment, ResultPayload};
use crate::model::{property_kind, DataReference};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SeriesPoint {
    pub study_day: u32,
    pub timestamp: DateTime<Utc>,
    pub value: f64,
}

/// Values of one task property, ordered by study day then completion time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimeSeries {
    pub source: DataReference,
    pub points: Vec<SeriesPoint>,
}

impl TimeSeries {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Turn a data reference into the series of values recorded in `enrollment`.
///
/// Checkmark tasks yield 1 per completion; booleans map to 0/1.
pub fn resolve_data_reference(reference: &DataReference, enrollment: &Enrollment) -> Result<TimeSeries, AnalysisError> {
    let actual = property_kind(&enrollment.snapshot, reference.task.as_str(), reference.property.as_str())?;
    if actual != reference.kind {
        return Err(AnalysisError::TypeMismatch {
            expected: reference.kind,
            actual,
        });
    }

    let mut points: Vec<SeriesPoint> = enrollment
        .results
        .iter()
        .filter(|r| r.task_id == reference.task)
        .filter_map(|r| {
            let value = match &r.payload {
                ResultPayload::Completed {} => Some(1.0),
                ResultPayload::Answers { answers } => answers
                    .get(reference.property.as_str())
                    .and_then(|a| a.value.as_number()),
            }?;
            Some(SeriesPoint {
                study_day: r.study_day,
                timestamp: r.completed_at,
                value,
            })
        })
        .collect();
    points.sort_by(|a, b| (a.study_day, a.timestamp).cmp(&(b.study_day, b.timestamp)));
    Ok(TimeSeries {
        source: reference.clone(),
        points,
    })
}
