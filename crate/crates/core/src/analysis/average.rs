use serde::{Deserialize, Serialize};

use super::series::TimeSeries;
use super::AnalysisError;
use crate::model::Aggregation;
use crate::schedule::{PhaseKind, PhaseSequence};

pub const BASELINE_LABEL: &str = "baseline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Bar {
    pub label: String,
    /// Absent for groups without data.
    pub mean: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AverageBars {
    pub aggregate: Aggregation,
    pub bars: Vec<Bar>,
}

fn bar(label: String, values: impl Iterator<Item = f64>) -> Bar {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    Bar {
        label,
        mean: (count > 0).then(|| sum / count as f64),
        count,
    }
}

fn phase_label(kind: &PhaseKind) -> String {
    match kind {
        PhaseKind::Baseline => BASELINE_LABEL.to_owned(),
        PhaseKind::Intervention { intervention } => intervention.to_string(),
    }
}

/// Arithmetic mean per day, phase or intervention.
///
/// Days and phases are listed chronologically; interventions as A, B, then
/// baseline when the sequence has one. Groups without data are kept with count 0.
pub fn average_section(series: &TimeSeries, aggregate: Aggregation, seq: &PhaseSequence) -> Result<AverageBars, AnalysisError> {
    if series.is_empty() {
        return Err(AnalysisError::EmptySeries);
    }
    let points = &series.points;
    let bars = match aggregate {
        Aggregation::Day => (1..=seq.total_days)
            .map(|day| {
                bar(
                    format!("day {day}"),
                    points.iter().filter(|p| p.study_day == day).map(|p| p.value),
                )
            })
            .collect(),
        Aggregation::Phase => seq
            .phases
            .iter()
            .map(|phase| {
                bar(
                    format!("phase {}: {}", phase.index + 1, phase_label(&phase.kind)),
                    points.iter().filter(|p| phase.contains(p.study_day)).map(|p| p.value),
                )
            })
            .collect(),
        Aggregation::Intervention => {
            let mut groups: Vec<PhaseKind> = seq
                .selections
                .iter()
                .map(|id| PhaseKind::Intervention { intervention: id.clone() })
                .collect();
            if seq.has_baseline() {
                groups.push(PhaseKind::Baseline);
            }
            groups
                .iter()
                .map(|group| {
                    let values = points.iter().filter(|p| {
                        seq.phase_on(p.study_day).is_some_and(|phase| &phase.kind == group)
                    });
                    bar(phase_label(group), values.map(|p| p.value))
                })
                .collect()
        }
    };
    Ok(AverageBars { aggregate, bars })
}
