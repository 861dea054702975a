use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::average::{average_section, AverageBars};
use super::regression::{build_regression_section, RegressionResult};
use super::series::resolve_data_reference;
use super::AnalysisError;
use crate::enrollment::Enrollment;
use crate::model::{ReportSection, SectionContent, SectionId};
use crate::schedule::{countable_days, is_scheduled, progress, Completion, ProgressSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum SectionBody {
    Average(AverageBars),
    LinearRegression(RegressionResult),
    #[serde(rename_all = "camelCase")]
    Error { code: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SectionReport {
    pub section_id: SectionId,
    pub title: String,
    pub body: SectionBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportBundle {
    pub generated_at: DateTime<Utc>,
    /// True until enough countable days are collected; sections are then empty.
    pub locked: bool,
    pub progress: ProgressSummary,
    /// Primary section first, then the secondary sections in specification order.
    pub sections: Vec<SectionReport>,
}

/// Countable days among completions made up to and including `today`.
pub fn countable_days_to_date(enrollment: &Enrollment, today: u32) -> BTreeSet<u32> {
    let seq = &enrollment.phase_sequence;
    let relevant: BTreeSet<Completion> = enrollment
        .completions()
        .into_iter()
        .filter(|c| c.study_day <= today && is_scheduled(seq, &enrollment.snapshot, c.study_day, c.task_id.as_str()))
        .collect();
    countable_days(seq, &enrollment.snapshot, &relevant).unwrap_or_default()
}

fn section(enrollment: &Enrollment, spec: &ReportSection, countable: &BTreeSet<u32>) -> SectionReport {
    let seq = &enrollment.phase_sequence;
    let computed: Result<SectionBody, AnalysisError> = resolve_data_reference(spec.reference(), enrollment).and_then(
        |series| match &spec.content {
            SectionContent::Average { aggregate, .. } => {
                average_section(&series, *aggregate, seq).map(SectionBody::Average)
            }
            SectionContent::LinearRegression {
                improvement_direction, ..
            } => build_regression_section(enrollment, &series, *improvement_direction, seq, countable)
                .map(SectionBody::LinearRegression),
        },
    );
    SectionReport {
        section_id: spec.id.clone(),
        title: spec.title.clone(),
        body: computed.unwrap_or_else(|e| SectionBody::Error {
            code: e.code().to_owned(),
            message: e.to_string(),
        }),
    }
}

/// Report for `enrollment` as of `now`.
///
/// A failing section is reported in place and does not affect the others.
/// `unlock` computes the sections even before the minimum length is reached.
pub fn build_report(enrollment: &Enrollment, now: DateTime<Utc>, unlock: bool) -> ReportBundle {
    let today = enrollment.study_day_at(now).clamp(0, i64::from(u32::MAX)) as u32;
    let summary = progress(&enrollment.phase_sequence, &enrollment.snapshot, &enrollment.completions(), today);
    let locked = !summary.power_reached && !unlock;
    let sections = if locked {
        Vec::new()
    } else {
        let countable = countable_days_to_date(enrollment, today);
        let spec = &enrollment.snapshot.report_specification;
        std::iter::once(&spec.primary)
            .chain(&spec.secondary)
            .map(|s| section(enrollment, s, &countable))
            .collect()
    };
    ReportBundle {
        generated_at: now,
        locked,
        progress: summary,
        sections,
    }
}
