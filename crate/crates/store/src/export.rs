//! Researcher CSV export.

use serde::{Deserialize, Serialize};
use studyu_core::analysis::BASELINE_LABEL;
use studyu_core::enrollment::{Enrollment, ResultPayload};
use studyu_core::model::{AnswerValue, StudyDetails, FIXED_EXPORT_COLUMNS};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExportOptions {
    /// Add a `user_pseudonym` column holding the anonymous account id.
    #[serde(default)]
    pub include_user_pseudonym: bool,
}

fn render(value: &AnswerValue) -> Option<String> {
    match value {
        AnswerValue::Boolean(b) => Some(if *b { "1" } else { "0" }.to_owned()),
        AnswerValue::Number(x) => Some(format!("{x}")),
        AnswerValue::Choice(_) => None,
    }
}

/// One row per (task result, exported property), sorted by participant, day and task.
pub fn export_csv(details: &StudyDetails, enrollments: &[Enrollment], options: ExportOptions) -> String {
    let mut header: Vec<String> = FIXED_EXPORT_COLUMNS.iter().map(|c| c.to_string()).collect();
    if options.include_user_pseudonym {
        header.insert(1, "user_pseudonym".into());
    }
    let value_columns = header.len();
    header.extend(details.results.iter().map(|r| r.column_name.clone()));

    let mut rows: Vec<(String, u32, String, usize, Vec<String>)> = Vec::new();
    for enrollment in enrollments {
        let seq = &enrollment.phase_sequence;
        for result in &enrollment.results {
            for (column, spec) in details.results.iter().enumerate() {
                if spec.reference.task != result.task_id {
                    continue;
                }
                let value = match &result.payload {
                    ResultPayload::Completed {} => Some("1".to_owned()),
                    ResultPayload::Answers { answers } => answers
                        .get(spec.reference.property.as_str())
                        .and_then(|a| render(&a.value)),
                };
                let Some(value) = value else { continue };
                let phase = seq.phase_on(result.study_day);
                let mut row = vec![
                    enrollment.enrollment_id.to_string(),
                    enrollment.started_on.to_string(),
                    result.study_day.to_string(),
                    phase.map(|p| p.index.to_string()).unwrap_or_default(),
                    phase
                        .map(|p| p.kind.intervention().map(|i| i.to_string()).unwrap_or_else(|| BASELINE_LABEL.into()))
                        .unwrap_or_default(),
                    result.task_id.to_string(),
                    spec.reference.property.to_string(),
                ];
                if options.include_user_pseudonym {
                    row.insert(1, enrollment.user_id.to_string());
                }
                row.resize(header.len(), String::new());
                row[value_columns + column] = value;
                rows.push((
                    enrollment.enrollment_id.to_string(),
                    result.study_day,
                    result.task_id.to_string(),
                    column,
                    row,
                ));
            }
        }
    }
    rows.sort_by(|a, b| (&a.0, a.1, &a.2, a.3).cmp(&(&b.0, b.1, &b.2, b.3)));

    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    writer.write_record(&header).expect("in-memory write");
    for (.., row) in rows {
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
}
