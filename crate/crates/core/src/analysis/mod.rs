//! Report computation over a single enrollment.

mod average;
mod ols;
mod regression;
mod report;
mod series;

use thiserror::Error;

pub use average::{average_section, AverageBars, Bar, BASELINE_LABEL};
pub use ols::{fit_linear_model, DesignMatrix, FitError, RegressionFit, RANK_TOLERANCE};
pub use regression::{
    build_regression_section, daily_samples, regression_design, wald_decision, PredictedValue, RegressionDesign,
    RegressionResult, WaldDecision, WaldStatus, ALPHA, CRITICAL_Z, VARIANCE_FLOOR,
};
pub use report::{build_report, countable_days_to_date, ReportBundle, SectionBody, SectionReport};
pub use series::{resolve_data_reference, SeriesPoint, TimeSeries};

use crate::model::{ReferenceError, ValueKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{task}` has no property `{property}`")]
    UnknownProperty { task: String, property: String },
    #[error("property `{property}` of task `{task}` cannot be analysed")]
    UnsupportedProperty { task: String, property: String },
    #[error("expected a {expected} property, found {actual}")]
    TypeMismatch { expected: ValueKind, actual: ValueKind },
    #[error("no values recorded yet")]
    EmptySeries,
    #[error("{samples} countable days are not enough to estimate {parameters} parameters")]
    InsufficientData { samples: usize, parameters: usize },
    #[error("the model cannot be estimated: column `{column}` is not identifiable")]
    RankDeficient { column: String },
    #[error(transparent)]
    Fit(FitError),
}

impl AnalysisError {
    pub fn code(&self) -> &'static str {
        match self {
            AnalysisError::UnknownTask(_) => "unknown_task",
            AnalysisError::UnknownProperty { .. } => "unknown_property",
            AnalysisError::UnsupportedProperty { .. } => "unsupported_property",
            AnalysisError::TypeMismatch { .. } => "type_mismatch",
            AnalysisError::EmptySeries => "empty_series",
            AnalysisError::InsufficientData { .. } => "insufficient_data",
            AnalysisError::RankDeficient { .. } => "rank_deficient",
            AnalysisError::Fit(_) => "fit_failed",
        }
    }
}

impl From<ReferenceError> for AnalysisError {
    fn from(err: ReferenceError) -> Self {
        match err {
            ReferenceError::UnknownTask(task) => AnalysisError::UnknownTask(task),
            ReferenceError::UnknownProperty { task, property } => AnalysisError::UnknownProperty { task, property },
            ReferenceError::UnsupportedProperty { task, property } => {
                AnalysisError::UnsupportedProperty { task, property }
            }
        }
    }
}
