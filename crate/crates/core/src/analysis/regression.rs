//! The A-versus-B regression report.
//!
//! One sample per countable day (same-day observations averaged). Columns:
//! intercept, intervention dummies and the study day as a linear trend. With a
//! baseline phase the dummies are `D_A` and `D_B` against the baseline level;
//! without one a single `D_B` column is used and A is the reference. The A-vs-B
//! contrast is tested with a large-sample Wald statistic at α = 0.05.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ols::{fit_linear_model, DesignMatrix, FitError, RegressionFit};
use super::series::TimeSeries;
use super::average::BASELINE_LABEL;
use super::AnalysisError;
use crate::enrollment::Enrollment;
use crate::model::{ImprovementDirection, InterventionId};
use crate::schedule::PhaseSequence;

pub const ALPHA: f64 = 0.05;
/// Two-sided standard-normal critical value at α = 0.05.
pub const CRITICAL_Z: f64 = 1.959_963_984_540_054;
/// Residual variance at or below this is treated as zero.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum WaldStatus {
    Significant,
    NotSignificant,
    NotAssessable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WaldDecision {
    /// B − A difference in the outcome.
    pub estimate: f64,
    pub standard_error: f64,
    /// `estimate / standard_error`; absent when not assessable.
    pub statistic: Option<f64>,
    pub alpha: f64,
    pub critical_value: f64,
    pub status: WaldStatus,
    pub significant: bool,
    /// The intervention that improves the outcome, when the difference is significant.
    pub better: Option<InterventionId>,
}

/// Wald decision for the B − A contrast.
pub fn wald_decision(
    estimate: f64,
    standard_error: f64,
    residual_variance: f64,
    improvement: ImprovementDirection,
    a: &InterventionId,
    b: &InterventionId,
) -> WaldDecision {
    let assessable = residual_variance > VARIANCE_FLOOR && standard_error > 0.0 && standard_error.is_finite();
    let statistic = assessable.then(|| estimate / standard_error);
    let significant = statistic.is_some_and(|z| z.abs() > CRITICAL_Z);
    let status = match (assessable, significant) {
        (false, _) => WaldStatus::NotAssessable,
        (true, true) => WaldStatus::Significant,
        (true, false) => WaldStatus::NotSignificant,
    };
    let b_is_higher = estimate > 0.0;
    let b_is_better = match improvement {
        ImprovementDirection::HigherIsBetter => b_is_higher,
        ImprovementDirection::LowerIsBetter => !b_is_higher,
    };
    WaldDecision {
        estimate,
        standard_error,
        statistic,
        alpha: ALPHA,
        critical_value: CRITICAL_Z,
        status,
        significant,
        better: significant.then(|| if b_is_better { b.clone() } else { a.clone() }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictedValue {
    /// Intervention id, or `baseline`.
    pub group: String,
    pub label: String,
    pub predicted: f64,
    pub standard_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegressionResult {
    pub predicted: Vec<PredictedValue>,
    /// Study day at which predictions are evaluated (mean over samples).
    pub trend_at: f64,
    pub fit: RegressionFit,
    pub decision: WaldDecision,
    pub narrative: String,
}

/// Daily means of `series` restricted to `days`.
pub fn daily_samples(series: &TimeSeries, days: &BTreeSet<u32>) -> Vec<(u32, f64)> {
    let mut by_day: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for point in series.points.iter().filter(|p| days.contains(&p.study_day)) {
        let entry = by_day.entry(point.study_day).or_insert((0.0, 0));
        entry.0 += point.value;
        entry.1 += 1;
    }
    by_day.into_iter().map(|(d, (s, c))| (d, s / c as f64)).collect()
}

/// Design rows for the given days plus the A−B contrast vector.
pub struct RegressionDesign {
    pub matrix: DesignMatrix,
    pub outcome: Vec<f64>,
    /// Coefficient weights whose combination is the B − A difference.
    pub contrast: Vec<f64>,
    pub has_baseline: bool,
}

impl RegressionDesign {
    /// Design row for a group at study day `t`; `None` for the baseline.
    pub fn row_for(&self, group: Option<&InterventionId>, seq: &PhaseSequence, t: f64) -> Vec<f64> {
        let is_a = group == Some(seq.intervention_a());
        let is_b = group == Some(seq.intervention_b());
        let dummy = |on: bool| if on { 1.0 } else { 0.0 };
        if self.has_baseline {
            vec![1.0, dummy(is_a), dummy(is_b), t]
        } else {
            vec![1.0, dummy(is_b), t]
        }
    }
}

pub fn regression_design(samples: &[(u32, f64)], seq: &PhaseSequence) -> RegressionDesign {
    let has_baseline = seq.has_baseline();
    let a = seq.intervention_a();
    let b = seq.intervention_b();
    let labels: Vec<String> = if has_baseline {
        vec!["intercept".into(), format!("D_{a}"), format!("D_{b}"), "trend".into()]
    } else {
        vec!["intercept".into(), format!("D_{b}"), "trend".into()]
    };
    let mut rows = Vec::new();
    let mut outcome = Vec::new();
    for &(day, value) in samples {
        let Some(phase) = seq.phase_on(day) else { continue };
        let active = phase.kind.intervention();
        let t = f64::from(day);
        let is_a = active == Some(a);
        let is_b = active == Some(b);
        let dummy = |on: bool| if on { 1.0 } else { 0.0 };
        rows.push(if has_baseline {
            vec![1.0, dummy(is_a), dummy(is_b), t]
        } else {
            vec![1.0, dummy(is_b), t]
        });
        outcome.push(value);
    }
    let contrast = if has_baseline {
        vec![0.0, -1.0, 1.0, 0.0]
    } else {
        vec![0.0, 1.0, 0.0]
    };
    RegressionDesign {
        matrix: DesignMatrix::from_rows(labels, &rows),
        outcome,
        contrast,
        has_baseline,
    }
}

fn intervention_name(enrollment: &Enrollment, id: &InterventionId) -> String {
    enrollment
        .snapshot
        .intervention(id.as_str())
        .map(|i| i.name.clone())
        .unwrap_or_else(|| id.to_string())
}

/// Regression section over the countable days of `series`.
pub fn build_regression_section(
    enrollment: &Enrollment,
    series: &TimeSeries,
    improvement: ImprovementDirection,
    seq: &PhaseSequence,
    countable: &BTreeSet<u32>,
) -> Result<RegressionResult, AnalysisError> {
    let samples = daily_samples(series, countable);
    let design = regression_design(&samples, seq);
    let parameters = design.matrix.cols();
    if design.matrix.rows() <= parameters {
        return Err(AnalysisError::InsufficientData {
            samples: design.matrix.rows(),
            parameters,
        });
    }
    let fit = fit_linear_model(&design.matrix, &design.outcome).map_err(|e| match e {
        FitError::TooFewSamples { samples, parameters } => AnalysisError::InsufficientData { samples, parameters },
        FitError::RankDeficient { column } => AnalysisError::RankDeficient {
            column: design.matrix.labels()[column].clone(),
        },
        other => AnalysisError::Fit(other),
    })?;

    let estimate = fit.predict(&design.contrast);
    let standard_error = fit.quadratic_form(&design.contrast).max(0.0).sqrt();
    let a = seq.intervention_a();
    let b = seq.intervention_b();
    let decision = wald_decision(estimate, standard_error, fit.residual_variance, improvement, a, b);

    let trend_at = (0..design.matrix.rows()).map(|i| design.matrix.get(i, parameters - 1)).sum::<f64>()
        / design.matrix.rows() as f64;
    let mut groups: Vec<Option<&InterventionId>> = vec![Some(a), Some(b)];
    if design.has_baseline {
        groups.push(None);
    }
    let predicted = groups
        .into_iter()
        .map(|group| {
            let x = design.row_for(group, seq, trend_at);
            let value = fit.predict(&x);
            let se = fit.quadratic_form(&x).max(0.0).sqrt();
            let (key, label) = match group {
                Some(id) => (id.to_string(), intervention_name(enrollment, id)),
                None => (BASELINE_LABEL.to_owned(), "Baseline".to_owned()),
            };
            PredictedValue {
                group: key,
                label,
                predicted: value,
                standard_error: se,
                ci_lower: value - CRITICAL_Z * se,
                ci_upper: value + CRITICAL_Z * se,
            }
        })
        .collect();

    let narrative = narrative(
        &intervention_name(enrollment, a),
        &intervention_name(enrollment, b),
        series.source.property.as_str(),
        design.matrix.rows(),
        &decision,
        b,
    );
    Ok(RegressionResult {
        predicted,
        trend_at,
        fit,
        decision,
        narrative,
    })
}

fn narrative(a: &str, b: &str, outcome: &str, samples: usize, decision: &WaldDecision, b_id: &InterventionId) -> String {
    let direction = if decision.estimate >= 0.0 { "higher" } else { "lower" };
    let lower = decision.estimate - CRITICAL_Z * decision.standard_error;
    let upper = decision.estimate + CRITICAL_Z * decision.standard_error;
    let comparison = format!(
        "Based on {samples} countable days, {outcome} was on average {:.2} {direction} with {b} than with {a} \
         (95% confidence interval {lower:.2} to {upper:.2}).",
        decision.estimate.abs()
    );
    let verdict = match decision.status {
        WaldStatus::Significant => {
            let better = if decision.better.as_ref() == Some(b_id) { b } else { a };
            format!("This difference is statistically significant at the 5% level: {better} improves the outcome.")
        }
        WaldStatus::NotSignificant => "This difference is not statistically significant at the 5% level, \
             so the data do not show that either intervention improves the outcome."
            .to_owned(),
        WaldStatus::NotAssessable => "The values show no variation around the fitted model, \
             so the difference cannot be tested for significance."
            .to_owned(),
    };
    format!("{comparison} {verdict}")
}
