//! Ordinary least squares through a Householder QR decomposition.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative pivot threshold below which the design counts as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("{samples} samples cannot identify {parameters} parameters")]
    TooFewSamples { samples: usize, parameters: usize },
    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("design matrix or outcome contains non-finite values")]
    NonFinite,
    #[error("outcome has {outcome} entries but the design has {rows} rows")]
    DimensionMismatch { rows: usize, outcome: usize },
}

/// Row-major n×p design matrix with column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    labels: Vec<String>,
}

impl DesignMatrix {
    /// Panics if rows differ in length from `labels`.
    pub fn from_rows(labels: Vec<String>, rows: &[Vec<f64>]) -> Self {
        let cols = labels.len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "row length must match the number of labels");
            data.extend_from_slice(row);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
            labels,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegressionFit {
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// σ̂²·(XᵀX)⁻¹, row-major p×p.
    pub covariance: Vec<Vec<f64>>,
    /// RSS / (n − p).
    pub residual_variance: f64,
    pub samples: usize,
    pub parameters: usize,
}

impl RegressionFit {
    /// `x · β̂`
    pub fn predict(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }

    /// `xᵀ · Cov · x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for (i, xi) in x.iter().enumerate() {
            for (j, xj) in x.iter().enumerate() {
                total += xi * self.covariance[i][j] * xj;
            }
        }
        total
    }
}

/// Least-squares fit of `y` on the columns of `x`.
pub fn fit_linear_model(x: &DesignMatrix, y: &[f64]) -> Result<RegressionFit, FitError> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(FitError::DimensionMismatch { rows: n, outcome: y.len() });
    }
    if n <= p {
        return Err(FitError::TooFewSamples {
            samples: n,
            parameters: p,
        });
    }
    if x.data.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }

    // Column-major working copy, reduced in place to R.
    let mut a: Vec<Vec<f64>> = (0..p).map(|j| (0..n).map(|i| x.get(i, j)).collect()).collect();
    let mut qty = y.to_vec();
    let column_norms: Vec<f64> = a.iter().map(|c| norm(c)).collect();
    let scale = column_norms.iter().cloned().fold(0.0, f64::max);

    for k in 0..p {
        let sigma = norm(&a[k][k..]);
        if sigma <= RANK_TOLERANCE * scale {
            return Err(FitError::RankDeficient { column: k });
        }
        let alpha = if a[k][k] > 0.0 { -sigma } else { sigma };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let v_norm_sq: f64 = v.iter().map(|t| t * t).sum();
        if v_norm_sq > 0.0 {
            for col in a.iter_mut().skip(k) {
                reflect(&v, v_norm_sq, &mut col[k..]);
            }
            reflect(&v, v_norm_sq, &mut qty[k..]);
        }
        a[k][k] = alpha;
        for entry in a[k][k + 1..].iter_mut() {
            *entry = 0.0;
        }
    }

    let r = |i: usize, j: usize| a[j][i];
    let max_pivot = (0..p).map(|k| r(k, k).abs()).fold(0.0, f64::max);
    if let Some(k) = (0..p).find(|&k| r(k, k).abs() <= RANK_TOLERANCE * max_pivot) {
        return Err(FitError::RankDeficient { column: k });
    }

    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let tail: f64 = (i + 1..p).map(|j| r(i, j) * beta[j]).sum();
        beta[i] = (qty[i] - tail) / r(i, i);
    }

    // R⁻¹ (upper triangular), then (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ.
    let mut r_inv = vec![vec![0.0; p]; p];
    for col in 0..p {
        for i in (0..=col).rev() {
            let identity = if i == col { 1.0 } else { 0.0 };
            let tail: f64 = (i + 1..=col).map(|j| r(i, j) * r_inv[j][col]).sum();
            r_inv[i][col] = (identity - tail) / r(i, i);
        }
    }

    let rss: f64 = (0..n)
        .map(|i| {
            let fitted: f64 = x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum();
            (y[i] - fitted).powi(2)
        })
        .sum();
    let residual_variance = rss / (n - p) as f64;

    let mut covariance = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let unscaled: f64 = (i.max(j)..p).map(|k| r_inv[i][k] * r_inv[j][k]).sum();
            covariance[i][j] = residual_variance * unscaled;
        }
    }
    let standard_errors = (0..p).map(|i| covariance[i][i].max(0.0).sqrt()).collect();

    Ok(RegressionFit {
        labels: x.labels().to_vec(),
        coefficients: beta,
        standard_errors,
        covariance,
        residual_variance,
        samples: n,
        parameters: p,
    })
}

fn norm(v: &[f64]) -> f64 {
    // scaled to avoid overflow for large entries
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return 0.0;
    }
    max * v.iter().map(|x| (x / max).powi(2)).sum::<f64>().sqrt()
}

/// Apply `I − 2vvᵀ/(vᵀv)` to `target`.
fn reflect(v: &[f64], v_norm_sq: f64, target: &mut [f64]) {
    let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
    let factor = 2.0 * dot / v_norm_sq;
    for (t, vi) in target.iter_mut().zip(v) {
        *t -= factor * vi;
    }
}
