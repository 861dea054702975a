//! Normal-equations least squares with an explicit Gauss-Jordan inverse.

pub struct OracleFit {
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub residual_variance: f64,
    pub inverse_gram: Vec<Vec<f64>>,
}

/// Inverse of a square matrix by Gauss-Jordan elimination with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut aug: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))?;
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let factor = aug[row][col];
                if factor != 0.0 {
                    for k in 0..2 * n {
                        aug[row][k] -= factor * aug[col][k];
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// `rows` is the n×p design, row-major.
pub fn fit(rows: &[Vec<f64>], y: &[f64]) -> Option<OracleFit> {
    let n = rows.len();
    let p = rows.first()?.len();
    let mut gram = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, yi) in rows.iter().zip(y) {
        for i in 0..p {
            xty[i] += row[i] * yi;
            for j in 0..p {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    let inverse = invert(&gram)?;
    let coefficients: Vec<f64> = (0..p).map(|i| (0..p).map(|j| inverse[i][j] * xty[j]).sum()).collect();
    let rss: f64 = rows
        .iter()
        .zip(y)
        .map(|(row, yi)| {
            let fitted: f64 = row.iter().zip(&coefficients).map(|(a, b)| a * b).sum();
            (yi - fitted).powi(2)
        })
        .sum();
    let residual_variance = rss / (n - p) as f64;
    let standard_errors = (0..p).map(|i| (residual_variance * inverse[i][i]).sqrt()).collect();
    Some(OracleFit {
        coefficients,
        standard_errors,
        residual_variance,
        inverse_gram: inverse,
    })
}

/// `|a − b| ≤ tol · max(|a|, |b|)`
pub fn close_relative(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}
