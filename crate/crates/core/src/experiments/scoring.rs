//! Evaluation metrics.

use crate::error::{Error, Result};

/// `v - mean(v)` with the mean taken relative to `v[0]`, so a constant
/// vector centers to exact zeros.
fn centered(v: &[f64]) -> Vec<f64> {
    let base = v[0];
    let shift = v.iter().map(|x| x - base).sum::<f64>() / v.len() as f64;
    let mean = base + shift;
    v.iter().map(|x| x - mean).collect()
}

fn check_pair(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    Ok(())
}

/// `1 - Var(y_pred - y_true) / Var(y_true)` with population variances.
///
/// The error variance is evaluated as the mean of
/// `((p_i - mean p) - (y_i - mean y))^2`, which equals `Var(p - y)` and makes
/// a constant predictor score exactly 0.
pub fn explained_variance(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let cy = centered(y_true);
    let cp = centered(y_pred);
    let n = y_true.len() as f64;
    let var_y = cy.iter().map(|v| v * v).sum::<f64>() / n;
    if var_y == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let var_e = cp.iter().zip(&cy).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n;
    Ok(1.0 - var_e / var_y)
}

pub fn mean_absolute_error(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    Ok(y_true.iter().zip(y_pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / y_true.len() as f64)
}
