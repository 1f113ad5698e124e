use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub rmse: f64,
    pub mae: f64,
    pub weighted_mse: f64,
    /// `None` when the test targets are constant.
    pub r2: Option<f64>,
    /// RMSE over test rows with `y > rare_threshold`; `None` if there are none.
    pub rare_region_rmse: Option<f64>,
    pub rare_count: usize,
}

/// Scores of `y_pred` against `y_true`. `weights` are rescaled to sum to one
/// for the weighted MSE.
pub fn metrics(
    y_true: &[f64],
    y_pred: &[f64],
    weights: &[f64],
    rare_threshold: f64,
) -> Result<MetricSet> {
    let n = y_true.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no test rows to score".into()));
    }
    if y_pred.len() != n || weights.len() != n {
        return Err(Error::Shape(format!(
            "{n} targets, {} predictions, {} weights",
            y_pred.len(),
            weights.len()
        )));
    }
    if y_true.iter().chain(y_pred).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets or predictions".into()));
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument("metric weights must be positive".into()));
    }
    let nf = n as f64;
    let sse: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    let sae: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum();
    let wsum: f64 = weights.iter().sum();
    let wmse = y_true
        .iter()
        .zip(y_pred)
        .zip(weights)
        .map(|((t, p), w)| w * (t - p).powi(2))
        .sum::<f64>()
        / wsum;
    let mean = y_true.iter().sum::<f64>() / nf;
    let sst: f64 = y_true.iter().map(|t| (t - mean).powi(2)).sum();
    let r2 = (sst > 0.0).then(|| 1.0 - sse / sst);

    let mut rare_sse = 0.0;
    let mut rare_count = 0;
    for (t, p) in y_true.iter().zip(y_pred) {
        if *t > rare_threshold {
            rare_sse += (t - p).powi(2);
            rare_count += 1;
        }
    }
    Ok(MetricSet {
        rmse: (sse / nf).sqrt(),
        mae: sae / nf,
        weighted_mse: wmse,
        r2,
        rare_region_rmse: (rare_count > 0).then(|| (rare_sse / rare_count as f64).sqrt()),
        rare_count,
    })
}
