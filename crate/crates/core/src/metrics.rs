//! Point-forecast error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{ForecastError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    pub rmse: f64,
    /// Absent when the actual values are constant.
    pub r2: Option<f64>,
    /// Percent; absent when some actual value is zero.
    pub mape: Option<f64>,
    pub n: usize,
}

impl EvalReport {
    /// `MAE RMSE R2 MAPE` columns, `NA` for absent values.
    pub fn table_row(&self, label: &str) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        format!(
            "{label:<20} {:>12.6} {:>12.6} {:>12} {:>12}",
            self.mae,
            self.rmse,
            opt(self.r2),
            opt(self.mape)
        )
    }

    pub fn table_header() -> String {
        format!("{:<20} {:>12} {:>12} {:>12} {:>12}", "model", "MAE", "RMSE", "R2", "MAPE%")
    }
}

pub fn evaluate(predicted: &[f64], actual: &[f64]) -> Result<EvalReport> {
    if predicted.len() != actual.len() {
        return Err(ForecastError::LengthMismatch {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(ForecastError::InsufficientData { required: 1, actual: 0 });
    }
    if predicted.iter().chain(actual).any(|v| !v.is_finite()) {
        return Err(ForecastError::InvalidInput("metrics need finite values".into()));
    }
    let n = actual.len() as f64;
    let abs: f64 = predicted.iter().zip(actual).map(|(f, r)| (f - r).abs()).sum();
    let sse: f64 = predicted.iter().zip(actual).map(|(f, r)| (f - r).powi(2)).sum();
    let mean = actual.iter().sum::<f64>() / n;
    let sst: f64 = actual.iter().map(|r| (r - mean).powi(2)).sum();
    let constant = actual.iter().all(|r| *r == actual[0]);
    let r2 = (!constant && sst > 0.0).then(|| 1.0 - sse / sst);
    let mape = actual
        .iter()
        .all(|r| *r != 0.0)
        .then(|| 100.0 / n * predicted.iter().zip(actual).map(|(f, r)| ((f - r) / r).abs()).sum::<f64>());
    let mae = abs / n;
    // guards the power-mean inequality against last-bit rounding
    let rmse = (sse / n).sqrt().max(mae);
    Ok(EvalReport {
        mae,
        rmse,
        r2,
        mape,
        n: actual.len(),
    })
}
