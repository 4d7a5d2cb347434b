//! Lag, trailing-window and calendar features for residual regression.

use chrono::{Datelike, NaiveDateTime, Timelike};

use crate::error::{ForecastError, Result};
use crate::series::TimeSeries;

pub const LAGS: [usize; 6] = [1, 2, 3, 24, 48, 168];
pub const WINDOWS: [usize; 3] = [3, 24, 168];
/// First row index with a complete history.
pub const MIN_HISTORY: usize = 168;

/// Column names in matrix order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = LAGS.iter().map(|k| format!("lag_{k}")).collect();
    names.extend(WINDOWS.iter().map(|w| format!("rollmean_{w}")));
    names.extend(WINDOWS.iter().map(|w| format!("rollstd_{w}")));
    names.extend(["hour_of_day", "day_of_week", "is_weekend"].map(String::from));
    names
}

/// Dense row-major matrix with named columns and a per-row validity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    data: Vec<f64>,
    valid: Vec<bool>,
}

impl FeatureMatrix {
    /// Generic matrix; every row is valid.
    pub fn new(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        if p == 0 {
            return Err(ForecastError::InvalidInput("feature matrix needs at least one column".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(ForecastError::LengthMismatch {
                    expected: p,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            names,
            data,
            valid: vec![true; rows.len()],
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.valid.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn valid_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.valid[i]).collect()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some((0..self.n_rows()).map(|i| self.get(i, j)).collect())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Feature row for index `t = history.len()` using only `history` (values before `t`).
pub fn feature_row(history: &[f64], timestamp: NaiveDateTime) -> Option<Vec<f64>> {
    let t = history.len();
    if t < MIN_HISTORY {
        return None;
    }
    let mut row = Vec::with_capacity(15);
    row.extend(LAGS.iter().map(|k| history[t - k]));
    row.extend(WINDOWS.iter().map(|w| mean(&history[t - w..])));
    row.extend(WINDOWS.iter().map(|w| sample_std(&history[t - w..])));
    row.extend(calendar(timestamp));
    Some(row)
}

fn calendar(ts: NaiveDateTime) -> [f64; 3] {
    let dow = ts.weekday().num_days_from_monday();
    [ts.hour() as f64, dow as f64, if dow >= 5 { 1.0 } else { 0.0 }]
}

/// Builds the feature matrix for every index of `target`; rows before
/// index 168 are marked invalid and hold NaN in the history columns.
pub fn build_features(series: &TimeSeries, target: &[f64]) -> Result<FeatureMatrix> {
    if target.len() != series.len() {
        return Err(ForecastError::LengthMismatch {
            expected: series.len(),
            actual: target.len(),
        });
    }
    if target.len() <= MIN_HISTORY {
        return Err(ForecastError::InsufficientData {
            required: MIN_HISTORY + 1,
            actual: target.len(),
        });
    }
    let names = feature_names();
    let p = names.len();
    let mut data = Vec::with_capacity(target.len() * p);
    let mut valid = Vec::with_capacity(target.len());
    for t in 0..target.len() {
        match feature_row(&target[..t], series.timestamp(t)) {
            Some(row) => {
                data.extend(row);
                valid.push(true);
            }
            None => {
                data.extend(std::iter::repeat(f64::NAN).take(p - 3));
                data.extend(calendar(series.timestamp(t)));
                valid.push(false);
            }
        }
    }
    Ok(FeatureMatrix { names, data, valid })
}
