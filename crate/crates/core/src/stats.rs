//! Differencing, correlograms and the augmented Dickey-Fuller test.

use serde::{Deserialize, Serialize};

use crate::error::{ForecastError, Result};
use crate::linalg::ols;

/// Applies the first-difference operator `order` times.
pub fn difference(y: &[f64], order: usize) -> Result<Vec<f64>> {
    if order >= y.len() {
        return Err(ForecastError::InsufficientData {
            required: order + 1,
            actual: y.len(),
        });
    }
    let mut out = y.to_vec();
    for _ in 0..order {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelogramPoint {
    pub lag: usize,
    pub value: f64,
    /// Half-width of the 95% band for white noise, `1.96 / sqrt(n)`.
    pub confidence_bound: f64,
}

fn centered(y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let dev: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let ss: f64 = dev.iter().map(|d| d * d).sum();
    if !(ss > 0.0) {
        return Err(ForecastError::InvalidInput(
            "series is constant; autocorrelation is undefined".into(),
        ));
    }
    Ok((dev, ss))
}

fn autocorrelations(y: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= y.len() {
        return Err(ForecastError::param(
            "max_lag",
            format!("{max_lag} must be below the series length {}", y.len()),
        ));
    }
    let (dev, ss) = centered(y)?;
    Ok((0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                dev[k..].iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>() / ss
            }
        })
        .collect())
}

/// Sample autocorrelation with the biased (`n`) denominator, lags `0..=max_lag`.
pub fn acf(y: &[f64], max_lag: usize) -> Result<Vec<CorrelogramPoint>> {
    let bound = 1.96 / (y.len() as f64).sqrt();
    Ok(autocorrelations(y, max_lag)?
        .into_iter()
        .enumerate()
        .map(|(lag, value)| CorrelogramPoint {
            lag,
            value,
            confidence_bound: bound,
        })
        .collect())
}

/// Partial autocorrelation at lags `1..=max_lag` via the Durbin-Levinson recursion.
pub fn pacf(y: &[f64], max_lag: usize) -> Result<Vec<CorrelogramPoint>> {
    if max_lag == 0 || 2 * max_lag >= y.len() {
        return Err(ForecastError::param(
            "max_lag",
            format!("{max_lag} must be in 1..n/2 for n = {}", y.len()),
        ));
    }
    let rho = autocorrelations(y, max_lag)?;
    let bound = 1.96 / (y.len() as f64).sqrt();
    let mut phi = vec![0.0; max_lag + 1];
    let mut out = Vec::with_capacity(max_lag);
    for k in 1..=max_lag {
        let num = rho[k] - (1..k).map(|j| phi[j] * rho[k - j]).sum::<f64>();
        let den = 1.0 - (1..k).map(|j| phi[j] * rho[j]).sum::<f64>();
        if den.abs() < 1e-12 {
            return Err(ForecastError::Numerical(format!(
                "Toeplitz system is singular at lag {k}"
            )));
        }
        let kk = num / den;
        let prev = phi.clone();
        for j in 1..k {
            phi[j] = prev[j] - kk * prev[k - j];
        }
        phi[k] = kk;
        out.push(CorrelogramPoint {
            lag: k,
            value: kk,
            confidence_bound: bound,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    /// t-ratio on the lagged level.
    pub statistic: f64,
    pub lags_used: usize,
    pub n_obs: usize,
    pub critical_value_5pct: f64,
    pub reject_unit_root: bool,
}

/// MacKinnon (2010) response surface for the constant-only 5% critical value.
pub fn adf_critical_value_5pct(n_obs: usize) -> f64 {
    let t = n_obs as f64;
    -2.86154 - 2.8903 / t - 4.234 / (t * t) - 40.040 / (t * t * t)
}

/// Lag policy for the augmented regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagPolicy {
    /// `floor(12 * (n/100)^(1/4))`, then drop trailing lags with |t| < 1.645.
    Schwert,
    Fixed(usize),
}

pub fn schwert_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Regression rows for Δy_t on (1, y_{t-1}, Δy_{t-1..t-k}) for t indices in `from..`.
fn adf_design(y: &[f64], dy: &[f64], lags: usize, from: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::with_capacity(dy.len() - from);
    let mut target = Vec::with_capacity(dy.len() - from);
    for i in from..dy.len() {
        let mut row = Vec::with_capacity(2 + lags);
        row.push(1.0);
        row.push(y[i]);
        for j in 1..=lags {
            row.push(dy[i - j]);
        }
        rows.push(row);
        target.push(dy[i]);
    }
    (rows, target)
}

/// Augmented Dickey-Fuller test with a constant and no trend.
///
/// A constant input is treated as trivially stationary: the statistic is
/// negative infinity and the unit root is rejected.
pub fn adf_test(y: &[f64], policy: LagPolicy) -> Result<AdfResult> {
    let n = y.len();
    if n < 20 {
        return Err(ForecastError::InsufficientData {
            required: 20,
            actual: n,
        });
    }
    if y.iter().all(|&v| v == y[0]) {
        return Ok(AdfResult {
            statistic: f64::NEG_INFINITY,
            lags_used: 0,
            n_obs: n - 1,
            critical_value_5pct: adf_critical_value_5pct(n - 1),
            reject_unit_root: true,
        });
    }
    let dy = difference(y, 1)?;
    let max_lag = match policy {
        LagPolicy::Schwert => schwert_max_lag(n),
        LagPolicy::Fixed(k) => k,
    };
    if max_lag + 4 >= dy.len() {
        return Err(ForecastError::InsufficientData {
            required: max_lag + 5,
            actual: dy.len(),
        });
    }

    let singular = || ForecastError::Numerical("singular ADF regression".into());
    let mut lags = max_lag;
    if policy == LagPolicy::Schwert {
        // general-to-specific on a common sample
        while lags > 0 {
            let (rows, target) = adf_design(y, &dy, lags, max_lag);
            let fit = ols(&rows, &target).ok_or_else(singular)?;
            let t_last = fit.beta[lags + 1] / fit.std_err[lags + 1];
            if t_last.abs() >= 1.645 {
                break;
            }
            lags -= 1;
        }
    }
    let (rows, target) = adf_design(y, &dy, lags, lags);
    let fit = ols(&rows, &target).ok_or_else(singular)?;
    let statistic = fit.beta[1] / fit.std_err[1];
    let n_obs = target.len();
    let critical = adf_critical_value_5pct(n_obs);
    Ok(AdfResult {
        statistic,
        lags_used: lags,
        n_obs,
        critical_value_5pct: critical,
        reject_unit_root: statistic < critical,
    })
}
