use serde::{Deserialize, Serialize};

use super::{loess::Loess, moving_average, Decomposition, Mode};
use crate::error::{ForecastError, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StlParams {
    pub period: usize,
    pub seasonal_span: usize,
    pub low_pass_span: usize,
    pub trend_span: usize,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
}

fn next_odd(x: f64) -> usize {
    let c = x.ceil() as usize;
    if c % 2 == 0 {
        c + 1
    } else {
        c
    }
}

impl StlParams {
    /// Standard defaults: seasonal span 7, low-pass span the smallest odd
    /// integer >= period, trend span the smallest odd integer >=
    /// 1.5 * period / (1 - 1.5 / seasonal span), two inner passes and one
    /// robustness pass.
    pub fn new(period: usize) -> Self {
        let seasonal_span = 7;
        Self {
            period,
            seasonal_span,
            low_pass_span: next_odd(period as f64).max(3),
            trend_span: next_odd(1.5 * period as f64 / (1.0 - 1.5 / seasonal_span as f64)).max(3),
            inner_iterations: 2,
            outer_iterations: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period < 2 {
            return Err(ForecastError::param("period", "must be at least 2"));
        }
        for (name, span) in [
            ("seasonal_span", self.seasonal_span),
            ("low_pass_span", self.low_pass_span),
            ("trend_span", self.trend_span),
        ] {
            if span < 3 || span % 2 == 0 {
                return Err(ForecastError::param(name, format!("{span} must be odd and >= 3")));
            }
        }
        if self.inner_iterations == 0 {
            return Err(ForecastError::param("inner_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

pub fn stl_decompose(series: &TimeSeries, params: StlParams, mode: Mode) -> Result<Decomposition> {
    params.validate()?;
    let n = series.len();
    if n < 2 * params.period {
        return Err(ForecastError::InsufficientData {
            required: 2 * params.period,
            actual: n,
        });
    }
    match mode {
        Mode::Additive => {
            let (trend, seasonal, residual) = stl_additive(series.values(), &params);
            Ok(Decomposition {
                mode,
                period: params.period,
                trend,
                seasonal,
                residual,
            })
        }
        Mode::Multiplicative => {
            if !series.all_positive() {
                return Err(ForecastError::InvalidInput(
                    "multiplicative decomposition requires strictly positive values".into(),
                ));
            }
            let logs: Vec<f64> = series.values().iter().map(|v| v.ln()).collect();
            let (t, s, r) = stl_additive(&logs, &params);
            let exp = |v: Vec<f64>| v.into_iter().map(f64::exp).collect();
            Ok(Decomposition {
                mode,
                period: params.period,
                trend: exp(t),
                seasonal: exp(s),
                residual: exp(r),
            })
        }
    }
}

fn stl_additive(y: &[f64], p: &StlParams) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = y.len();
    let positions: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    let mut robustness: Option<Vec<f64>> = None;

    for pass in 0..=p.outer_iterations {
        for _ in 0..p.inner_iterations {
            let detrended: Vec<f64> = y.iter().zip(&trend).map(|(a, b)| a - b).collect();
            let cycle = cycle_subseries(&detrended, p.period, p.seasonal_span, robustness.as_deref());
            let low = low_pass(&cycle, p.period, p.low_pass_span);
            for i in 0..n {
                seasonal[i] = cycle[p.period + i] - low[i];
            }
            let deseasonal: Vec<f64> = y.iter().zip(&seasonal).map(|(a, b)| a - b).collect();
            let smoother = Loess {
                x: &positions,
                y: &deseasonal,
                robustness: robustness.as_deref(),
                span: p.trend_span,
                degree: 1,
            };
            for i in 0..n {
                trend[i] = smoother.fit_at(i as f64).unwrap_or(deseasonal[i]);
            }
        }
        if pass < p.outer_iterations {
            let resid: Vec<f64> = (0..n).map(|i| y[i] - seasonal[i] - trend[i]).collect();
            robustness = Some(bisquare_weights(&resid));
        }
    }
    let residual = (0..n).map(|i| y[i] - seasonal[i] - trend[i]).collect();
    (trend, seasonal, residual)
}

/// Smooths every cycle-subseries and extends it by one point at each end.
/// The result has length `n + 2 * period`; index `k` corresponds to time `k - period`.
fn cycle_subseries(detrended: &[f64], period: usize, span: usize, robustness: Option<&[f64]>) -> Vec<f64> {
    let n = detrended.len();
    let mut out = vec![0.0; n + 2 * period];
    for phase in 0..period {
        let values: Vec<f64> = detrended.iter().skip(phase).step_by(period).copied().collect();
        let weights: Option<Vec<f64>> =
            robustness.map(|w| w.iter().skip(phase).step_by(period).copied().collect());
        let m = values.len();
        let xs: Vec<f64> = (0..m).map(|i| i as f64).collect();
        let smoother = Loess {
            x: &xs,
            y: &values,
            robustness: weights.as_deref(),
            span: span,
            degree: 1,
        };
        let mut smoothed = Vec::with_capacity(m + 2);
        for pos in -1..=(m as i64) {
            smoothed.push(smoother.fit_at(pos as f64));
        }
        // interior fallbacks use the raw value; the ends copy their neighbour
        for k in 1..=m {
            if smoothed[k].is_none() {
                smoothed[k] = Some(values[k - 1]);
            }
        }
        let first = smoothed[0].or(smoothed[1]).unwrap_or(0.0);
        let last = smoothed[m + 1].or(smoothed[m]).unwrap_or(0.0);
        out[phase] = first;
        for k in 0..m {
            out[period + phase + k * period] = smoothed[k + 1].unwrap_or(0.0);
        }
        out[period + phase + m * period] = last;
    }
    out
}

fn low_pass(cycle: &[f64], period: usize, span: usize) -> Vec<f64> {
    let a = moving_average(cycle, period).expect("cycle longer than period");
    let b = moving_average(&a, period).expect("cycle longer than period");
    let c = moving_average(&b, 3).expect("cycle longer than period");
    let xs: Vec<f64> = (0..c.len()).map(|i| i as f64).collect();
    let smoother = Loess {
        x: &xs,
        y: &c,
        robustness: None,
        span,
        degree: 1,
    };
    (0..c.len()).map(|i| smoother.fit_at(i as f64).unwrap_or(c[i])).collect()
}

/// Bisquare weights on `|r| / (6 * median |r|)`.
fn bisquare_weights(residual: &[f64]) -> Vec<f64> {
    let mut abs: Vec<f64> = residual.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len();
    let median = if n % 2 == 1 {
        abs[n / 2]
    } else {
        0.5 * (abs[n / 2 - 1] + abs[n / 2])
    };
    let h = 6.0 * median;
    if !(h > 0.0) {
        return vec![1.0; n];
    }
    residual
        .iter()
        .map(|r| {
            let u = r.abs() / h;
            if u < 1.0 {
                let t = 1.0 - u * u;
                t * t
            } else {
                0.0
            }
        })
        .collect()
}
