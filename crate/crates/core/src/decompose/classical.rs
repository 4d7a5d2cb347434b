use super::{Decomposition, Mode};
use crate::error::{ForecastError, Result};
use crate::series::TimeSeries;

/// Centered moving average of width `period` (2×MA for even periods).
/// Returns the trend on `[half, n - half)` and `half`.
fn centered_trend(y: &[f64], period: usize) -> (Vec<f64>, usize) {
    let n = y.len();
    let p = period as f64;
    if period % 2 == 1 {
        let half = (period - 1) / 2;
        let t = (half..n - half)
            .map(|c| y[c - half..=c + half].iter().sum::<f64>() / p)
            .collect();
        (t, half)
    } else {
        let half = period / 2;
        let t = (half..n - half)
            .map(|c| {
                let inner: f64 = y[c - half + 1..c + half].iter().sum();
                (0.5 * y[c - half] + inner + 0.5 * y[c + half]) / p
            })
            .collect();
        (t, half)
    }
}

/// Multiplicative classical decomposition.
///
/// Edge trend values, where the centered average is undefined, repeat the
/// nearest interior value. Seasonal indices are per-phase means of `Y / T`
/// over interior points, rescaled to geometric mean 1.
pub fn classical_decompose(series: &TimeSeries, period: usize) -> Result<Decomposition> {
    let y = series.values();
    let n = y.len();
    if period < 2 {
        return Err(ForecastError::param("period", "must be at least 2"));
    }
    if period > n / 2 {
        return Err(ForecastError::InsufficientData {
            required: 2 * period,
            actual: n,
        });
    }
    if !series.all_positive() {
        return Err(ForecastError::InvalidInput(
            "multiplicative decomposition requires strictly positive values".into(),
        ));
    }

    let (interior, half) = centered_trend(y, period);
    let first = interior[0];
    let last = interior[interior.len() - 1];
    let mut trend = Vec::with_capacity(n);
    trend.extend(std::iter::repeat(first).take(half));
    trend.extend_from_slice(&interior);
    trend.extend(std::iter::repeat(last).take(n - trend.len()));

    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for t in half..n - half {
        sums[t % period] += y[t] / trend[t];
        counts[t % period] += 1;
    }
    let raw: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let log_mean = raw.iter().map(|v| v.ln()).sum::<f64>() / period as f64;
    let scale = log_mean.exp();
    let indices: Vec<f64> = raw.iter().map(|v| v / scale).collect();

    let seasonal: Vec<f64> = (0..n).map(|t| indices[t % period]).collect();
    let residual = (0..n).map(|t| y[t] / (trend[t] * seasonal[t])).collect();
    Ok(Decomposition {
        mode: Mode::Multiplicative,
        period,
        trend,
        seasonal,
        residual,
    })
}
