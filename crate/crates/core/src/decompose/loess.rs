//! Local polynomial regression with tricube neighbourhood weights.

use nalgebra::{Matrix3, Vector3};

use crate::error::{ForecastError, Result};

#[inline]
fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

/// Neighbourhood smoother over sorted abscissae.
///
/// When `span` exceeds the number of points the bandwidth is widened by
/// `(span - n) / 2` average spacings, as in the Fortran STL reference code.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Loess<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub robustness: Option<&'a [f64]>,
    pub span: usize,
    pub degree: usize,
}

impl Loess<'_> {
    /// Local fit evaluated at `x0`; `None` when every weight in the window is zero.
    pub fn fit_at(&self, x0: f64) -> Option<f64> {
        let n = self.x.len();
        let q = self.span.min(n);
        // slide the q-point window towards x0
        let mut left = match self.x.binary_search_by(|v| v.total_cmp(&x0)) {
            Ok(i) | Err(i) => i.saturating_sub(q).min(n - q),
        };
        while left + q < n && x0 - self.x[left] > self.x[left + q] - x0 {
            left += 1;
        }
        let right = left + q - 1;
        let mut h = (x0 - self.x[left]).max(self.x[right] - x0);
        if self.span > n {
            let spacing = if n > 1 {
                (self.x[n - 1] - self.x[0]) / (n - 1) as f64
            } else {
                1.0
            };
            h += (self.span - n) as f64 / 2.0 * spacing;
        }

        let mut s = [0.0f64; 5];
        let mut t = [0.0f64; 3];
        for i in left..=right {
            let d = self.x[i] - x0;
            let mut w = if h > 0.0 { tricube(d.abs() / h) } else { 1.0 };
            if let Some(rw) = self.robustness {
                w *= rw[i];
            }
            if w <= 0.0 {
                continue;
            }
            let mut dp = 1.0;
            for k in 0..5 {
                s[k] += w * dp;
                if k < 3 {
                    t[k] += w * dp * self.y[i];
                }
                dp *= d;
            }
        }
        if !(s[0] > 0.0) {
            return None;
        }
        let mean = t[0] / s[0];
        if self.degree >= 2 {
            let m = Matrix3::new(s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4]);
            let rhs = Vector3::new(t[0], t[1], t[2]);
            let scale = s[0] * s[4];
            if let Some(sol) = m.lu().solve(&rhs) {
                if m.determinant().abs() > 1e-12 * scale * s[2] && sol[0].is_finite() {
                    return Some(sol[0]);
                }
            }
        }
        if self.degree >= 1 {
            let det = s[0] * s[2] - s[1] * s[1];
            if det > 1e-12 * s[0] * s[2] {
                return Some((s[2] * t[0] - s[1] * t[1]) / det);
            }
        }
        Some(mean)
    }
}

/// LOESS smooth of `y` over `x`, evaluated at every `x`.
///
/// `weights` are optional robustness weights in `[0, 1]` multiplied into the
/// tricube distance weights.
pub fn loess_smooth(
    x: &[f64],
    y: &[f64],
    span: usize,
    degree: usize,
    weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = x.len();
    if y.len() != n {
        return Err(ForecastError::LengthMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    if n == 0 {
        return Err(ForecastError::InvalidInput("empty input".into()));
    }
    if !(1..=2).contains(&degree) {
        return Err(ForecastError::param("degree", "must be 1 or 2"));
    }
    if span < degree + 1 {
        return Err(ForecastError::param(
            "span",
            format!("span {span} is too small for degree {degree}"),
        ));
    }
    if span > n {
        return Err(ForecastError::param(
            "span",
            format!("span {span} exceeds {n} points"),
        ));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ForecastError::InvalidInput("x must be strictly increasing".into()));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(ForecastError::LengthMismatch {
                expected: n,
                actual: w.len(),
            });
        }
        if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ForecastError::param("weights", "robustness weights must lie in [0, 1]"));
        }
    }
    let smoother = Loess {
        x,
        y,
        robustness: weights,
        span,
        degree,
    };
    x.iter()
        .map(|&x0| {
            smoother.fit_at(x0).ok_or_else(|| {
                ForecastError::Numerical(format!("all weights are zero in the window around {x0}"))
            })
        })
        .collect()
}

/// Trailing mean over `window` points; output has length `n - window + 1`.
pub fn moving_average(y: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(ForecastError::param("window", "must be at least 1"));
    }
    if window > y.len() {
        return Err(ForecastError::param(
            "window",
            format!("window {window} exceeds {} points", y.len()),
        ));
    }
    let w = window as f64;
    Ok(y.windows(window).map(|s| s.iter().sum::<f64>() / w).collect())
}
