//! ARIMA(p, d, q) estimation by conditional sum of squares and recursive forecasting.
//!
//! The differenced series `w` follows
//! `w_t = mu + sum phi_i w_{t-i} + e_t + sum theta_j e_{t-j}`.
//! Residuals are computed conditionally: the recursion starts at `t = p`
//! with presample innovations set to zero.

use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{ForecastError, Result};
use crate::linalg::ols;
use crate::stats::difference;

/// Upper bound on `p` and `q`.
pub const MAX_ORDER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub const fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p > MAX_ORDER || self.q > MAX_ORDER {
            return Err(ForecastError::param(
                "order",
                format!("p and q must not exceed {MAX_ORDER}, got {self}"),
            ));
        }
        if self.p + self.q == 0 && self.d == 0 {
            // white noise around a mean is allowed; it is still a valid model
        }
        Ok(())
    }

    /// Grid of candidate orders with `p, q` in `0..=max_pq` and `d` in `0..=max_d`.
    pub fn grid(max_pq: usize, max_d: usize) -> Vec<ArimaOrder> {
        let mut out = Vec::new();
        for d in 0..=max_d {
            for p in 0..=max_pq {
                for q in 0..=max_pq {
                    out.push(ArimaOrder::new(p, d, q));
                }
            }
        }
        out
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

impl std::str::FromStr for ArimaOrder {
    type Err = ForecastError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s
            .trim_matches(|c| c == '(' || c == ')')
            .split(',')
            .map(str::trim)
            .collect();
        let bad = || ForecastError::param("order", format!("expected p,d,q but got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let v: Vec<usize> = parts
            .iter()
            .map(|p| p.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        Ok(ArimaOrder::new(v[0], v[1], v[2]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub mu: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    /// Conditional sum of squares at the accepted parameters.
    pub css: f64,
    pub n_train: usize,
    /// Number of residuals entering the sum of squares.
    pub n_effective: usize,
    /// Last value of each differencing level `0..d` of the training series.
    pub level_tail: Vec<f64>,
    /// Last `p` values of the differenced training series.
    pub w_tail: Vec<f64>,
    /// Last `q` training residuals.
    pub eps_tail: Vec<f64>,
    pub converged: bool,
}

struct Params<'a> {
    mu: f64,
    phi: &'a [f64],
    theta: &'a [f64],
}

/// Runs the innovation recursion; returns `(one-step predictions, residuals)`
/// for `t >= p` (entries before `p` are zero).
fn recursion(w: &[f64], p: &Params) -> (Vec<f64>, Vec<f64>) {
    let n = w.len();
    let ar = p.phi.len();
    let mut pred = vec![0.0; n];
    let mut eps = vec![0.0; n];
    for t in ar..n {
        let mut v = p.mu;
        for (i, phi) in p.phi.iter().enumerate() {
            v += phi * w[t - i - 1];
        }
        for (j, theta) in p.theta.iter().enumerate() {
            if t > j {
                v += theta * eps[t - j - 1];
            }
        }
        pred[t] = v;
        eps[t] = w[t] - v;
    }
    (pred, eps)
}

fn css_of(w: &[f64], p: &Params) -> f64 {
    let (_, eps) = recursion(w, p);
    eps[p.phi.len()..].iter().map(|e| e * e).sum()
}

/// Roots of `x^k + c_1 x^{k-1} + ... + c_k` as companion-matrix
/// eigenvalues; `None` when the eigenvalue iteration does not converge.
fn companion_roots(c: &[f64]) -> Option<Vec<Complex<f64>>> {
    let k = c.len();
    if k == 0 {
        return Some(Vec::new());
    }
    if c.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut m = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        m[(0, j)] = -c[j];
    }
    for i in 1..k {
        m[(i, i - 1)] = 1.0;
    }
    let schur = Schur::try_new(m, f64::EPSILON, 10_000)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest root modulus; infinite when the roots cannot be computed.
fn max_modulus(c: &[f64]) -> f64 {
    companion_roots(c).map_or(f64::INFINITY, |r| r.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Whether `1 - sum phi_i z^i` has all roots outside the unit circle.
pub fn is_stationary(phi: &[f64]) -> bool {
    let c: Vec<f64> = phi.iter().map(|v| -v).collect();
    max_modulus(&c) < 1.0
}

/// Whether `1 + sum theta_j z^j` has all roots outside the unit circle.
pub fn is_invertible(theta: &[f64]) -> bool {
    max_modulus(theta) < 1.0
}

/// Reflects inverse roots lying on or outside the unit circle to `1 / conj(z)`.
/// `c` are the monic coefficients `x^k + c_1 x^{k-1} + ...`.
fn reflect_monic(c: &[f64]) -> Vec<f64> {
    let Some(roots) = companion_roots(c) else {
        return c.to_vec();
    };
    if roots.iter().all(|z| z.norm() < 1.0) {
        return c.to_vec();
    }
    let reflected: Vec<Complex<f64>> = roots
        .into_iter()
        .map(|z| {
            let r = z.norm();
            if r > 1.0 {
                z / (r * r)
            } else if r >= 1.0 - 1e-9 {
                z * (1.0 - 1e-6)
            } else {
                z
            }
        })
        .collect();
    // expand prod (x - z_k)
    let mut poly = vec![Complex::new(1.0, 0.0)];
    for z in &reflected {
        let mut next = vec![Complex::new(0.0, 0.0); poly.len() + 1];
        for (i, a) in poly.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= a * z;
        }
        poly = next;
    }
    poly[1..].iter().map(|v| v.re).collect()
}

/// Projects AR and MA coefficients into the stationary / invertible region.
pub fn project(phi: &[f64], theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let c: Vec<f64> = phi.iter().map(|v| -v).collect();
    let phi = reflect_monic(&c).into_iter().map(|v| -v).collect();
    let theta = reflect_monic(theta);
    (phi, theta)
}

struct Layout {
    mean: bool,
    p: usize,
    q: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        usize::from(self.mean) + self.p + self.q
    }

    fn split<'a>(&self, x: &'a [f64]) -> Params<'a> {
        let off = usize::from(self.mean);
        Params {
            mu: if self.mean { x[0] } else { 0.0 },
            phi: &x[off..off + self.p],
            theta: &x[off + self.p..],
        }
    }

    fn join(&self, mu: f64, phi: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        if self.mean {
            x.push(mu);
        }
        x.extend_from_slice(phi);
        x.extend_from_slice(theta);
        x
    }
}

/// Hannan-Rissanen: long autoregression for innovations, then OLS on lags
/// of the series and of the estimated innovations.
fn hannan_rissanen(w: &[f64], order: ArimaOrder, mean: bool) -> (f64, Vec<f64>, Vec<f64>) {
    let n = w.len();
    let fallback = (if mean { w.iter().sum::<f64>() / n as f64 } else { 0.0 }, vec![0.0; order.p], vec![0.0; order.q]);
    let with_const = |row: &mut Vec<f64>| {
        if mean {
            row.push(1.0)
        }
    };
    let eps: Vec<f64> = if order.q > 0 {
        let m = (order.p + order.q + 5).max(10).min(n / 4);
        if m == 0 || n <= 2 * m + order.q + 2 {
            return fallback;
        }
        let rows: Vec<Vec<f64>> = (m..n)
            .map(|t| {
                let mut r = Vec::new();
                with_const(&mut r);
                r.extend((1..=m).map(|i| w[t - i]));
                r
            })
            .collect();
        let Some(fit) = ols(&rows, &w[m..]) else {
            return fallback;
        };
        let mut e = vec![0.0; n];
        e[m..].copy_from_slice(&fit.residuals);
        e
    } else {
        vec![0.0; n]
    };
    let start = if order.q > 0 {
        (order.p + order.q + 5).max(10).min(n / 4) + order.q
    } else {
        order.p
    };
    if order.p + order.q == 0 || n <= start + order.p + order.q + 2 {
        return fallback;
    }
    let rows: Vec<Vec<f64>> = (start..n)
        .map(|t| {
            let mut r = Vec::new();
            with_const(&mut r);
            r.extend((1..=order.p).map(|i| w[t - i]));
            r.extend((1..=order.q).map(|j| eps[t - j]));
            r
        })
        .collect();
    let Some(fit) = ols(&rows, &w[start..]) else {
        return fallback;
    };
    let off = usize::from(mean);
    let mu = if mean { fit.beta[0] } else { 0.0 };
    (
        mu,
        fit.beta[off..off + order.p].to_vec(),
        fit.beta[off + order.p..].to_vec(),
    )
}

#[derive(Debug)]
struct Minimum {
    x: Vec<f64>,
    f: f64,
    converged: bool,
}

/// Nelder-Mead simplex minimisation. Infinite objective values act as a barrier.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], max_iter: usize) -> Minimum {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut v = start.to_vec();
        let step = if v[i].abs() > 1e-3 { 0.1 * v[i].abs() } else { 0.05 };
        v[i] += step;
        if !f(&v).is_finite() {
            v[i] = start[i] - step;
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut converged = false;

    for _ in 0..max_iter {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        let (best, worst) = (values[0], values[n]);
        let size = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if worst.is_finite() && (worst - best).abs() <= 1e-12 * (best.abs() + 1e-12) && size < 1e-7 {
            converged = true;
            break;
        }
        if size < 1e-12 {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = simplex[i]
                        .iter()
                        .zip(&simplex[0])
                        .map(|(a, b)| b + 0.5 * (a - b))
                        .collect();
                    values[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        f: values[best],
        converged,
    }
}

/// Fits ARIMA by conditional sum of squares.
///
/// The constant is estimated only when `d == 0`. The search starts from a
/// Hannan-Rissanen estimate reflected into the admissible region and is
/// restricted to stationary AR and invertible MA polynomials.
pub fn fit(y: &[f64], order: ArimaOrder) -> Result<ArimaModel> {
    order.validate()?;
    let required = order.d + order.p.max(order.q) + 11;
    if y.len() < required {
        return Err(ForecastError::InsufficientData {
            required,
            actual: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ForecastError::InvalidInput("non-finite observation".into()));
    }
    let w = difference(y, order.d)?;
    let layout = Layout {
        mean: order.d == 0,
        p: order.p,
        q: order.q,
    };

    let (mu0, phi0, theta0) = hannan_rissanen(&w, order, layout.mean);
    let (mut phi0, mut theta0) = project(&phi0, &theta0);
    // boundary roots can survive reflection; pull them inside, and fall
    // back to white noise when even that fails
    let mut shrinks = 0;
    while !is_stationary(&phi0) || !is_invertible(&theta0) {
        if shrinks == 200 {
            phi0.iter_mut().for_each(|v| *v = 0.0);
            theta0.iter_mut().for_each(|v| *v = 0.0);
            break;
        }
        phi0.iter_mut().for_each(|v| *v *= 0.9);
        theta0.iter_mut().for_each(|v| *v *= 0.9);
        shrinks += 1;
    }
    let start = layout.join(mu0, &phi0, &theta0);

    let objective = |x: &[f64]| -> f64 {
        let p = layout.split(x);
        if !is_stationary(p.phi) || !is_invertible(p.theta) {
            return f64::INFINITY;
        }
        let v = css_of(&w, &p);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let (x, converged) = if layout.dim() == 0 {
        (Vec::new(), true)
    } else {
        let first = nelder_mead(&objective, &start, 400 * layout.dim());
        // restart from the optimum to escape premature collapse
        let second = nelder_mead(&objective, &first.x, 400 * layout.dim());
        if second.f <= first.f {
            (second.x, second.converged)
        } else {
            (first.x, first.converged)
        }
    };

    let params = layout.split(&x);
    let (phi, theta) = project(params.phi, params.theta);
    ArimaModel::with_parameters(y, order, params.mu, phi, theta).map(|mut m| {
        m.converged = converged;
        m
    })
}

impl ArimaModel {
    /// Builds a model with given coefficients, filtering `y` to obtain the
    /// residual state, innovation variance and forecast tails.
    pub fn with_parameters(
        y: &[f64],
        order: ArimaOrder,
        mu: f64,
        phi: Vec<f64>,
        theta: Vec<f64>,
    ) -> Result<Self> {
        order.validate()?;
        if phi.len() != order.p || theta.len() != order.q {
            return Err(ForecastError::Model(format!(
                "coefficient counts ({}, {}) do not match order {order}",
                phi.len(),
                theta.len()
            )));
        }
        let w = difference(y, order.d)?;
        if w.len() <= order.p {
            return Err(ForecastError::InsufficientData {
                required: order.d + order.p + 1,
                actual: y.len(),
            });
        }
        let (_, eps) = recursion(
            &w,
            &Params {
                mu,
                phi: &phi,
                theta: &theta,
            },
        );
        let n_effective = w.len() - order.p;
        let css: f64 = eps[order.p..].iter().map(|e| e * e).sum();
        let sigma2 = (css / n_effective as f64).max(f64::MIN_POSITIVE);
        let level_tail = (0..order.d)
            .map(|k| *difference(y, k).expect("k < d < n").last().expect("non-empty"))
            .collect();
        Ok(Self {
            order,
            mu,
            w_tail: w[w.len() - order.p..].to_vec(),
            eps_tail: eps[eps.len() - order.q.min(eps.len())..].to_vec(),
            phi,
            theta,
            sigma2,
            css,
            n_train: y.len(),
            n_effective,
            level_tail,
            converged: true,
        })
    }

    /// Akaike criterion `n ln(sigma2) + 2 (p + q + 1)`.
    pub fn aic(&self) -> f64 {
        self.n_effective as f64 * self.sigma2.ln() + 2.0 * (self.order.p + self.order.q + 1) as f64
    }

    /// Recursive point forecasts; future innovations are zero.
    pub fn forecast(&self, horizon: usize) -> Result<Vec<f64>> {
        if horizon == 0 {
            return Err(ForecastError::param("horizon", "must be at least 1"));
        }
        let (p, q) = (self.order.p, self.order.q);
        let mut w_hist = self.w_tail.clone();
        let mut e_hist = self.eps_tail.clone();
        let mut levels = self.level_tail.clone();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let mut v = self.mu;
            for i in 0..p {
                v += self.phi[i] * w_hist[w_hist.len() - 1 - i];
            }
            for j in 0..q.min(e_hist.len()) {
                v += self.theta[j] * e_hist[e_hist.len() - 1 - j];
            }
            w_hist.push(v);
            e_hist.push(0.0);
            let mut value = v;
            for lvl in levels.iter_mut().rev() {
                *lvl += value;
                value = *lvl;
            }
            out.push(value);
        }
        Ok(out)
    }

    /// Residuals of `y` under this model on the original index; the first
    /// `d + p` entries are zero.
    pub fn residuals(&self, y: &[f64]) -> Result<Vec<f64>> {
        let w = difference(y, self.order.d)?;
        let (_, eps) = recursion(
            &w,
            &Params {
                mu: self.mu,
                phi: &self.phi,
                theta: &self.theta,
            },
        );
        let mut out = vec![0.0; self.order.d];
        out.extend(eps);
        Ok(out)
    }

    /// One-step-ahead predictions of every index of `y` (teacher forced), plus
    /// the prediction for the index just past the end. Indices before
    /// `d + p` carry no prediction and hold the observed value.
    pub fn one_step(&self, y: &[f64]) -> Result<Vec<f64>> {
        let d = self.order.d;
        let mut ext = y.to_vec();
        ext.push(0.0);
        let w = difference(&ext, d)?;
        let (pred, _) = recursion(
            &w,
            &Params {
                mu: self.mu,
                phi: &self.phi,
                theta: &self.theta,
            },
        );
        let start = d + self.order.p;
        let mut out = Vec::with_capacity(ext.len());
        for i in 0..ext.len() {
            if i < start {
                out.push(ext[i]);
                continue;
            }
            // y_i = w_{i-d} + (y_i - w_{i-d}), the bracket only involves y_{<i}
            out.push(pred[i - d] + (ext[i] - w[i - d]));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| ForecastError::Model(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ForecastError::Model(e.to_string()))
    }
}

/// Fits every candidate and returns the AIC minimiser; exact ties prefer
/// smaller `p + q`, then smaller `p`.
pub fn select_order(y: &[f64], candidates: &[ArimaOrder]) -> Result<(ArimaOrder, Vec<(ArimaOrder, f64)>)> {
    if candidates.is_empty() {
        return Err(ForecastError::param("candidates", "candidate set is empty"));
    }
    let scored: Vec<(ArimaOrder, f64)> = candidates
        .iter()
        .filter_map(|&o| fit(y, o).ok().map(|m| (o, m.aic())))
        .filter(|(_, aic)| aic.is_finite())
        .collect();
    let best = scored
        .iter()
        .min_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then((a.0.p + a.0.q).cmp(&(b.0.p + b.0.q)))
                .then(a.0.p.cmp(&b.0.p))
        })
        .map(|(o, _)| *o)
        .ok_or_else(|| ForecastError::Model("no candidate order could be fitted".into()))?;
    Ok((best, scored))
}
