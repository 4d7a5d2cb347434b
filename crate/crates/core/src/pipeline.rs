//! Decompose, forecast each component with its own model, recombine by product.
//!
//! Trend goes to the LSTM, the seasonal component to ARIMA and the
//! residual to gradient-boosted trees. Single-model baselines run the same
//! models on the raw series with the same split.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::arima::{self, ArimaModel, ArimaOrder};
use crate::decompose::{classical_decompose, stl_decompose, Decomposition, Loess, Method, Mode, StlParams};
use crate::error::{ForecastError, Result};
use crate::gbt::{self, build_features, GbtConfig, GbtModel, MIN_HISTORY};
use crate::lstm::{self, LstmConfig, LstmModel};
use crate::metrics::{evaluate, EvalReport};
use crate::rng;
use crate::series::{SplitSpec, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub period: usize,
    pub decomposition: Method,
    pub split: SplitSpec,
    pub lstm: LstmConfig,
    pub arima_order: ArimaOrder,
    pub gbt: GbtConfig,
    /// Overrides the sub-model seeds; each model draws from its own stream.
    pub seed: u64,
    /// Decompose the training range only and extend components causally.
    pub strict_causal: bool,
    /// Also report teacher-forced one-step predictions.
    pub one_step_eval: bool,
    /// Worker threads for the component fits; 0 or 1 runs them in sequence.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            period: 10,
            decomposition: Method::Classical,
            split: SplitSpec::default(),
            lstm: LstmConfig::default(),
            arima_order: ArimaOrder::new(2, 1, 2),
            gbt: GbtConfig::default(),
            seed: 42,
            strict_causal: false,
            one_step_eval: false,
            threads: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.period < 2 {
            return Err(ForecastError::param("period", "must be at least 2"));
        }
        self.lstm.validate()?;
        self.gbt.validate()?;
        self.arima_order.validate()?;
        SplitSpec::new(self.split.train_fraction)?;
        Ok(())
    }

    fn lstm_config(&self) -> LstmConfig {
        LstmConfig {
            seed: self.seed,
            ..self.lstm.clone()
        }
    }

    fn gbt_config(&self) -> GbtConfig {
        GbtConfig {
            seed: self.seed,
            ..self.gbt.clone()
        }
    }

    /// Smallest series the pipeline accepts.
    pub fn min_length(&self) -> usize {
        2 * MIN_HISTORY + self.period
    }
}

/// Forecasts and scores of one evaluation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentForecasts {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
    pub combined: Vec<f64>,
    pub combined_report: EvalReport,
    pub trend_report: EvalReport,
    pub seasonal_report: EvalReport,
    pub residual_report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub arima_converged: bool,
    pub arima_sigma2: f64,
    pub gbt_stump_rounds: usize,
    pub lstm_final_loss: f64,
    /// Stage name and wall-clock seconds.
    pub timings: Vec<(String, f64)>,
}

/// The three fitted component models.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridModels {
    pub lstm: LstmModel,
    /// Absent when the seasonal component is forecast by repetition.
    pub arima: Option<ArimaModel>,
    pub gbt: GbtModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridForecast {
    pub split_index: usize,
    pub test_actual: Vec<f64>,
    /// Components over the whole series: the full decomposition, or in
    /// strict-causal mode the training decomposition extended causally.
    pub components: Decomposition,
    /// Autoregressive multi-step forecasts from the end of the training range.
    pub rollout: ComponentForecasts,
    /// Teacher-forced one-step predictions, when requested.
    pub one_step: Option<ComponentForecasts>,
    pub diagnostics: Diagnostics,
    pub models: HybridModels,
}

impl HybridForecast {
    /// Protocol whose numbers are headlined: one-step when requested, else rollout.
    pub fn primary(&self) -> &ComponentForecasts {
        self.one_step.as_ref().unwrap_or(&self.rollout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Arima,
    Gbt,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Arima => "arima",
            ModelKind::Gbt => "gbt",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = ForecastError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(ModelKind::Lstm),
            "arima" => Ok(ModelKind::Arima),
            "gbt" => Ok(ModelKind::Gbt),
            other => Err(ForecastError::param("model", format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleForecast {
    pub kind: ModelKind,
    pub rollout: Vec<f64>,
    pub rollout_report: EvalReport,
    pub one_step: Option<(Vec<f64>, EvalReport)>,
}

impl SingleForecast {
    pub fn primary_report(&self) -> &EvalReport {
        self.one_step.as_ref().map_or(&self.rollout_report, |(_, r)| r)
    }
}

fn check_input(series: &TimeSeries, config: &PipelineConfig) -> Result<usize> {
    config.validate()?;
    if series.len() < config.min_length() {
        return Err(ForecastError::InsufficientData {
            required: config.min_length(),
            actual: series.len(),
        });
    }
    let k = config.split.split_index(series.len())?;
    if k <= MIN_HISTORY + 1 {
        return Err(ForecastError::InsufficientData {
            required: MIN_HISTORY + 2,
            actual: k,
        });
    }
    Ok(k)
}

pub fn decompose(series: &TimeSeries, method: Method, period: usize) -> Result<Decomposition> {
    if !series.all_positive() {
        return Err(ForecastError::InvalidInput(
            "multiplicative decomposition needs strictly positive values".into(),
        ));
    }
    match method {
        Method::Classical => classical_decompose(series, period),
        Method::Stl => stl_decompose(series, StlParams::new(period), Mode::Multiplicative),
    }
}

/// Repeats the last full cycle of `seasonal` up to length `n`.
pub fn repeat_seasonal(seasonal: &[f64], period: usize, n: usize) -> Vec<f64> {
    let k = seasonal.len();
    (0..n)
        .map(|t| if t < k { seasonal[t] } else { seasonal[k - period + (t - k) % period] })
        .collect()
}

/// Extends a training-range decomposition over `series` without looking
/// ahead: the seasonal pattern repeats, the trend at `t` is a local-linear
/// LOESS endpoint fitted to the deseasonalised values up to `t`, and the
/// residual is whatever the product leaves.
pub fn extend_causally(series: &TimeSeries, train: &Decomposition, span: usize) -> Result<Decomposition> {
    let n = series.len();
    let k = train.len();
    let y = series.values();
    let seasonal = repeat_seasonal(&train.seasonal, train.period, n);
    let mut trend = train.trend.clone();
    for t in k..n {
        let from = (t + 1).saturating_sub(span);
        let xs: Vec<f64> = (from..=t).map(|i| i as f64).collect();
        let ys: Vec<f64> = (from..=t).map(|i| y[i] / seasonal[i]).collect();
        let v = Loess {
            x: &xs,
            y: &ys,
            robustness: None,
            span,
            degree: 1,
        }
        .fit_at(t as f64)
        .ok_or_else(|| ForecastError::Numerical("causal trend fit failed".into()))?;
        trend.push(v);
    }
    let residual = (0..n).map(|t| y[t] / (trend[t] * seasonal[t])).collect();
    Ok(Decomposition {
        mode: Mode::Multiplicative,
        period: train.period,
        trend,
        seasonal,
        residual,
    })
}

fn product(t: &[f64], s: &[f64], r: &[f64]) -> Vec<f64> {
    t.iter().zip(s).zip(r).map(|((a, b), c)| a * b * c).collect()
}

struct Fitted {
    lstm: LstmModel,
    arima: Option<ArimaModel>,
    gbt: GbtModel,
    timings: Vec<(String, f64)>,
}

fn timed<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<(T, (String, f64))> {
    let start = Instant::now();
    let v = f().map_err(|e| e.in_stage(stage_name(name)))?;
    Ok((v, (name.to_string(), start.elapsed().as_secs_f64())))
}

fn stage_name(name: &str) -> &'static str {
    match name {
        "lstm" => "lstm",
        "arima" => "arima",
        "gbt" => "gbt",
        _ => "pipeline",
    }
}

fn fit_components(
    series: &TimeSeries,
    comps: &Decomposition,
    k: usize,
    config: &PipelineConfig,
    use_arima: bool,
) -> Result<Fitted> {
    let train_series = series.slice(0, k)?;
    let lstm_cfg = config.lstm_config();
    let gbt_cfg = config.gbt_config();
    let trend = &comps.trend[..k];
    let seasonal = &comps.seasonal[..k];
    let residual = &comps.residual[..k];
    let fit_lstm = || timed("lstm", || lstm::train(trend, &lstm_cfg, rng::STREAM_LSTM));
    let fit_arima = || -> Result<(Option<ArimaModel>, (String, f64))> {
        if use_arima {
            timed("arima", || arima::fit(seasonal, config.arima_order)).map(|(m, t)| (Some(m), t))
        } else {
            Ok((None, ("arima".to_string(), 0.0)))
        }
    };
    let fit_gbt = || {
        timed("gbt", || {
            let fm = build_features(&train_series, residual)?;
            gbt::fit(&fm, residual, &gbt_cfg, rng::STREAM_GBT)
        })
    };
    let (l, a, g) = if config.threads > 1 {
        std::thread::scope(|s| {
            let hl = s.spawn(fit_lstm);
            let ha = s.spawn(fit_arima);
            let g = fit_gbt();
            let l = hl.join().expect("LSTM worker panicked");
            let a = ha.join().expect("ARIMA worker panicked");
            (l, a, g)
        })
    } else {
        (fit_lstm(), fit_arima(), fit_gbt())
    };
    let (lstm, tl) = l?;
    let (arima, ta) = a?;
    let (gbt, tg) = g?;
    Ok(Fitted {
        lstm,
        arima,
        gbt,
        timings: vec![tl, ta, tg],
    })
}

fn score(
    trend: Vec<f64>,
    seasonal: Vec<f64>,
    residual: Vec<f64>,
    actual: &[f64],
    comps: &Decomposition,
    k: usize,
) -> Result<ComponentForecasts> {
    let combined = product(&trend, &seasonal, &residual);
    Ok(ComponentForecasts {
        combined_report: evaluate(&combined, actual)?,
        trend_report: evaluate(&trend, &comps.trend[k..])?,
        seasonal_report: evaluate(&seasonal, &comps.seasonal[k..])?,
        residual_report: evaluate(&residual, &comps.residual[k..])?,
        trend,
        seasonal,
        residual,
        combined,
    })
}

/// Runs the hybrid forecaster and scores it on the held-out range.
pub fn run_hybrid(series: &TimeSeries, config: &PipelineConfig) -> Result<HybridForecast> {
    let k = check_input(series, config)?;
    let n = series.len();
    let h = n - k;
    let y = series.values();
    let mut timings = Vec::new();

    let start = Instant::now();
    let comps = if config.strict_causal {
        let train = decompose(&series.slice(0, k)?, config.decomposition, config.period)
            .map_err(|e| e.in_stage("decompose"))?;
        extend_causally(series, &train, StlParams::new(config.period).trend_span)
            .map_err(|e| e.in_stage("decompose"))?
    } else {
        decompose(series, config.decomposition, config.period).map_err(|e| e.in_stage("decompose"))?
    };
    timings.push(("decompose".to_string(), start.elapsed().as_secs_f64()));

    // the classical seasonal is exactly periodic: with a training-only
    // decomposition, repetition replaces a degenerate ARIMA fit
    let repeat = config.strict_causal && config.decomposition == Method::Classical;
    let fitted = fit_components(series, &comps, k, config, !repeat)?;
    timings.extend(fitted.timings.iter().cloned());

    let start = Instant::now();
    let trend_f = fitted
        .lstm
        .forecast_trend(&comps.trend[..k], h)
        .map_err(|e| e.in_stage("lstm"))?;
    let seasonal_f = match &fitted.arima {
        Some(m) => m.forecast(h).map_err(|e| e.in_stage("arima"))?,
        None => repeat_seasonal(&comps.seasonal[..k], config.period, n)[k..].to_vec(),
    };
    let residual_f = fitted
        .gbt
        .forecast_residual(series, &comps.residual[..k], h)
        .map_err(|e| e.in_stage("gbt"))?;
    let rollout = score(trend_f, seasonal_f, residual_f, &y[k..], &comps, k)?;

    let one_step = if config.one_step_eval {
        let trend = fitted
            .lstm
            .predict_one_step(&comps.trend, k)
            .map_err(|e| e.in_stage("lstm"))?;
        let seasonal = match &fitted.arima {
            Some(m) => m.one_step(&comps.seasonal).map_err(|e| e.in_stage("arima"))?[k..n].to_vec(),
            None => comps.seasonal[k..].to_vec(),
        };
        let fm = build_features(series, &comps.residual).map_err(|e| e.in_stage("gbt"))?;
        let residual = fitted.gbt.predict(&fm).map_err(|e| e.in_stage("gbt"))?[k..].to_vec();
        Some(score(trend, seasonal, residual, &y[k..], &comps, k)?)
    } else {
        None
    };
    timings.push(("forecast".to_string(), start.elapsed().as_secs_f64()));

    Ok(HybridForecast {
        split_index: k,
        test_actual: y[k..].to_vec(),
        rollout,
        one_step,
        diagnostics: Diagnostics {
            arima_converged: fitted.arima.as_ref().map_or(true, |m| m.converged),
            arima_sigma2: fitted.arima.as_ref().map_or(0.0, |m| m.sigma2),
            gbt_stump_rounds: fitted.gbt.stump_rounds,
            lstm_final_loss: fitted.lstm.loss_history.last().copied().unwrap_or(f64::NAN),
            timings,
        },
        components: comps,
        models: HybridModels {
            lstm: fitted.lstm,
            arima: fitted.arima,
            gbt: fitted.gbt,
        },
    })
}

/// Trains one model directly on the raw series with the hybrid's split.
pub fn run_single(series: &TimeSeries, kind: ModelKind, config: &PipelineConfig) -> Result<SingleForecast> {
    let k = check_input(series, config)?;
    let n = series.len();
    let y = series.values();
    let actual = &y[k..];
    let stage = match kind {
        ModelKind::Lstm => "lstm",
        ModelKind::Arima => "arima",
        ModelKind::Gbt => "gbt",
    };
    let run = || -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        match kind {
            ModelKind::Lstm => {
                let m = lstm::train(&y[..k], &config.lstm_config(), rng::STREAM_LSTM_BASELINE)?;
                let roll = m.forecast_trend(&y[..k], n - k)?;
                let one = config.one_step_eval.then(|| m.predict_one_step(y, k)).transpose()?;
                Ok((roll, one))
            }
            ModelKind::Arima => {
                let m = arima::fit(&y[..k], config.arima_order)?;
                let roll = m.forecast(n - k)?;
                let one = config
                    .one_step_eval
                    .then(|| m.one_step(y).map(|p| p[k..n].to_vec()))
                    .transpose()?;
                Ok((roll, one))
            }
            ModelKind::Gbt => {
                let fm = build_features(&series.slice(0, k)?, &y[..k])?;
                let m = gbt::fit(&fm, &y[..k], &config.gbt_config(), rng::STREAM_GBT_BASELINE)?;
                let roll = m.forecast_residual(series, &y[..k], n - k)?;
                let one = if config.one_step_eval {
                    let full = build_features(series, y)?;
                    Some(m.predict(&full)?[k..].to_vec())
                } else {
                    None
                };
                Ok((roll, one))
            }
        }
    };
    let (rollout, one) = run().map_err(|e| e.in_stage(stage))?;
    let rollout_report = evaluate(&rollout, actual)?;
    let one_step = match one {
        Some(p) => {
            let r = evaluate(&p, actual)?;
            Some((p, r))
        }
        None => None,
    };
    Ok(SingleForecast {
        kind,
        rollout,
        rollout_report,
        one_step,
    })
}
