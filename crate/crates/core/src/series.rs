//! Uniformly sampled time series, CSV ingestion and the synthetic traffic generator.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ForecastError, Result};
use crate::rng;

/// Default sampling interval in seconds (30 minutes).
pub const DEFAULT_STEP_SECONDS: i64 = 1800;

/// A uniformly sampled univariate series. Timestamp `i` is `start_time + i * step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    start_time: NaiveDateTime,
    step_seconds: i64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(start_time: NaiveDateTime, step_seconds: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(ForecastError::InvalidInput("series is empty".into()));
        }
        if step_seconds <= 0 {
            return Err(ForecastError::param("step", "sampling interval must be positive"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ForecastError::InvalidInput(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(Self {
            start_time,
            step_seconds,
            values,
        })
    }

    /// Series starting at the Unix epoch with the default step.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(epoch(), DEFAULT_STEP_SECONDS, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start_time(&self) -> NaiveDateTime {
        self.start_time
    }

    pub fn step_seconds(&self) -> i64 {
        self.step_seconds
    }

    /// Timestamp of index `i`; valid for any `i`, including indices past the end.
    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start_time + Duration::seconds(self.step_seconds * i as i64)
    }

    /// A series with the same clock and different values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.start_time, self.step_seconds, values)
    }

    /// Sub-series `[from, to)` keeping timestamps aligned.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.len() {
            return Err(ForecastError::InvalidInput(format!(
                "invalid slice [{from}, {to}) of series with {} points",
                self.len()
            )));
        }
        Self::new(
            self.timestamp(from),
            self.step_seconds,
            self.values[from..to].to_vec(),
        )
    }

    pub fn all_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    /// Writes `index,timestamp,value` rows with 15 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["index", "timestamp", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            out.write_record([
                i.to_string(),
                format_timestamp(self.timestamp(i)),
                format_sig15(*v),
            ])?;
        }
        out.flush().map_err(|e| ForecastError::io("<csv output>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| ForecastError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub fn epoch() -> NaiveDateTime {
    DateTime::from_timestamp(0, 0).expect("epoch").naive_utc()
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// Formats a real with 15 significant digits, shortest representation.
pub fn format_sig15(v: f64) -> String {
    let rounded: f64 = format!("{v:.14e}").parse().unwrap_or(v);
    format!("{rounded}")
}

pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let s = raw.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return DateTime::from_timestamp(secs, 0).map(|d| d.naive_utc());
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

/// Selects a CSV column by header name or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Name(String),
    Index(usize),
}

impl FromStr for Column {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub value_column: Column,
    pub time_column: Option<Column>,
    /// Step used when no time column is given.
    pub default_step_seconds: i64,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            value_column: Column::Index(0),
            time_column: None,
            default_step_seconds: DEFAULT_STEP_SECONDS,
        }
    }
}

pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<TimeSeries> {
    let file = std::fs::File::open(path).map_err(|e| ForecastError::io(path, e))?;
    read_csv(file, options)
}

/// Parses a series from CSV text. A header row is detected when the selected
/// value cell of the first row is not numeric (or columns are chosen by name).
pub fn read_csv<R: std::io::Read>(mut reader: R, options: &CsvOptions) -> Result<TimeSeries> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| ForecastError::io("<csv input>", e))?;
    // the csv reader silently skips blank lines; in a one-column file those are missing values
    let lines: Vec<&str> = text.lines().collect();
    let last_filled = lines.iter().rposition(|l| !l.trim().is_empty()).unwrap_or(0);
    if let Some(blank) = lines[..last_filled].iter().position(|l| l.trim().is_empty()) {
        return Err(ForecastError::Parse {
            row: blank + 1,
            message: "missing value".into(),
        });
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    let Some(first) = records.first() else {
        return Err(ForecastError::InvalidInput("CSV contains no rows".into()));
    };

    let by_name = matches!(options.value_column, Column::Name(_))
        || matches!(options.time_column, Some(Column::Name(_)));
    let has_header = by_name
        || match options.value_column {
            Column::Index(i) => first.get(i).map_or(true, |f| f.parse::<f64>().is_err()),
            Column::Name(_) => true,
        };

    let resolve = |col: &Column| -> Result<usize> {
        match col {
            Column::Index(i) => Ok(*i),
            Column::Name(name) => first
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| ForecastError::InvalidInput(format!("no column named `{name}`"))),
        }
    };
    let value_idx = resolve(&options.value_column)?;
    let time_idx = options.time_column.as_ref().map(&resolve).transpose()?;

    let body = if has_header { &records[1..] } else { &records[..] };
    if body.is_empty() {
        return Err(ForecastError::InvalidInput("CSV contains no data rows".into()));
    }

    let line_of = |rec: &csv::StringRecord, fallback: usize| {
        rec.position().map_or(fallback, |p| p.line() as usize)
    };

    let mut values = Vec::with_capacity(body.len());
    let mut stamps = Vec::new();
    for (k, rec) in body.iter().enumerate() {
        let row = line_of(rec, k + 1);
        let cell = rec.get(value_idx).unwrap_or("");
        if cell.is_empty() {
            return Err(ForecastError::Parse {
                row,
                message: "missing value".into(),
            });
        }
        let v: f64 = cell.parse().map_err(|_| ForecastError::Parse {
            row,
            message: format!("non-numeric value `{cell}`"),
        })?;
        if !v.is_finite() {
            return Err(ForecastError::Parse {
                row,
                message: format!("non-finite value `{cell}`"),
            });
        }
        values.push(v);
        if let Some(ti) = time_idx {
            let raw = rec.get(ti).unwrap_or("");
            let ts = parse_timestamp(raw).ok_or_else(|| ForecastError::Parse {
                row,
                message: format!("unparseable timestamp `{raw}`"),
            })?;
            stamps.push((row, ts));
        }
    }

    if stamps.is_empty() {
        return TimeSeries::new(epoch(), options.default_step_seconds, values);
    }

    let start = stamps[0].1;
    let step = if stamps.len() > 1 {
        (stamps[1].1 - stamps[0].1).num_seconds()
    } else {
        options.default_step_seconds
    };
    for w in stamps.windows(2) {
        let gap = (w[1].1 - w[0].1).num_seconds();
        if gap <= 0 {
            return Err(ForecastError::Parse {
                row: w[1].0,
                message: "timestamps are not strictly increasing".into(),
            });
        }
        if gap != step {
            return Err(ForecastError::Parse {
                row: w[1].0,
                message: format!("non-uniform sampling: gap {gap}s, expected {step}s"),
            });
        }
    }
    TimeSeries::new(start, step, values)
}

/// Chronological train/test split at `floor(train_fraction * n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8 }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(ForecastError::param(
                "train_fraction",
                format!("{train_fraction} is not in (0, 1)"),
            ));
        }
        Ok(Self { train_fraction })
    }

    /// Index of the first test point for a series of length `n`.
    pub fn split_index(&self, n: usize) -> Result<usize> {
        let idx = (self.train_fraction * n as f64).floor() as usize;
        if idx == 0 || idx >= n {
            return Err(ForecastError::InvalidInput(format!(
                "train fraction {} on {n} points leaves an empty partition",
                self.train_fraction
            )));
        }
        Ok(idx)
    }
}

pub fn split_chronological(series: &TimeSeries, spec: SplitSpec) -> Result<(TimeSeries, TimeSeries)> {
    if series.len() < 2 {
        return Err(ForecastError::InsufficientData {
            required: 2,
            actual: series.len(),
        });
    }
    SplitSpec::new(spec.train_fraction)?;
    let idx = spec.split_index(series.len())?;
    Ok((series.slice(0, idx)?, series.slice(idx, series.len())?))
}

/// Shape of the deterministic trend used by the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrendSpec {
    Flat(f64),
    Ramp { start: f64, slope: f64 },
    /// Sinusoid oscillating between `low` and `high`.
    Wave {
        low: f64,
        high: f64,
        period: f64,
        phase: f64,
    },
    /// Knots `(index, level)` joined by cosine interpolation; constant outside.
    Knots(Vec<(f64, f64)>),
}

impl TrendSpec {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            TrendSpec::Flat(c) => *c,
            TrendSpec::Ramp { start, slope } => start + slope * t,
            TrendSpec::Wave {
                low,
                high,
                period,
                phase,
            } => {
                let mid = 0.5 * (low + high);
                let amp = 0.5 * (high - low);
                mid + amp * (std::f64::consts::TAU * t / period + phase).sin()
            }
            TrendSpec::Knots(knots) => {
                let (first, last) = (knots[0], knots[knots.len() - 1]);
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = knots.windows(2).find(|w| t <= w[1].0).expect("bracketed");
                let u = (t - k[0].0) / (k[1].0 - k[0].0);
                let blend = 0.5 - 0.5 * (std::f64::consts::PI * u).cos();
                k[0].1 + (k[1].1 - k[0].1) * blend
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub period: usize,
    pub trend: TrendSpec,
    /// One multiplicative factor per phase; geometric mean must be 1.
    pub seasonal_factors: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub start_time: NaiveDateTime,
    pub step_seconds: i64,
}

impl SyntheticSpec {
    /// Series resembling the traffic data: a slow wave between 15 and 40,
    /// a period-10 sawtooth within [0.98, 1.03] and log-normal noise.
    pub fn traffic_like(noise_sigma: f64, seed: u64) -> Self {
        Self {
            n: 998,
            period: 10,
            trend: TrendSpec::Wave {
                low: 15.0,
                high: 40.0,
                period: 480.0,
                phase: -0.13,
            },
            seasonal_factors: traffic_sawtooth(),
            noise_sigma,
            seed,
            start_time: NaiveDate::from_ymd_opt(2015, 11, 11)
                .and_then(|d| d.and_hms_opt(0, 0, 0))
                .expect("valid date"),
            step_seconds: DEFAULT_STEP_SECONDS,
        }
    }
}

/// Period-10 sawtooth factors normalized to geometric mean 1.
pub fn traffic_sawtooth() -> Vec<f64> {
    let raw = [0.984, 0.990, 0.997, 1.004, 1.011, 1.018, 1.026, 1.012, 0.998, 0.986];
    normalize_geometric(&raw)
}

pub fn normalize_geometric(factors: &[f64]) -> Vec<f64> {
    let g = geometric_mean(factors);
    factors.iter().map(|f| f / g).collect()
}

pub fn geometric_mean(values: &[f64]) -> f64 {
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

/// `trend(t) * s[t mod period] * exp(eps_t)`, `eps_t ~ N(0, sigma^2)`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TimeSeries> {
    if spec.period < 2 {
        return Err(ForecastError::param("period", "must be at least 2"));
    }
    if spec.n == 0 {
        return Err(ForecastError::param("n", "must be positive"));
    }
    if spec.seasonal_factors.len() != spec.period {
        return Err(ForecastError::param(
            "seasonal_factors",
            format!(
                "expected {} factors, got {}",
                spec.period,
                spec.seasonal_factors.len()
            ),
        ));
    }
    if spec.seasonal_factors.iter().any(|&f| !(f > 0.0)) {
        return Err(ForecastError::param("seasonal_factors", "factors must be positive"));
    }
    let gm = geometric_mean(&spec.seasonal_factors);
    if (gm - 1.0).abs() > 1e-9 {
        return Err(ForecastError::param(
            "seasonal_factors",
            format!("geometric mean is {gm}, expected 1"),
        ));
    }
    if !(spec.noise_sigma >= 0.0) || !spec.noise_sigma.is_finite() {
        return Err(ForecastError::param("noise_sigma", "must be finite and >= 0"));
    }
    if let TrendSpec::Knots(k) = &spec.trend {
        if k.is_empty() || k.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ForecastError::param("trend", "knots must be non-empty and increasing"));
        }
    }

    let mut draws = rng::stream(spec.seed, rng::STREAM_GENERATOR);
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| ForecastError::param("noise_sigma", e.to_string()))?;
    let mut values = Vec::with_capacity(spec.n);
    for t in 0..spec.n {
        let level = spec.trend.value_at(t as f64);
        if !(level > 0.0) {
            return Err(ForecastError::param(
                "trend",
                format!("trend value {level} at index {t} is not positive"),
            ));
        }
        let factor = spec.seasonal_factors[t % spec.period];
        let v = if spec.noise_sigma == 0.0 {
            level * factor
        } else {
            level * factor * noise.sample(&mut draws).exp()
        };
        values.push(v);
    }
    TimeSeries::new(spec.start_time, spec.step_seconds, values)
}
