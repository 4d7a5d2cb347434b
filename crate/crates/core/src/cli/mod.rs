//! Command-line interface: `generate`, `decompose`, `diagnose`, `run` and
//! `evaluate`.
//!
//! Exit status is 0 on success, 1 on usage errors (bad flags, bad config)
//! and 2 on data or model errors. Diagnostics go to standard error; data
//! goes to files under `--out-dir` or to standard output. The environment
//! variable `TRICAST_THREADS` caps internal parallelism (0 or unset runs
//! sequentially); it never changes any output.

pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::arima::{self, ArimaOrder};
use crate::decompose::{classical_decompose, stl_decompose, Method, Mode, StlParams};
use crate::error::ForecastError;
use crate::metrics::{evaluate, EvalReport};
use crate::pipeline::{self, ComponentForecasts, HybridForecast, ModelKind, SingleForecast};
use crate::series::{
    format_sig15, format_timestamp, generate_synthetic, normalize_geometric, read_csv, traffic_sawtooth,
    SyntheticSpec, TimeSeries,
};
use crate::stats::{acf, adf_test, difference, pacf, CorrelogramPoint, LagPolicy};

use config::{parse_config, RunSettings, AUTO};
use manifest::{sha256_hex, Artifact, InputRecord, RunManifest, Timing, MANIFEST_FILE};

pub const THREADS_ENV: &str = "TRICAST_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<ForecastError> for CliError {
    fn from(e: ForecastError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "tricast",
    version,
    about = "Hybrid trend/seasonal/residual forecaster for univariate traffic series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic traffic-like series
    Generate(GenerateArgs),
    /// Split a series into trend, seasonal and residual components
    Decompose(DecomposeArgs),
    /// Unit-root test, correlograms and an AIC order suggestion
    Diagnose(DiagnoseArgs),
    /// Fit the hybrid forecaster and the single-model baselines
    Run(RunArgs),
    /// Score forecast columns of a CSV against its `actual` column
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Input CSV
    #[arg(long)]
    input: PathBuf,
    /// Value column: header name, zero-based index or `auto`
    #[arg(long, default_value = AUTO)]
    value_column: String,
    /// Timestamp column: header name, index, `auto`, or empty for none
    #[arg(long, default_value = AUTO)]
    time_column: String,
    /// Sampling step when the file has no timestamps
    #[arg(long, default_value_t = crate::series::DEFAULT_STEP_SECONDS)]
    step_seconds: i64,
}

impl InputArgs {
    fn load(&self) -> Result<(TimeSeries, Vec<u8>), CliError> {
        load_series(&self.input, &self.value_column, &self.time_column, self.step_seconds)
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// Output file name inside the output directory
    #[arg(long, default_value = "synthetic.csv")]
    name: String,
    #[arg(long, default_value_t = 998)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    period: usize,
    /// Standard deviation of the log-normal noise
    #[arg(long, default_value_t = 0.1)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = crate::series::DEFAULT_STEP_SECONDS)]
    step_seconds: i64,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 10)]
    period: usize,
    /// `multiplicative` or `additive` (additive needs `--method stl`)
    #[arg(long, default_value = "multiplicative")]
    mode: String,
    /// `classical` or `stl`
    #[arg(long, default_value = "classical")]
    method: String,
    /// Write `decomposition.csv` here instead of printing it
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 10)]
    period: usize,
    /// Series to examine: observed, trend, seasonal or residual
    #[arg(long, default_value = "observed")]
    component: String,
    /// Decomposition method for components
    #[arg(long, default_value = "classical")]
    method: String,
    /// Differences before the correlograms; the smallest order whose ADF
    /// test rejects a unit root when omitted
    #[arg(long)]
    diff: Option<usize>,
    #[arg(long, default_value_t = 40)]
    max_lag: usize,
    /// Largest p and q of the AIC search
    #[arg(long, default_value_t = 3)]
    max_pq: usize,
    /// Write `acf.csv` and `pacf.csv` here
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Input CSV; defaults to the input of `--replay`
    #[arg(long, required_unless_present = "replay")]
    input: Option<PathBuf>,
    /// Directory for every output file; created when missing
    #[arg(long)]
    out_dir: PathBuf,
    /// `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repeat the run recorded in a manifest (its settings act as the config file)
    #[arg(long, conflicts_with = "config")]
    replay: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set lstm.epochs=50`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seasonal period in samples (config key `period`)
    #[arg(long)]
    period: Option<usize>,
    /// Training fraction in (0, 1)
    #[arg(long)]
    split: Option<f64>,
    /// `classical` or `stl`
    #[arg(long)]
    decomposition: Option<String>,
    /// Decompose the training range only and extend components causally
    #[arg(long)]
    strict_causal: bool,
    /// Also score teacher-forced one-step predictions
    #[arg(long)]
    one_step_eval: bool,
    /// Master seed of every random stream
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the single-model baselines
    #[arg(long)]
    no_baselines: bool,
    /// Value column: header name, zero-based index or `auto`
    #[arg(long)]
    value_column: Option<String>,
    /// Timestamp column: header name, index, `auto`, or empty for none
    #[arg(long)]
    time_column: Option<String>,
    /// Sampling step when the file has no timestamps
    #[arg(long)]
    step_seconds: Option<i64>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// CSV with an actual column and one column per forecast
    #[arg(long)]
    input: PathBuf,
    /// Column holding the observed values
    #[arg(long, default_value = "actual")]
    actual_column: String,
    /// Forecast columns in table order; every other numeric column when omitted
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    /// Also write `metrics.csv` here
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let kind = match e {
                CliError::Usage(_) => "usage error",
                CliError::Data(_) => "error",
            };
            eprintln!("tricast: {kind}: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate(a) => generate(&a),
        Command::Decompose(a) => decompose(&a),
        Command::Diagnose(a) => diagnose(&a),
        Command::Run(a) => run(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| io_error(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn load_series(path: &Path, value: &str, time: &str, step: i64) -> Result<(TimeSeries, Vec<u8>), CliError> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let first = text.lines().next().unwrap_or("");
    let options = config::csv_options(value, time, step, first);
    let series = read_csv(text.as_bytes(), &options).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((series, bytes))
}

fn parse_usage<T: std::str::FromStr>(value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(CliError::usage)
}

/// Worker threads from `TRICAST_THREADS`; unset or empty means sequential.
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))),
        _ => Ok(0),
    }
}

/// Writes to standard output; a closed pipe (e.g. `| head`) is not an error.
fn emit(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(bytes).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Data(e.to_string())),
        _ => Ok(()),
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let data = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(header).map_err(data)?;
    for r in rows {
        w.write_record(&r).map_err(data)?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

// ---------------------------------------------------------------- generate

fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    if a.period < 2 {
        return Err(CliError::Usage("--period must be at least 2".into()));
    }
    let mut spec = SyntheticSpec::traffic_like(a.noise_sigma, a.seed);
    spec.n = a.n;
    spec.step_seconds = a.step_seconds;
    if a.period != spec.period {
        // same amplitude as the period-10 sawtooth, spread over the new period
        let raw: Vec<f64> = (0..a.period)
            .map(|j| 1.0 + 0.02 * (std::f64::consts::TAU * j as f64 / a.period as f64).sin())
            .collect();
        spec.period = a.period;
        spec.seasonal_factors = normalize_geometric(&raw);
    } else {
        spec.seasonal_factors = traffic_sawtooth();
    }
    let series = generate_synthetic(&spec).map_err(CliError::usage)?;
    create_dir(&a.out_dir)?;
    let path = a.out_dir.join(&a.name);
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    write_file(&path, &buf)?;
    emit(format!("{}\n", path.display()).as_bytes())
}

// --------------------------------------------------------------- decompose

fn decompose(a: &DecomposeArgs) -> Result<(), CliError> {
    let mode: Mode = parse_usage(&a.mode)?;
    let method: Method = parse_usage(&a.method)?;
    if method == Method::Classical && mode == Mode::Additive {
        return Err(CliError::Usage(
            "classical decomposition is multiplicative; use --method stl for additive".into(),
        ));
    }
    if a.period < 2 {
        return Err(CliError::Usage("--period must be at least 2".into()));
    }
    let (series, _) = a.input.load()?;
    let dec = match method {
        Method::Classical => classical_decompose(&series, a.period)?,
        Method::Stl => stl_decompose(&series, StlParams::new(a.period), mode)?,
    };
    let mut buf = Vec::new();
    dec.write_csv(series.values(), &mut buf)?;
    match &a.out_dir {
        Some(dir) => {
            create_dir(dir)?;
            write_file(&dir.join("decomposition.csv"), &buf)?;
        }
        None => emit(&buf)?,
    }
    Ok(())
}

// ---------------------------------------------------------------- diagnose

fn correlogram_csv(points: &[CorrelogramPoint]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &["lag", "value", "bound"],
        points
            .iter()
            .map(|p| vec![p.lag.to_string(), format_sig15(p.value), format_sig15(p.confidence_bound)]),
    )
}

fn diagnose(a: &DiagnoseArgs) -> Result<(), CliError> {
    let method: Method = parse_usage(&a.method)?;
    let (series, _) = a.input.load()?;
    let mut text = String::new();
    macro_rules! report {
        ($($arg:tt)*) => {{
            text.push_str(&format!($($arg)*));
            text.push('\n');
        }};
    }
    let y: Vec<f64> = match a.component.as_str() {
        "observed" => series.values().to_vec(),
        c @ ("trend" | "seasonal" | "residual") => {
            let dec = pipeline::decompose(&series, method, a.period)?;
            match c {
                "trend" => dec.trend,
                "seasonal" => dec.seasonal,
                _ => dec.residual,
            }
        }
        other => return Err(CliError::Usage(format!("unknown component `{other}`"))),
    };

    report!("series: {} ({} points)", a.component, y.len());
    report!("{:<6} {:>12} {:>6} {:>6} {:>12} {:>8}", "diff", "ADF stat", "lags", "nobs", "crit 5%", "verdict");
    let mut chosen = None;
    for d in 0..=2usize {
        let w = difference(&y, d)?;
        match adf_test(&w, LagPolicy::Schwert) {
            Ok(r) => {
                let verdict = if r.reject_unit_root { "stationary" } else { "unit root" };
                report!(
                    "{d:<6} {:>12.4} {:>6} {:>6} {:>12.4} {verdict:>8}",
                    r.statistic, r.lags_used, r.n_obs, r.critical_value_5pct
                );
                if r.reject_unit_root && chosen.is_none() {
                    chosen = Some(d);
                }
            }
            Err(e) => report!("{d:<6} ADF not available: {e}"),
        }
    }
    let d = a.diff.or(chosen).unwrap_or(1);
    report!("differencing order used: {d}");

    let w = difference(&y, d)?;
    let max_lag = a.max_lag.min(w.len().saturating_sub(2)).max(1);
    let ac = acf(&w, max_lag)?;
    let pac = pacf(&w, max_lag)?;
    let significant = |pts: &[CorrelogramPoint]| -> Vec<usize> {
        pts.iter()
            .filter(|p| p.lag > 0 && p.value.abs() > p.confidence_bound)
            .map(|p| p.lag)
            .take(10)
            .collect()
    };
    report!("ACF lags outside the 95% band: {:?}", significant(&ac));
    report!("PACF lags outside the 95% band: {:?}", significant(&pac));

    let candidates: Vec<ArimaOrder> = ArimaOrder::grid(a.max_pq, 0)
        .into_iter()
        .map(|o| ArimaOrder::new(o.p, d, o.q))
        .collect();
    match arima::select_order(&y, &candidates) {
        Ok((best, _)) => report!("AIC-selected order: {best}"),
        Err(e) => report!("AIC order search failed: {e}"),
    }

    if let Some(dir) = &a.out_dir {
        create_dir(dir)?;
        write_file(&dir.join("acf.csv"), &correlogram_csv(&ac)?)?;
        write_file(&dir.join("pacf.csv"), &correlogram_csv(&pac)?)?;
    }
    emit(text.as_bytes())
}

// --------------------------------------------------------------------- run

/// Resolves the settings of `run`: defaults, then the config file (or the
/// replayed manifest), then `--set` pairs, then dedicated flags.
fn resolve_settings(a: &RunArgs) -> Result<(RunSettings, Option<RunManifest>), CliError> {
    let mut s = RunSettings::default();
    let mut replayed = None;
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let pairs = parse_config(&text)?;
        s.apply_all(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    }
    if let Some(path) = &a.replay {
        let m = RunManifest::load(path)?;
        s.apply_all(m.config.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        replayed = Some(m);
    }
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        s.apply(k.trim(), v.trim())?;
    }
    let flags: Vec<(&str, Option<String>)> = vec![
        ("period", a.period.map(|v| v.to_string())),
        ("split", a.split.map(|v| v.to_string())),
        ("decomposition", a.decomposition.clone()),
        ("strict_causal", a.strict_causal.then(|| "true".into())),
        ("one_step_eval", a.one_step_eval.then(|| "true".into())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("baselines", a.no_baselines.then(|| "false".into())),
        ("input.value_column", a.value_column.clone()),
        ("input.time_column", a.time_column.clone()),
        ("input.step_seconds", a.step_seconds.map(|v| v.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            s.apply(k, &v)?;
        }
    }
    s.pipeline.validate().map_err(CliError::usage)?;
    Ok((s, replayed))
}

const MODEL_ORDER: [ModelKind; 3] = [ModelKind::Lstm, ModelKind::Arima, ModelKind::Gbt];

fn model_label(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Lstm => "LSTM",
        ModelKind::Arima => "ARIMA",
        ModelKind::Gbt => "GBT",
    }
}

fn component_csv(
    series: &TimeSeries,
    k: usize,
    actual: &[f64],
    rollout: &[f64],
    one_step: Option<&[f64]>,
) -> Result<Vec<u8>, CliError> {
    let mut header = vec!["index", "timestamp", "actual", "rollout"];
    if one_step.is_some() {
        header.push("one_step");
    }
    let rows = (0..rollout.len()).map(|j| {
        let mut r = vec![
            (k + j).to_string(),
            format_timestamp(series.timestamp(k + j)),
            format_sig15(actual[j]),
            format_sig15(rollout[j]),
        ];
        if let Some(o) = one_step {
            r.push(format_sig15(o[j]));
        }
        r
    });
    csv_bytes(&header, rows)
}

fn combined_csv(series: &TimeSeries, out: &HybridForecast, singles: &[SingleForecast]) -> Result<Vec<u8>, CliError> {
    let k = out.split_index;
    let mut names: Vec<String> = vec!["index".into(), "timestamp".into(), "actual".into(), "hybrid".into()];
    let mut cols: Vec<&[f64]> = vec![&out.rollout.combined];
    if let Some(o) = &out.one_step {
        names.push("hybrid_one_step".into());
        cols.push(&o.combined);
    }
    for s in singles {
        names.push(s.kind.to_string());
        cols.push(&s.rollout);
        if let Some((p, _)) = &s.one_step {
            names.push(format!("{}_one_step", s.kind));
            cols.push(p);
        }
    }
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let rows = (0..out.test_actual.len()).map(|j| {
        let mut r = vec![
            (k + j).to_string(),
            format_timestamp(series.timestamp(k + j)),
            format_sig15(out.test_actual[j]),
        ];
        r.extend(cols.iter().map(|c| format_sig15(c[j])));
        r
    });
    csv_bytes(&header, rows)
}

struct MetricRow {
    protocol: &'static str,
    model: String,
    report: EvalReport,
}

fn metric_rows(out: &HybridForecast, singles: &[SingleForecast]) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    let mut protocol = |name: &'static str, hybrid: &ComponentForecasts, single: &dyn Fn(&SingleForecast) -> Option<EvalReport>| {
        rows.push(MetricRow {
            protocol: name,
            model: "Hybrid".into(),
            report: hybrid.combined_report,
        });
        for kind in MODEL_ORDER {
            if let Some(r) = singles.iter().find(|s| s.kind == kind).and_then(single) {
                rows.push(MetricRow {
                    protocol: name,
                    model: model_label(kind).into(),
                    report: r,
                });
            }
        }
        for (c, r) in [
            ("trend", hybrid.trend_report),
            ("seasonal", hybrid.seasonal_report),
            ("residual", hybrid.residual_report),
        ] {
            rows.push(MetricRow {
                protocol: name,
                model: format!("component:{c}"),
                report: r,
            });
        }
    };
    protocol("rollout", &out.rollout, &|s| Some(s.rollout_report));
    if let Some(o) = &out.one_step {
        protocol("one_step", o, &|s| s.one_step.as_ref().map(|(_, r)| *r));
    }
    rows
}

fn metrics_text(rows: &[MetricRow]) -> String {
    let mut text = String::new();
    let mut current = "";
    for r in rows {
        if r.protocol != current {
            if !current.is_empty() {
                text.push('\n');
            }
            current = r.protocol;
            text.push_str(&format!("protocol: {current}\n{}\n", EvalReport::table_header()));
        }
        text.push_str(&r.report.table_row(&r.model));
        text.push('\n');
    }
    text
}

fn metrics_csv(rows: &[MetricRow]) -> Result<Vec<u8>, CliError> {
    let opt = |v: Option<f64>| v.map_or_else(String::new, format_sig15);
    csv_bytes(
        &["protocol", "model", "mae", "rmse", "r2", "mape", "n"],
        rows.iter().map(|r| {
            vec![
                r.protocol.to_string(),
                r.model.clone(),
                format_sig15(r.report.mae),
                format_sig15(r.report.rmse),
                opt(r.report.r2),
                opt(r.report.mape),
                r.report.n.to_string(),
            ]
        }),
    )
}

fn run(a: &RunArgs) -> Result<(), CliError> {
    let (settings, replayed) = resolve_settings(a)?;
    let threads = threads_from_env()?;
    let input = match (&a.input, &replayed) {
        (Some(p), _) => p.clone(),
        (None, Some(m)) => PathBuf::from(&m.input.path),
        (None, None) => return Err(CliError::Usage("--input is required".into())),
    };
    let (series, bytes) = load_series(&input, &settings.value_column, &settings.time_column, settings.step_seconds)?;
    let input_digest = sha256_hex(&bytes);
    if let Some(m) = &replayed {
        if m.input.sha256 != input_digest {
            return Err(CliError::Data(format!(
                "input {} does not match the replayed manifest digest",
                input.display()
            )));
        }
    }

    let mut config = settings.pipeline.clone();
    config.threads = threads;
    let hybrid = pipeline::run_hybrid(&series, &config)?;
    let mut timings: Vec<Timing> = hybrid
        .diagnostics
        .timings
        .iter()
        .map(|(stage, seconds)| Timing {
            stage: stage.clone(),
            seconds: *seconds,
        })
        .collect();
    let mut singles = Vec::new();
    if settings.baselines {
        for kind in MODEL_ORDER {
            let start = Instant::now();
            singles.push(pipeline::run_single(&series, kind, &config)?);
            timings.push(Timing {
                stage: format!("baseline_{kind}"),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }

    let start = Instant::now();
    let k = hybrid.split_index;
    let comps = &hybrid.components;
    let one = hybrid.one_step.as_ref();
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    for (name, actual, roll, one_step) in [
        (
            "trend.csv",
            &comps.trend[k..],
            &hybrid.rollout.trend,
            one.map(|o| o.trend.as_slice()),
        ),
        (
            "seasonal.csv",
            &comps.seasonal[k..],
            &hybrid.rollout.seasonal,
            one.map(|o| o.seasonal.as_slice()),
        ),
        (
            "residual.csv",
            &comps.residual[k..],
            &hybrid.rollout.residual,
            one.map(|o| o.residual.as_slice()),
        ),
    ] {
        files.push((name.into(), component_csv(&series, k, actual, roll, one_step)?));
    }
    files.push(("combined.csv".into(), combined_csv(&series, &hybrid, &singles)?));
    let mut dec = Vec::new();
    comps.write_csv(series.values(), &mut dec)?;
    files.push(("components.csv".into(), dec));
    let rows = metric_rows(&hybrid, &singles);
    files.push(("metrics.txt".into(), metrics_text(&rows).into_bytes()));
    files.push(("metrics.csv".into(), metrics_csv(&rows)?));
    files.push(("lstm_trend.txt".into(), hybrid.models.lstm.to_text().into_bytes()));
    if let Some(m) = &hybrid.models.arima {
        files.push(("arima_seasonal.json".into(), m.to_json()?.into_bytes()));
    }
    files.push(("gbt_residual.txt".into(), hybrid.models.gbt.to_text().into_bytes()));
    files.push(("config.txt".into(), settings.to_text().into_bytes()));

    create_dir(&a.out_dir)?;
    let mut artifacts = Vec::new();
    for (name, data) in &files {
        write_file(&a.out_dir.join(name), data)?;
        artifacts.push(Artifact {
            path: name.clone(),
            sha256: sha256_hex(data),
            bytes: data.len() as u64,
        });
    }
    timings.push(Timing {
        stage: "write".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: settings.pipeline.seed,
        config: settings.to_pairs().into_iter().collect(),
        input: InputRecord {
            path: input.display().to_string(),
            sha256: input_digest,
        },
        split_index: k,
        artifacts,
        threads,
        timings,
    };
    write_file(&a.out_dir.join(MANIFEST_FILE), manifest.to_json().as_bytes())?;
    emit(metrics_text(&rows).as_bytes())
}

// ---------------------------------------------------------------- evaluate

fn evaluate_cmd(a: &EvaluateArgs) -> Result<(), CliError> {
    let bytes = read_bytes(&a.input)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let data = |e: csv::Error| CliError::Data(format!("{}: {e}", a.input.display()));
    let header: Vec<String> = rdr.headers().map_err(data)?.iter().map(String::from).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("{}: no column named `{name}`", a.input.display())))
    };
    let actual_idx = col(&a.actual_column)?;
    let records: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>().map_err(data)?;
    let number = |r: &csv::StringRecord, j: usize, line: usize| -> Result<f64, CliError> {
        r.get(j).and_then(|c| c.parse::<f64>().ok()).ok_or_else(|| {
            CliError::Data(format!(
                "{}: line {line}: column `{}` is not numeric",
                a.input.display(),
                header[j]
            ))
        })
    };
    let column = |j: usize| -> Result<Vec<f64>, CliError> {
        records.iter().enumerate().map(|(i, r)| number(r, j, i + 2)).collect()
    };
    let actual = column(actual_idx)?;
    let chosen: Vec<usize> = if a.columns.is_empty() {
        (0..header.len())
            .filter(|&j| j != actual_idx && !matches!(header[j].as_str(), "index" | "timestamp"))
            .collect()
    } else {
        a.columns.iter().map(|c| col(c)).collect::<Result<_, _>>()?
    };
    if chosen.is_empty() {
        return Err(CliError::Data("no forecast columns to evaluate".into()));
    }
    let mut rows = Vec::new();
    for j in chosen {
        let report = evaluate(&column(j)?, &actual)?;
        rows.push(MetricRow {
            protocol: "file",
            model: header[j].clone(),
            report,
        });
    }
    if let Some(dir) = &a.out_dir {
        create_dir(dir)?;
        write_file(&dir.join("metrics.csv"), &metrics_csv(&rows)?)?;
    }
    let mut text = format!("{}\n", EvalReport::table_header());
    for r in &rows {
        text.push_str(&r.report.table_row(&r.model));
        text.push('\n');
    }
    emit(text.as_bytes())
}
