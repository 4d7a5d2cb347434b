//! Flat `key = value` run configuration.
//!
//! Every run setting has a key. Settings are resolved by applying, in
//! order, the built-in defaults, the entries of a config file and the
//! command-line flags, so later sources win. The resolved settings are
//! written back as the same key/value pairs, which makes a manifest's
//! snapshot a valid config file.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `period` | decomposition period |
//! | `split` | training fraction in (0, 1) |
//! | `decomposition` | `classical` or `stl` |
//! | `strict_causal` | decompose the training range only |
//! | `one_step_eval` | also score teacher-forced one-step predictions |
//! | `seed` | master seed of every random stream |
//! | `baselines` | also run the single-model baselines |
//! | `lstm.hidden_size`, `lstm.window`, `lstm.learning_rate`, `lstm.epochs`, `lstm.batch_size`, `lstm.dropout` | trend network |
//! | `arima.order` | seasonal model order, `p,d,q` |
//! | `gbt.n_trees`, `gbt.learning_rate`, `gbt.max_depth`, `gbt.subsample`, `gbt.colsample`, `gbt.lambda`, `gbt.gamma`, `gbt.min_child_weight` | residual model |
//! | `input.value_column`, `input.time_column`, `input.step_seconds` | CSV layout (see below) |
//!
//! Columns are header names or zero-based indices. `auto` picks the
//! columns named `value` and `timestamp` when the first line has them and
//! otherwise the first column without timestamps; an empty time column
//! means evenly spaced points `input.step_seconds` apart.

use std::str::FromStr;

use crate::arima::ArimaOrder;
use crate::decompose::Method;
use crate::pipeline::PipelineConfig;
use crate::series::{Column, CsvOptions, SplitSpec, DEFAULT_STEP_SECONDS};

use super::CliError;

/// Every resolved setting of a `run` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub pipeline: PipelineConfig,
    pub baselines: bool,
    pub value_column: String,
    pub time_column: String,
    pub step_seconds: i64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            baselines: true,
            value_column: AUTO.to_string(),
            time_column: AUTO.to_string(),
            step_seconds: DEFAULT_STEP_SECONDS,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

impl RunSettings {
    /// Sets one key; unknown keys and malformed values are usage errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let p = &mut self.pipeline;
        match key {
            "period" => p.period = parse(key, value)?,
            "split" => p.split = SplitSpec::new(parse(key, value)?).map_err(CliError::usage)?,
            "decomposition" => p.decomposition = Method::from_str(value).map_err(CliError::usage)?,
            "strict_causal" => p.strict_causal = parse_bool(key, value)?,
            "one_step_eval" => p.one_step_eval = parse_bool(key, value)?,
            "seed" => p.seed = parse(key, value)?,
            "baselines" => self.baselines = parse_bool(key, value)?,
            "lstm.hidden_size" => p.lstm.hidden_size = parse(key, value)?,
            "lstm.window" => p.lstm.window = parse(key, value)?,
            "lstm.learning_rate" => p.lstm.learning_rate = parse(key, value)?,
            "lstm.epochs" => p.lstm.epochs = parse(key, value)?,
            "lstm.batch_size" => p.lstm.batch_size = parse(key, value)?,
            "lstm.dropout" => p.lstm.dropout = parse(key, value)?,
            "arima.order" => p.arima_order = ArimaOrder::from_str(value).map_err(CliError::usage)?,
            "gbt.n_trees" => p.gbt.n_trees = parse(key, value)?,
            "gbt.learning_rate" => p.gbt.learning_rate = parse(key, value)?,
            "gbt.max_depth" => p.gbt.max_depth = parse(key, value)?,
            "gbt.subsample" => p.gbt.subsample = parse(key, value)?,
            "gbt.colsample" => p.gbt.colsample = parse(key, value)?,
            "gbt.lambda" => p.gbt.lambda = parse(key, value)?,
            "gbt.gamma" => p.gbt.gamma = parse(key, value)?,
            "gbt.min_child_weight" => p.gbt.min_child_weight = parse(key, value)?,
            "input.value_column" => self.value_column = value.to_string(),
            "input.time_column" => self.time_column = value.to_string(),
            "input.step_seconds" => self.step_seconds = parse(key, value)?,
            _ => return Err(CliError::Usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<(), CliError> {
        for (k, v) in pairs {
            self.apply(k, v)?;
        }
        Ok(())
    }

    /// All settings as key/value pairs in a fixed order. Floats use the
    /// shortest representation that parses back to the same value.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let p = &self.pipeline;
        let o = p.arima_order;
        let pairs: Vec<(&str, String)> = vec![
            ("period", p.period.to_string()),
            ("split", p.split.train_fraction.to_string()),
            ("decomposition", p.decomposition.to_string()),
            ("strict_causal", p.strict_causal.to_string()),
            ("one_step_eval", p.one_step_eval.to_string()),
            ("seed", p.seed.to_string()),
            ("baselines", self.baselines.to_string()),
            ("lstm.hidden_size", p.lstm.hidden_size.to_string()),
            ("lstm.window", p.lstm.window.to_string()),
            ("lstm.learning_rate", p.lstm.learning_rate.to_string()),
            ("lstm.epochs", p.lstm.epochs.to_string()),
            ("lstm.batch_size", p.lstm.batch_size.to_string()),
            ("lstm.dropout", p.lstm.dropout.to_string()),
            ("arima.order", format!("{},{},{}", o.p, o.d, o.q)),
            ("gbt.n_trees", p.gbt.n_trees.to_string()),
            ("gbt.learning_rate", p.gbt.learning_rate.to_string()),
            ("gbt.max_depth", p.gbt.max_depth.to_string()),
            ("gbt.subsample", p.gbt.subsample.to_string()),
            ("gbt.colsample", p.gbt.colsample.to_string()),
            ("gbt.lambda", p.gbt.lambda.to_string()),
            ("gbt.gamma", p.gbt.gamma.to_string()),
            ("gbt.min_child_weight", p.gbt.min_child_weight.to_string()),
            ("input.value_column", self.value_column.clone()),
            ("input.time_column", self.time_column.clone()),
            ("input.step_seconds", self.step_seconds.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Reader options for a file whose first line is `first_line`.
    pub fn csv_options(&self, first_line: &str) -> CsvOptions {
        csv_options(&self.value_column, &self.time_column, self.step_seconds, first_line)
    }
}

pub const AUTO: &str = "auto";

/// Resolves column choices, `auto` included, against a file's first line.
pub fn csv_options(value_column: &str, time_column: &str, step_seconds: i64, first_line: &str) -> CsvOptions {
    let header: Vec<&str> = first_line.split(',').map(str::trim).collect();
    let named = |name: &str| header.contains(&name).then(|| Column::Name(name.to_string()));
    let column = |c: &str| Column::from_str(c).expect("infallible");
    let value = if value_column == AUTO {
        named("value").unwrap_or(Column::Index(0))
    } else {
        column(value_column)
    };
    let time = match time_column {
        AUTO => named("timestamp"),
        "" => None,
        c => Some(column(c)),
    };
    CsvOptions {
        value_column: value,
        time_column: time,
        default_step_seconds: step_seconds,
    }
}

/// Parses `key = value` lines; errors name the 1-based line.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}
