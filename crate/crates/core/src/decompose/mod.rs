//! Trend / seasonal / residual decompositions.
//!
//! Two algorithms are provided: the iterated LOESS decomposition of Cleveland
//! et al. (STL) and classical moving-average decomposition. Both return a
//! [`Decomposition`] whose components have the same length as the input.

mod classical;
mod loess;
mod stl;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use classical::classical_decompose;
pub use loess::{loess_smooth, moving_average};
pub use stl::{stl_decompose, StlParams};
pub(crate) use loess::Loess;

use crate::error::{ForecastError, Result};
use crate::series::format_sig15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Additive,
    Multiplicative,
}

impl std::str::FromStr for Mode {
    type Err = ForecastError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(Mode::Additive),
            "multiplicative" => Ok(Mode::Multiplicative),
            other => Err(ForecastError::param("mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub mode: Mode,
    pub period: usize,
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.trend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trend.is_empty()
    }

    /// Recombines the components with the operator of `mode`.
    pub fn reconstruct(&self) -> Vec<f64> {
        self.trend
            .iter()
            .zip(&self.seasonal)
            .zip(&self.residual)
            .map(|((t, s), r)| match self.mode {
                Mode::Additive => t + s + r,
                Mode::Multiplicative => t * s * r,
            })
            .collect()
    }

    /// Writes `observed,trend,seasonal,residual` rows.
    pub fn write_csv<W: Write>(&self, observed: &[f64], writer: W) -> Result<()> {
        if observed.len() != self.len() {
            return Err(ForecastError::LengthMismatch {
                expected: self.len(),
                actual: observed.len(),
            });
        }
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["observed", "trend", "seasonal", "residual"])?;
        for i in 0..self.len() {
            out.write_record([
                format_sig15(observed[i]),
                format_sig15(self.trend[i]),
                format_sig15(self.seasonal[i]),
                format_sig15(self.residual[i]),
            ])?;
        }
        out.flush().map_err(|e| ForecastError::io("<csv output>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Classical,
    Stl,
}

impl std::str::FromStr for Method {
    type Err = ForecastError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Method::Classical),
            "stl" => Ok(Method::Stl),
            other => Err(ForecastError::param(
                "decomposition",
                format!("unknown method `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Classical => "classical",
            Method::Stl => "stl",
        })
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Additive => "additive",
            Mode::Multiplicative => "multiplicative",
        })
    }
}
