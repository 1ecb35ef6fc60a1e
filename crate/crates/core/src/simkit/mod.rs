//! Monte Carlo outage experiments: configuration, the trial engine,
//! estimators and result files.

mod config;
mod engine;
mod io;
mod stats;

pub use config::{Experiment, ExperimentConfig, ImportanceConfig, Sampling, SnrGrid};
pub use engine::{run_experiment, RunReport};
pub use io::{emit_csv, gnuplot_script, read_csv, read_csv_from, write_csv};
pub use stats::{estimate_dmt_slope, snr_at_outage, wilson_interval, WILSON_Z};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::ProtocolId;

/// A curve in an outage plot: a protocol, or the analytic destination-cut
/// lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CurveId {
    Protocol(ProtocolId),
    MaCutLowerBound,
}

impl CurveId {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveId::Protocol(p) => p.as_str(),
            CurveId::MaCutLowerBound => "ma-cut-lb",
        }
    }
}

impl fmt::Display for CurveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurveId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ma-cut-lb" {
            return Ok(CurveId::MaCutLowerBound);
        }
        s.parse().map(CurveId::Protocol)
    }
}

/// One row of an outage curve. Rates are in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutagePoint {
    pub snr_db: f64,
    pub rate_bits: f64,
    /// Trials that entered the estimate; zero for closed-form curves.
    pub trials: u64,
    pub outages: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutageCurve {
    pub curve: CurveId,
    pub points: Vec<OutagePoint>,
}

impl OutageCurve {
    /// Short legend label, e.g. `"fo R=1"` or `"gls r=0.5"`.
    pub fn label(&self) -> String {
        let first = self.points.first().map_or(0.0, |p| p.rate_bits);
        if self.points.iter().all(|p| p.rate_bits == first) {
            format!("{} R={}", self.curve, first)
        } else {
            format!("{} (rate varies with SNR)", self.curve)
        }
    }
}
