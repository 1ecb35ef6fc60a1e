use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::bounds::{OutageTarget, MAX_NODES_BOUND};
use crate::error::{Error, Result};
use crate::netmodel::{bits_to_nats, MeanGains, NetworkConfig, MAX_NODES};
use crate::protocols::ProtocolId;

use super::CurveId;

/// SNR grid in dB: an explicit list or an inclusive `start..=stop` range.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SnrGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl SnrGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        match self {
            SnrGrid::List(v) => Ok(v.clone()),
            SnrGrid::Range { start, stop, step } => {
                if !(*step > 0.0) || !(stop >= start) {
                    return Err(Error::Config(format!("bad SNR range {start}..{stop} step {step}")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| start + step * i as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportanceConfig {
    /// Probability of drawing a link from the shrunken component.
    #[serde(default = "default_mix")]
    pub mix: f64,
    /// The shrunken mean is `tilt (e^R - 1) / S` times the link mean.
    #[serde(default = "default_tilt")]
    pub tilt: f64,
}

fn default_mix() -> f64 {
    0.5
}

fn default_tilt() -> f64 {
    2.0
}

/// Experiment file contents (TOML or JSON).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub protocols: Vec<String>,
    /// Fixed target rates in bits/s/Hz.
    #[serde(default)]
    pub rates_bits: Vec<f64>,
    /// Multiplexing gains `r` (rate `r log2 S`).
    #[serde(default)]
    pub multiplexing_gains: Vec<f64>,
    pub snr_db: SnrGrid,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<u64>,
    #[serde(default)]
    pub importance: Option<ImportanceConfig>,
    /// Largest tolerated fraction of trials with solver failures.
    #[serde(default)]
    pub failure_budget: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// Plain Monte Carlo; each trial uses the same fading draw at every SNR.
    Plain,
    /// Per-link defensive mixture proposal, reweighted by likelihood ratio.
    Importance { mix: f64, tilt: f64 },
}

/// Validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub means: Arc<MeanGains>,
    pub curves: Vec<CurveId>,
    pub targets: Vec<OutageTarget>,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub workers: Option<usize>,
    pub batch_size: u64,
    pub sampling: Sampling,
    pub failure_budget: f64,
}

pub const DEFAULT_BATCH: u64 = 64;
pub const DEFAULT_FAILURE_BUDGET: f64 = 1e-3;

impl Experiment {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let bad = |m: String| Err(Error::Config(m));
        let means = cfg.network.mean_gains()?;
        let n = means.n();
        if cfg.protocols.is_empty() {
            return bad("no protocols requested".into());
        }
        let mut curves = Vec::new();
        for name in &cfg.protocols {
            let id: CurveId = name.parse()?;
            if curves.contains(&id) {
                return bad(format!("protocol {name} listed twice"));
            }
            if id == CurveId::Protocol(ProtocolId::Fo) && n > MAX_NODES {
                return bad(format!("fo supports at most {MAX_NODES} nodes"));
            }
            if id == CurveId::Protocol(ProtocolId::CutSetBound) && n > MAX_NODES_BOUND {
                return bad(format!("bound supports at most {MAX_NODES_BOUND} nodes"));
            }
            curves.push(id);
        }
        let mut targets = Vec::new();
        for &r in &cfg.rates_bits {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("rate {r} must be positive"));
            }
            targets.push(OutageTarget::FixedRate(bits_to_nats(r)));
        }
        for &r in &cfg.multiplexing_gains {
            if !(r > 0.0 && r < 1.0) {
                return bad(format!("multiplexing gain {r} outside (0, 1)"));
            }
            targets.push(OutageTarget::Multiplexing(r));
        }
        if targets.is_empty() {
            return bad("no rates_bits or multiplexing_gains given".into());
        }
        let snr_db = cfg.snr_db.points()?;
        if snr_db.is_empty() || snr_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR grid must be a nonempty list of finite values".into());
        }
        if snr_db.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("SNR grid must be strictly increasing".into());
        }
        if cfg.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if cfg.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        let sampling = match cfg.importance {
            None => Sampling::Plain,
            Some(ImportanceConfig { mix, tilt }) => {
                if !(mix > 0.0 && mix < 1.0) || !(tilt > 0.0 && tilt.is_finite()) {
                    return bad(format!("importance mix {mix} must be in (0, 1) and tilt {tilt} positive"));
                }
                Sampling::Importance { mix, tilt }
            }
        };
        let failure_budget = cfg.failure_budget.unwrap_or(DEFAULT_FAILURE_BUDGET);
        if !(0.0..=1.0).contains(&failure_budget) {
            return bad(format!("failure budget {failure_budget} outside [0, 1]"));
        }
        Ok(Experiment {
            means: Arc::new(means),
            curves,
            targets,
            snr_db,
            trials: cfg.trials,
            seed: cfg.seed,
            workers: cfg.workers,
            batch_size: cfg.batch_size.unwrap_or(DEFAULT_BATCH).max(1),
            sampling,
            failure_budget,
        })
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
        } else {
            toml::from_str(text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
        };
        Self::from_config(&cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn n_nodes(&self) -> usize {
        self.means.n()
    }
}
