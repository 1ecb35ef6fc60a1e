//! Network description, fading sampler and elementary channel math.
//!
//! Node `0` is the source, node `n - 1` the destination and `1..n-1` are
//! relays. Gains are power gains `Z_ij` of the directed link `i -> j`; the two
//! directions of a pair are independent draws.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nats per bit.
pub const NATS_PER_BIT: f64 = std::f64::consts::LN_2;

/// Largest network the solvers accept.
pub const MAX_NODES: usize = 8;

/// Gaussian capacity `ln(1 + x)` in nats.
pub fn capacity(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("capacity of negative SNR {x}")));
    }
    Ok(x.ln_1p())
}

/// Unchecked `ln(1 + x)` for hot paths whose arguments are nonnegative by
/// construction.
#[inline]
pub(crate) fn cap(x: f64) -> f64 {
    x.ln_1p()
}

pub fn db_to_linear(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

pub fn bits_to_nats(bits: f64) -> f64 {
    bits * NATS_PER_BIT
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / NATS_PER_BIT
}

/// Dense `n x n` matrix of link power gains. Diagonal entries are never read.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMatrix {
    n: usize,
    data: Vec<f64>,
}

impl GainMatrix {
    pub fn zeros(n: usize) -> Self {
        GainMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Every off-diagonal entry set to `value`.
    pub fn uniform(n: usize, value: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m.set(i, j, value);
                }
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Config("gain matrix must be square".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        let m = GainMatrix { n, data };
        m.check_nonnegative()?;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.n + to]
    }

    #[inline]
    pub fn set(&mut self, from: usize, to: usize, value: f64) {
        self.data[from * self.n + to] = value;
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        GainMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    fn check_nonnegative(&self) -> Result<()> {
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j);
                if i != j && !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("gain {i}->{j} = {v} is not a nonnegative real")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for GainMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.n)).finish()
    }
}

/// Per-link mean power gains. Off-diagonal entries are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanGains(GainMatrix);

impl MeanGains {
    pub fn new(matrix: GainMatrix) -> Result<Self> {
        let n = matrix.n();
        if n < 3 {
            return Err(Error::Config(format!("a relay network needs at least 3 nodes, got {n}")));
        }
        for i in 0..n {
            for j in 0..n {
                let v = matrix.get(i, j);
                if i != j && !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("mean gain {i}->{j} = {v} must be positive")));
                }
            }
        }
        Ok(MeanGains(matrix))
    }

    /// Unit-mean i.i.d. Rayleigh fading.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(GainMatrix::uniform(n, 1.0))
    }

    /// Named presets: `"caseA"` and `"caseB"` are the four-node non-uniform
    /// networks; `"uniform"` needs an explicit node count.
    pub fn preset(name: &str, n_nodes: Option<usize>) -> Result<Self> {
        // (S->R1, S->R2, S->D, R1<->R2, R1->D, R2->D)
        let four_node = |v: [f64; 6]| -> Result<Self> {
            if let Some(n) = n_nodes.filter(|&n| n != 4) {
                return Err(Error::Config(format!("preset {name} is a 4-node network, n_nodes = {n}")));
            }
            let [sr1, sr2, sd, r1r2, r1d, r2d] = v;
            let mut m = GainMatrix::zeros(4);
            for (a, b, g) in [(0, 1, sr1), (0, 2, sr2), (0, 3, sd), (1, 2, r1r2), (1, 3, r1d), (2, 3, r2d)] {
                m.set(a, b, g);
                m.set(b, a, g);
            }
            Self::new(m)
        };
        match name {
            "uniform" => {
                let n = n_nodes.ok_or_else(|| Error::Config("\"uniform\" gains need n_nodes".into()))?;
                Self::uniform(n)
            }
            "caseA" => four_node([2.0, 2.0, 1.0, 1.0, 1.5, 1.0]),
            "caseB" => four_node([1.5, 0.75, 1.0, 3.5, 0.2, 3.0]),
            other => Err(Error::Config(format!("unknown gain preset {other:?}"))),
        }
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn matrix(&self) -> &GainMatrix {
        &self.0
    }

    pub fn is_uniform_unit(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0.get(i, j) == 1.0))
    }

    /// One fading realization: each off-diagonal entry exponential with the
    /// configured mean, drawn in row-major order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GainMatrix {
        let n = self.n();
        let mut z = GainMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let e: f64 = rng.sample(Exp1);
                    z.set(i, j, e * self.0.get(i, j));
                }
            }
        }
        z
    }
}

/// Seed plus per-trial substream. Identical pairs always reproduce the same
/// random sequence, independent of which worker consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomSource {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RandomSource { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Draws one gain realization from `means` using the substream `source`.
pub fn sample_gains(means: &GainMatrix, source: &RandomSource) -> Result<GainMatrix> {
    let means = MeanGains::new(means.clone())?;
    Ok(means.sample(&mut source.rng()))
}

/// One network realization at a fixed transmit SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    gains: GainMatrix,
    snr: f64,
    mean_gains: Option<Arc<MeanGains>>,
}

impl NetworkInstance {
    pub fn new(gains: GainMatrix, snr: f64) -> Result<Self> {
        if gains.n() < 3 {
            return Err(Error::Config(format!("a relay network needs at least 3 nodes, got {}", gains.n())));
        }
        gains.check_nonnegative()?;
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(Error::Config(format!("snr must be positive, got {snr}")));
        }
        Ok(NetworkInstance {
            gains,
            snr,
            mean_gains: None,
        })
    }

    /// Attaches the mean-gain matrix the realization was drawn from.
    pub fn with_means(mut self, means: Arc<MeanGains>) -> Self {
        self.mean_gains = Some(means);
        self
    }

    /// Same realization at another SNR.
    pub fn at_snr(&self, snr: f64) -> Result<Self> {
        let mut out = Self::new(self.gains.clone(), snr)?;
        out.mean_gains = self.mean_gains.clone();
        Ok(out)
    }

    pub fn n_nodes(&self) -> usize {
        self.gains.n()
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn destination(&self) -> usize {
        self.gains.n() - 1
    }

    pub fn relays(&self) -> std::ops::Range<usize> {
        1..self.gains.n() - 1
    }

    #[inline]
    pub fn gain(&self, from: usize, to: usize) -> f64 {
        self.gains.get(from, to)
    }

    pub fn gains(&self) -> &GainMatrix {
        &self.gains
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn mean_gains(&self) -> Option<&MeanGains> {
        self.mean_gains.as_deref()
    }

    /// Rate of the direct link alone, `C(Z_SD S)`.
    pub fn direct_rate(&self) -> f64 {
        cap(self.gain(0, self.destination()) * self.snr)
    }
}

/// Mean-gain section of a configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

/// Network part of an experiment configuration (TOML or JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(default)]
    pub n_nodes: Option<usize>,
    pub gains: GainSpec,
}

impl NetworkConfig {
    pub fn mean_gains(&self) -> Result<MeanGains> {
        let means = match &self.gains {
            GainSpec::Named(name) => MeanGains::preset(name, self.n_nodes)?,
            GainSpec::Matrix(rows) => {
                let mut rows = rows.clone();
                for (i, row) in rows.iter_mut().enumerate() {
                    if let Some(d) = row.get_mut(i) {
                        *d = 0.0;
                    }
                }
                let m = GainMatrix::from_rows(&rows)?;
                if let Some(n) = self.n_nodes.filter(|&n| n != m.n()) {
                    return Err(Error::Config(format!("n_nodes = {n} but gain matrix is {0}x{0}", m.n())));
                }
                MeanGains::new(m)?
            }
        };
        if means.n() > MAX_NODES {
            return Err(Error::Config(format!("at most {MAX_NODES} nodes are supported")));
        }
        Ok(means)
    }
}
