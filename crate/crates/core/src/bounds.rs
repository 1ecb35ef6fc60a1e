//! Cut-set upper bound on the slotted rate and the destination-cut outage
//! lower bound.
//!
//! The bound schedule has one slot per subset `T` of relays: the source and
//! the relays in `T` transmit while the remaining relays and the destination
//! listen. The first slot (`T` empty) is the source broadcast and the last
//! (`T` all relays) is the destination multiple access. Inside each slot only
//! the sum-SNR capacity of every cut limits the flows, so interference is
//! ignored and the result is an upper bound on every protocol built from
//! half-duplex BC/MA slots.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::barrier::{Options, Status};
use crate::error::{Error, Result};
use crate::fo_solver::quick_upper_rate;
use crate::flowprog::{FlowProgram, ObjectiveCuts, SlotModel};
use crate::netmodel::{MeanGains, NetworkInstance, RandomSource};
use crate::special::gamma_p;

/// Largest network the subset layout is built for.
pub const MAX_NODES_BOUND: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSlot {
    pub tx: Vec<usize>,
    pub rx: Vec<usize>,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSchedule {
    pub n_nodes: usize,
    pub slots: Vec<BoundSlot>,
}

impl BoundSchedule {
    /// The `2^{N-2}` slot layout, ordered by relay bitmask of the
    /// transmitting relays. Lengths are zero.
    pub fn layout(n_nodes: usize) -> Result<Self> {
        if !(3..=MAX_NODES_BOUND).contains(&n_nodes) {
            return Err(Error::Config(format!(
                "cut-set bound supports 3 to {MAX_NODES_BOUND} nodes, got {n_nodes}"
            )));
        }
        let dst = n_nodes - 1;
        let relays = n_nodes - 2;
        let slots = (0..1u32 << relays)
            .map(|mask| {
                let mut tx = vec![0];
                let mut rx = Vec::new();
                for r in 1..=relays {
                    if mask >> (r - 1) & 1 == 1 {
                        tx.push(r);
                    } else {
                        rx.push(r);
                    }
                }
                rx.push(dst);
                BoundSlot { tx, rx, length: 0.0 }
            })
            .collect();
        Ok(BoundSchedule { n_nodes, slots })
    }

    fn models(&self) -> Vec<SlotModel> {
        self.slots
            .iter()
            .map(|s| SlotModel::CutSet {
                tx: s.tx.clone(),
                rx: s.rx.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub rate: f64,
    pub schedule: BoundSchedule,
    pub slot_lengths: Vec<f64>,
    pub iterations: usize,
    pub gap_bound: f64,
}

fn program(net: &NetworkInstance) -> Result<(BoundSchedule, FlowProgram)> {
    let layout = BoundSchedule::layout(net.n_nodes())?;
    let fp = FlowProgram::build(net, &layout.models(), ObjectiveCuts::Reduced)?;
    Ok((layout, fp))
}

/// Cut-set upper bound on the achievable rate, with its slot lengths.
pub fn cutset_upper(net: &NetworkInstance) -> Result<BoundResult> {
    let (mut schedule, fp) = program(net)?;
    if fp.n_flow_vars() == 0 {
        return Ok(BoundResult {
            rate: 0.0,
            slot_lengths: vec![0.0; schedule.slots.len()],
            schedule,
            iterations: 0,
            gap_bound: 0.0,
        });
    }
    let sol = fp.solve(&Options::default())?;
    let lengths: Vec<f64> = fp.time_vars.iter().map(|&i| sol.z[i].max(0.0)).collect();
    for (s, &t) in schedule.slots.iter_mut().zip(&lengths) {
        s.length = t;
    }
    Ok(BoundResult {
        rate: fp.min_objective_cut(&sol.z).max(0.0),
        schedule,
        slot_lengths: lengths,
        iterations: sol.iterations,
        gap_bound: sol.gap_bound,
    })
}

pub fn cutset_upper_rate(net: &NetworkInstance) -> Result<f64> {
    Ok(cutset_upper(net)?.rate)
}

/// Whether the cut-set bound is at least `target` nats.
pub fn cutset_supports(net: &NetworkInstance, target: f64) -> Result<bool> {
    if target <= 0.0 {
        return Ok(true);
    }
    if target > quick_upper_rate(net) {
        return Ok(false);
    }
    let (_, fp) = program(net)?;
    if fp.n_flow_vars() == 0 {
        return Ok(false);
    }
    let sol = fp.solve(&Options {
        target: Some(-target),
        ..Options::default()
    })?;
    Ok(match sol.status {
        Status::TargetReached => true,
        Status::TargetUnreachable => false,
        Status::Optimal => fp.min_objective_cut(&sol.z) >= target,
    })
}

/// Target rate of an outage computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OutageTarget {
    /// Fixed rate in nats.
    FixedRate(f64),
    /// Multiplexing gain `r`: the rate is `r ln S`.
    Multiplexing(f64),
}

impl OutageTarget {
    pub fn rate_nats(self, snr: f64) -> f64 {
        match self {
            OutageTarget::FixedRate(r) => r,
            OutageTarget::Multiplexing(r) => r * snr.ln(),
        }
    }

    /// Threshold on the destination-cut gain sum: `(e^R - 1) / S`.
    pub fn threshold(self, snr: f64) -> f64 {
        self.rate_nats(snr).exp_m1() / snr
    }
}

/// Outage probability of the destination multiple-access cut with unit-mean
/// gains: the sum of `N - 1` unit exponentials falls below `x`, i.e. the
/// regularized lower incomplete gamma `P(N - 1, x)`.
pub fn ma_cut_outage_lower_at(n_nodes: usize, x: f64) -> Result<f64> {
    if n_nodes < 3 {
        return Err(Error::Config(format!("need at least 3 nodes, got {n_nodes}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("threshold {x} must be nonnegative")));
    }
    Ok(gamma_p((n_nodes - 1) as f64, x))
}

pub fn ma_cut_outage_lower(n_nodes: usize, target: OutageTarget, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::Domain(format!("snr {snr} must be positive")));
    }
    ma_cut_outage_lower_at(n_nodes, target.threshold(snr).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundEstimate {
    pub p_hat: f64,
    pub trials: u64,
    pub hits: u64,
    /// Always true: the value is a Monte Carlo estimate, not the closed form.
    pub monte_carlo: bool,
}

/// Sum of the gains into the destination.
pub fn destination_cut_gain(net_gains: &crate::netmodel::GainMatrix) -> f64 {
    let d = net_gains.n() - 1;
    (0..d).map(|i| net_gains.get(i, d)).sum()
}

/// Monte Carlo version of the destination-cut bound for arbitrary means
/// (the gain sum is hypoexponential). Trial `k` draws only the gains into the
/// destination from stream `k` of `seed`.
pub fn ma_cut_outage_lower_mc(means: &MeanGains, x: f64, trials: u64, seed: u64) -> Result<LowerBoundEstimate> {
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let n = means.n();
    let d = n - 1;
    let mut hits = 0;
    for k in 0..trials {
        let mut rng = RandomSource::new(seed, k).rng();
        let total: f64 = (0..d)
            .map(|i| {
                let e: f64 = rng.sample(Exp1);
                e * means.matrix().get(i, d)
            })
            .sum();
        if total < x {
            hits += 1;
        }
    }
    Ok(LowerBoundEstimate {
        p_hat: hits as f64 / trials as f64,
        trials,
        hits,
        monte_carlo: true,
    })
}

/// Optimal diversity-multiplexing tradeoff `(N - 1)(1 - r)`.
pub fn dmt_reference(n_nodes: usize, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("multiplexing gain {r} outside (0, 1)")));
    }
    Ok((n_nodes as f64 - 1.0) * (1.0 - r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{cap, GainMatrix};

    #[test]
    fn layout_counts() {
        assert_eq!(BoundSchedule::layout(3).unwrap().slots.len(), 2);
        let four = BoundSchedule::layout(4).unwrap();
        assert_eq!(four.slots.len(), 4);
        assert_eq!(four.slots[0].tx, vec![0]);
        assert_eq!(four.slots[0].rx, vec![1, 2, 3]);
        assert_eq!(four.slots[3].tx, vec![0, 1, 2]);
        assert_eq!(four.slots[3].rx, vec![3]);
        assert_eq!(BoundSchedule::layout(5).unwrap().slots.len(), 8);
        assert!(BoundSchedule::layout(7).is_err());
    }

    #[test]
    fn link_count_matches_four_node_layout() {
        // 3 + 4 + 4 + 3 directed links across the four slots
        let total: usize = BoundSchedule::layout(4)
            .unwrap()
            .slots
            .iter()
            .map(|s| s.tx.len() * s.rx.len())
            .sum();
        assert_eq!(total, 14);
    }

    #[test]
    fn direct_only() {
        for n in [3, 4, 5] {
            let mut g = GainMatrix::zeros(n);
            g.set(0, n - 1, 0.8);
            let net = NetworkInstance::new(g, 20.0).unwrap();
            let r = cutset_upper_rate(&net).unwrap();
            assert!((r - cap(16.0)).abs() < 1e-6, "n={n}: {r}");
        }
    }

    #[test]
    fn supports_agrees_with_rate() {
        let net = NetworkInstance::new(GainMatrix::uniform(4, 1.0), 10.0).unwrap();
        let r = cutset_upper_rate(&net).unwrap();
        assert!(cutset_supports(&net, r * 0.999).unwrap());
        assert!(!cutset_supports(&net, r * 1.001).unwrap());
    }

    #[test]
    fn lower_bound_values() {
        assert_eq!(ma_cut_outage_lower_at(3, 0.0).unwrap(), 0.0);
        let want = 1.0 - 2.0 * (-1.0f64).exp();
        assert!((ma_cut_outage_lower_at(3, 1.0).unwrap() - want).abs() < 1e-14);
        assert!(ma_cut_outage_lower_at(2, 1.0).is_err());
        let snr = 100.0;
        let t = OutageTarget::FixedRate(1.0);
        assert!((t.threshold(snr) - (1.0f64.exp() - 1.0) / snr).abs() < 1e-15);
        let m = OutageTarget::Multiplexing(0.5);
        assert!((m.threshold(snr) - (10.0 - 1.0) / snr).abs() < 1e-12);
    }

    #[test]
    fn dmt_values() {
        assert_eq!(dmt_reference(3, 0.5).unwrap(), 1.0);
        assert!((dmt_reference(5, 0.2).unwrap() - 3.2).abs() < 1e-15);
        assert!(dmt_reference(4, 1.0 - 1e-12).unwrap() < 1e-10);
        assert!(dmt_reference(4, 0.0).is_err());
        assert!(dmt_reference(4, 1.0).is_err());
    }
}
