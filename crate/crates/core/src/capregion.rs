//! Gaussian broadcast and multiple-access capacity regions, scaled by slot
//! length.
//!
//! A flow `x` carried in a slot of length `t` corresponds to the per-slot
//! rate `x / t`. Zero-length slots carry zero flow.

use crate::error::{Error, Result};
use crate::netmodel::{cap, GainMatrix};

/// Absolute slack allowed by [`ma_feasible`] for rounding in the subset sums.
pub const MA_FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BcDemand {
    pub tx: usize,
    /// `(receiver, flow over the unit interval)`.
    pub targets: Vec<(usize, f64)>,
    pub slot_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaDemand {
    pub rx: usize,
    /// `(transmitter, flow over the unit interval)`.
    pub sources: Vec<(usize, f64)>,
    pub slot_length: f64,
}

fn check_flows(flows: impl Iterator<Item = f64>, t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("slot length {t} must be nonnegative")));
    }
    for x in flows {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("flow {x} must be nonnegative")));
        }
    }
    Ok(())
}

/// Minimum transmit SNR for a superposition-coded broadcast that delivers the
/// given per-slot rates, with receivers listed in decoding order: the first
/// entry treats every later signal as noise, the last one cancels everything
/// before it. `sum_k (1/Z_k)(e^{R_k} - 1) prod_{j<k} e^{R_j}`.
pub fn bc_min_snr_in_order(gain_rate: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    let mut carried: f64 = 0.0;
    for &(z, r) in gain_rate {
        if r == 0.0 {
            continue;
        }
        if z <= 0.0 {
            return f64::INFINITY;
        }
        total += r.exp_m1() * carried.exp() / z;
        carried += r;
    }
    total
}

/// Minimum SNR at which `demand` lies in the degraded Gaussian BC capacity
/// region. Receivers are decoded weakest first, so the strongest receiver
/// sees no interference.
///
/// Returns `Err(Infeasible)` for a positive flow in a zero-length slot and
/// `+inf` when a positive flow targets a zero-gain receiver.
pub fn bc_min_snr(demand: &BcDemand, gains: &GainMatrix) -> Result<f64> {
    let t = demand.slot_length;
    check_flows(demand.targets.iter().map(|&(_, x)| x), t)?;
    if t == 0.0 {
        if demand.targets.iter().any(|&(_, x)| x > 0.0) {
            return Err(Error::Infeasible("positive broadcast flow in a zero-length slot".into()));
        }
        return Ok(0.0);
    }
    let mut gr: Vec<(f64, f64)> = demand
        .targets
        .iter()
        .map(|&(rx, x)| (gains.get(demand.tx, rx), x / t))
        .collect();
    gr.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(bc_min_snr_in_order(&gr))
}

pub fn bc_feasible(demand: &BcDemand, gains: &GainMatrix, snr: f64) -> Result<bool> {
    match bc_min_snr(demand, gains) {
        Ok(s) => Ok(s <= snr),
        Err(Error::Infeasible(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Largest violation `sum_{A in U} x_A - t C(S sum_{A in U} Z_A)` over all
/// nonempty transmitter subsets `U` (nonpositive when feasible). A zero-length
/// slot reports the total flow.
pub fn ma_max_violation(demand: &MaDemand, gains: &GainMatrix, snr: f64) -> f64 {
    let t = demand.slot_length;
    let k = demand.sources.len();
    if t <= 0.0 {
        return demand.sources.iter().map(|&(_, x)| x).sum();
    }
    let z: Vec<f64> = demand.sources.iter().map(|&(a, _)| gains.get(a, demand.rx)).collect();
    let mut worst = f64::NEG_INFINITY;
    for mask in 1u32..(1u32 << k) {
        let (mut flow, mut gain) = (0.0, 0.0);
        for j in 0..k {
            if mask >> j & 1 == 1 {
                flow += demand.sources[j].1;
                gain += z[j];
            }
        }
        worst = worst.max(flow - t * cap(snr * gain));
    }
    worst
}

/// MA polymatroid membership: every subset sum of flows within `t` times the
/// subset's sum-capacity.
pub fn ma_feasible(demand: &MaDemand, gains: &GainMatrix, snr: f64) -> bool {
    if demand.sources.iter().any(|&(_, x)| !(x >= 0.0)) || !(demand.slot_length >= 0.0) {
        return false;
    }
    if demand.sources.is_empty() {
        return true;
    }
    if demand.slot_length == 0.0 {
        return demand.sources.iter().all(|&(_, x)| x == 0.0);
    }
    ma_max_violation(demand, gains, snr) <= MA_FEASIBILITY_TOL
}

/// Boundary point of the two-receiver BC region in a slot of length `t`
/// where a fraction `alpha` of the power serves receiver `a`.
///
/// The stronger receiver decodes and removes the weaker receiver's signal:
/// for `z_a >= z_b` this is `(t C(Z_a a S), t C(Z_b (1-a) S / (1 + Z_b a S)))`,
/// and the mirrored form otherwise.
pub fn bc_boundary_rate_pair(z_a: f64, z_b: f64, t: f64, alpha: f64, snr: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("power fraction {alpha} outside [0, 1]")));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("slot length {t} must be nonnegative")));
    }
    let beta = 1.0 - alpha;
    Ok(if z_a >= z_b {
        (t * cap(z_a * alpha * snr), t * cap(z_b * beta * snr / (1.0 + z_b * alpha * snr)))
    } else {
        (t * cap(z_a * alpha * snr / (1.0 + z_a * beta * snr)), t * cap(z_b * beta * snr))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains3(sr: f64, sd: f64) -> GainMatrix {
        let mut g = GainMatrix::zeros(3);
        g.set(0, 1, sr);
        g.set(0, 2, sd);
        g
    }

    #[test]
    fn two_receiver_formula_matches_both_branches() {
        let (x1, x2, t) = (0.4, 0.7, 0.6);
        let (u1, u2) = (x1 / t, x2 / t);
        let bc = |sr, sd| {
            bc_min_snr(
                &BcDemand {
                    tx: 0,
                    targets: vec![(2, x1), (1, x2)],
                    slot_length: t,
                },
                &gains3(sr, sd),
            )
            .unwrap()
        };
        // Z_SR > Z_SD
        let (sr, sd) = (3.0, 1.5);
        let want = (f64::exp(u1) - 1.0) / sd + f64::exp(u1) * (f64::exp(u2) - 1.0) / sr;
        assert!((bc(sr, sd) - want).abs() < 1e-12 * want);
        // Z_SR <= Z_SD
        let (sr, sd) = (0.8, 2.0);
        let want = (f64::exp(u2) - 1.0) / sr + f64::exp(u2) * (f64::exp(u1) - 1.0) / sd;
        assert!((bc(sr, sd) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn single_receiver_is_point_to_point() {
        let g = gains3(2.5, 1.0);
        let d = BcDemand {
            tx: 0,
            targets: vec![(1, 0.9)],
            slot_length: 0.5,
        };
        let s = bc_min_snr(&d, &g).unwrap();
        assert!((s - (1.8f64.exp() - 1.0) / 2.5).abs() < 1e-12);
        // feasible iff x <= t C(Z S)
        let snr = 4.0;
        let edge = 0.5 * cap(2.5 * snr);
        let at = |x| BcDemand {
            tx: 0,
            targets: vec![(1, x)],
            slot_length: 0.5,
        };
        assert!(bc_feasible(&at(edge * (1.0 - 1e-9)), &g, snr).unwrap());
        assert!(!bc_feasible(&at(edge * (1.0 + 1e-9)), &g, snr).unwrap());
    }

    #[test]
    fn zero_length_slot() {
        let g = gains3(1.0, 1.0);
        let zero = BcDemand {
            tx: 0,
            targets: vec![(1, 0.0), (2, 0.0)],
            slot_length: 0.0,
        };
        assert_eq!(bc_min_snr(&zero, &g).unwrap(), 0.0);
        let pos = BcDemand {
            tx: 0,
            targets: vec![(1, 0.1)],
            slot_length: 0.0,
        };
        assert!(matches!(bc_min_snr(&pos, &g), Err(Error::Infeasible(_))));
        assert!(!bc_feasible(&pos, &g, 1e9).unwrap());
        let neg = BcDemand {
            tx: 0,
            targets: vec![(1, -0.1)],
            slot_length: 1.0,
        };
        assert!(matches!(bc_min_snr(&neg, &g), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_gain_receiver() {
        let g = gains3(0.0, 1.0);
        let d = BcDemand {
            tx: 0,
            targets: vec![(1, 0.1), (2, 0.1)],
            slot_length: 1.0,
        };
        assert_eq!(bc_min_snr(&d, &g).unwrap(), f64::INFINITY);
        let d = BcDemand {
            tx: 0,
            targets: vec![(1, 0.0), (2, 0.1)],
            slot_length: 1.0,
        };
        assert!(bc_min_snr(&d, &g).unwrap().is_finite());
    }

    #[test]
    fn ma_pentagon_corner() {
        let (sd, rd, snr, t2) = (1.3, 2.2, 5.0, 0.4);
        let mut g = GainMatrix::zeros(3);
        g.set(0, 2, sd);
        g.set(1, 2, rd);
        let x3 = t2 * cap(sd * snr);
        let x4 = t2 * (cap(sd * snr + rd * snr) - cap(sd * snr));
        let d = |x4| MaDemand {
            rx: 2,
            sources: vec![(0, x3), (1, x4)],
            slot_length: t2,
        };
        assert!(ma_feasible(&d(x4), &g, snr));
        assert!(!ma_feasible(&d(x4 + 1e-6), &g, snr));
        let zero = MaDemand {
            rx: 2,
            sources: vec![(0, 0.0), (1, 0.0)],
            slot_length: 0.3,
        };
        assert!(ma_feasible(&zero, &g, snr));
    }

    #[test]
    fn boundary_pair_extremes() {
        let (za, zb, t, s) = (1.7, 3.1, 0.6, 8.0);
        let (a, b) = bc_boundary_rate_pair(za, zb, t, 1.0, s).unwrap();
        assert!((a - t * cap(za * s)).abs() < 1e-15 && b == 0.0);
        let (a, b) = bc_boundary_rate_pair(za, zb, t, 0.0, s).unwrap();
        assert!(a == 0.0 && (b - t * cap(zb * s)).abs() < 1e-15);
        assert!(bc_boundary_rate_pair(za, zb, t, 1.5, s).is_err());
        assert!(bc_boundary_rate_pair(za, zb, t, -0.1, s).is_err());
    }

    #[test]
    fn boundary_pair_round_trip() {
        for &(za, zb) in &[(2.0, 0.5), (0.5, 2.0), (1.0, 1.0)] {
            for i in 0..=10 {
                let alpha = i as f64 / 10.0;
                let (t, s) = (0.7, 12.0);
                let (xa, xb) = bc_boundary_rate_pair(za, zb, t, alpha, s).unwrap();
                let mut g = GainMatrix::zeros(3);
                g.set(0, 1, za);
                g.set(0, 2, zb);
                let d = BcDemand {
                    tx: 0,
                    targets: vec![(1, xa), (2, xb)],
                    slot_length: t,
                };
                let need = bc_min_snr(&d, &g).unwrap();
                assert!((need - s).abs() < 1e-9 * s, "za={za} zb={zb} a={alpha}: {need}");
            }
        }
    }
}
