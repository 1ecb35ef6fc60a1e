//! Exact optimum of the three-node (source, relay, destination) relay program.
//!
//! Slot 1 (length `t1`): the source broadcasts `x1` to the destination and
//! `x2` to the relay. Slot 2 (length `t2 = 1 - t1`): source and relay send
//! `x3` and `x4 = x2` to the destination by multiple access.
//!
//! When the direct link is at least as strong as the source-relay link the
//! optimum is direct transmission. Otherwise the per-`t2` optimum has a
//! closed form and only a scalar search over `t2 in [0, t2max]` remains.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::netmodel::cap;
use crate::scalar::{argmax_first, golden_section_max, is_unimodal, uniform_grid};

const GRID_POINTS: usize = 200;
const GOLDEN_TOL: f64 = 1e-9;
const DENSE_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    Direct,
    Relayed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreeNodeResult {
    /// Maximum rate `X(S)` in nats.
    pub rate: f64,
    pub strategy: Strategy,
    pub t2_opt: f64,
    /// Fraction of source power spent on the relay stream in slot 1.
    pub alpha_bar_opt: f64,
    /// `[x1, x2, x3, x4]`: S->D in slot 1, S->R in slot 1, S->D in slot 2,
    /// R->D in slot 2.
    pub flows: [f64; 4],
    /// Whether the coarse grid looked non-unimodal and the dense fallback ran.
    pub used_dense_fallback: bool,
}

/// Optimum of the program at a fixed relay-transmit fraction `t2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateAtT2 {
    pub rate: f64,
    pub alpha_bar: f64,
    pub flows: [f64; 4],
}

/// Largest `t2` for which the direct link's multiple-access share stays at
/// `C(Z_SD S)`: `C(Z_SR S) / [C(Z_SR S) + C(Z_RD S + Z_SD S) - C(Z_SD S)]`.
pub fn t2_max(z_sd: f64, z_sr: f64, z_rd: f64, snr: f64) -> f64 {
    let c_sr = cap(z_sr * snr);
    // C(Z_SD S + Z_RD S) - C(Z_SD S) without cancellation
    let relay_gain = cap(z_rd * snr / (1.0 + z_sd * snr));
    if c_sr + relay_gain == 0.0 {
        return 1.0;
    }
    c_sr / (c_sr + relay_gain)
}

/// Rate attained at `t2 = t2max`:
/// `C(Z_SR S) C(Z_SD S + Z_RD S) / [C(Z_SR S) + C(Z_RD S + Z_SD S) - C(Z_SD S)]`.
pub fn rate_at_t2_max(z_sd: f64, z_sr: f64, z_rd: f64, snr: f64) -> f64 {
    let c_sr = cap(z_sr * snr);
    let c_sum = cap((z_sd + z_rd) * snr);
    let relay_gain = cap(z_rd * snr / (1.0 + z_sd * snr));
    if c_sr + relay_gain == 0.0 {
        return cap(z_sd * snr);
    }
    c_sr * c_sum / (c_sr + relay_gain)
}

fn check_gains(z_sd: f64, z_sr: f64, z_rd: f64, snr: f64) -> Result<()> {
    if !(z_sd >= 0.0 && z_sr >= 0.0 && z_rd >= 0.0) {
        return Err(Error::Domain("gains must be nonnegative".into()));
    }
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::Domain(format!("snr {snr} must be positive")));
    }
    Ok(())
}

/// Relayed-case optimum at fixed `t2 in [0, t2max]`; requires `Z_SD < Z_SR`.
/// The broadcast power split sits where both multiple-access constraints on
/// the direct flow bind.
pub fn rate_given_t2(z_sd: f64, z_sr: f64, z_rd: f64, snr: f64, t2: f64) -> Result<RateAtT2> {
    check_gains(z_sd, z_sr, z_rd, snr)?;
    if !(z_sd < z_sr) {
        return Err(Error::Domain(format!(
            "relayed form needs Z_SD < Z_SR (got {z_sd} >= {z_sr})"
        )));
    }
    let t2m = t2_max(z_sd, z_sr, z_rd, snr);
    if !(0.0..=1.0).contains(&t2) {
        return Err(Error::Domain(format!("t2 = {t2} outside [0, 1]")));
    }
    if t2 > t2m * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("t2 = {t2} exceeds t2max = {t2m}")));
    }
    Ok(relayed_at(z_sd, z_sr, z_rd, snr, t2.min(t2m), t2m))
}

fn relayed_at(z_sd: f64, z_sr: f64, z_rd: f64, snr: f64, t2: f64, t2m: f64) -> RateAtT2 {
    let c_sd = cap(z_sd * snr);
    let c_sum = cap((z_sd + z_rd) * snr);
    let relay_gain = cap(z_rd * snr / (1.0 + z_sd * snr));
    let t1 = 1.0 - t2;
    let x3 = t2 * c_sd;
    let x2 = t2 * relay_gain;
    if t2 >= t2m {
        // all source power to the relay in slot 1
        let rate = rate_at_t2_max(z_sd, z_sr, z_rd, snr);
        return RateAtT2 {
            rate,
            alpha_bar: 1.0,
            flows: [0.0, x2, x3, x2],
        };
    }
    let grow = (t2 / t1 * relay_gain).exp_m1();
    let alpha_bar = (grow / (z_sr * snr)).min(1.0);
    let x1 = t1 * (c_sd - (z_sd / z_sr * grow).ln_1p()).max(0.0);
    RateAtT2 {
        rate: x1 + t2 * c_sum,
        alpha_bar,
        flows: [x1, x2, x3, x2],
    }
}

fn direct_result(z_sd: f64, snr: f64) -> ThreeNodeResult {
    let c = cap(z_sd * snr);
    ThreeNodeResult {
        rate: c,
        strategy: Strategy::Direct,
        t2_opt: 0.0,
        alpha_bar_opt: 0.0,
        flows: [c, 0.0, 0.0, 0.0],
        used_dense_fallback: false,
    }
}

/// Maximum rate of the three-node network.
pub fn solve_three_node(z_sd: f64, z_sr: f64, z_rd: f64, snr: f64) -> Result<ThreeNodeResult> {
    check_gains(z_sd, z_sr, z_rd, snr)?;
    if z_sd >= z_sr || z_rd == 0.0 {
        return Ok(direct_result(z_sd, snr));
    }
    let t2m = t2_max(z_sd, z_sr, z_rd, snr);
    let f = |t2: f64| relayed_at(z_sd, z_sr, z_rd, snr, t2, t2m).rate;

    let grid = uniform_grid(f, 0.0, t2m, GRID_POINTS);
    let scale = grid.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    let values: Vec<f64> = grid.iter().map(|p| p.1).collect();
    let mut dense_fallback = false;
    let (lo, hi) = if is_unimodal(&values, 1e-13 * scale.max(1.0)) {
        let k = argmax_first(&grid);
        (grid[k.saturating_sub(1)].0, grid[(k + 1).min(GRID_POINTS)].0)
    } else {
        dense_fallback = true;
        let points = ((t2m / DENSE_STEP).ceil() as usize).max(GRID_POINTS);
        let dense = uniform_grid(f, 0.0, t2m, points);
        let k = argmax_first(&dense);
        (dense[k.saturating_sub(1)].0, dense[(k + 1).min(points)].0)
    };
    let (mut t2, mut rate) = golden_section_max(f, lo, hi, GOLDEN_TOL);
    // the bracket ends were evaluated on the grid; keep the best of all
    for &end in &[lo, hi] {
        let v = f(end);
        if v > rate || (v == rate && end < t2) {
            t2 = end;
            rate = v;
        }
    }
    if t2 <= 0.0 {
        return Ok(direct_result(z_sd, snr));
    }
    let at = relayed_at(z_sd, z_sr, z_rd, snr, t2, t2m);
    Ok(ThreeNodeResult {
        rate: at.rate,
        strategy: Strategy::Relayed,
        t2_opt: t2,
        alpha_bar_opt: at.alpha_bar,
        flows: at.flows,
        used_dense_fallback: dense_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t2max_forms_agree() {
        let (sd, sr, rd, s): (f64, f64, f64, f64) = (1.0, 4.0, 4.0, 10.0);
        let a = cap(sr * s) / (cap(sr * s) + cap(rd * s + sd * s) - cap(sd * s));
        let b = cap(sr * s) / (cap(rd * s / (1.0 + sd * s)) + cap(sr * s));
        let v = t2_max(sd, sr, rd, s);
        assert!((v - a).abs() < 1e-12);
        assert!((v - b).abs() < 1e-12);
        assert!(v > 0.0 && v <= 1.0);
    }

    #[test]
    fn t2max_limits() {
        assert_eq!(t2_max(1.0, 2.0, 0.0, 5.0), 1.0);
        let v = t2_max(1.0, 4.0, 4.0, 1e-6);
        assert!(v > 0.0 && v <= 1.0);
    }

    #[test]
    fn rate_at_zero_t2_is_direct() {
        let r = rate_given_t2(1.0, 4.0, 4.0, 10.0, 0.0).unwrap();
        assert!((r.rate - cap(10.0)).abs() < 1e-14);
        assert_eq!(r.alpha_bar, 0.0);
    }

    #[test]
    fn useless_relay_link_collapses() {
        for &t2 in &[0.0, 0.3, 0.9, 1.0] {
            let r = rate_given_t2(1.0, 3.0, 0.0, 7.0, t2).unwrap();
            assert!((r.rate - cap(7.0)).abs() < 1e-12, "t2={t2}: {}", r.rate);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let t2m = t2_max(1.0, 4.0, 4.0, 10.0);
        assert!(rate_given_t2(1.0, 4.0, 4.0, 10.0, t2m + 1e-3).is_err());
        assert!(rate_given_t2(4.0, 1.0, 4.0, 10.0, 0.1).is_err());
        assert!(rate_given_t2(1.0, 4.0, 4.0, 10.0, -0.1).is_err());
        assert!(solve_three_node(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn endpoint_matches_closed_form() {
        let (sd, sr, rd, s) = (0.7, 2.5, 1.9, 30.0);
        let t2m = t2_max(sd, sr, rd, s);
        let at = rate_given_t2(sd, sr, rd, s, t2m).unwrap();
        let near = relayed_at(sd, sr, rd, s, t2m * (1.0 - 1e-9), t2m);
        assert!((at.rate - near.rate).abs() < 1e-7);
        assert!((near.alpha_bar - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flows_satisfy_constraints() {
        let (sd, sr, rd, s) = (1.0, 4.0, 4.0, 10.0);
        let r = solve_three_node(sd, sr, rd, s).unwrap();
        assert_eq!(r.strategy, Strategy::Relayed);
        let [x1, x2, x3, x4] = r.flows;
        let (t1, t2) = (1.0 - r.t2_opt, r.t2_opt);
        assert_eq!(x2, x4);
        assert!(x3 <= t2 * cap(sd * s) + 1e-12);
        assert!(x4 <= t2 * cap(rd * s) + 1e-12);
        assert!(x3 + x4 <= t2 * cap((sd + rd) * s) + 1e-12);
        let need = (x1 / t1).exp_m1() / sd + (x1 / t1).exp() * (x2 / t1).exp_m1() / sr;
        assert!(need <= s * (1.0 + 1e-9));
        assert!((x1 + x2 + x3 - r.rate).abs() < 1e-12);
        assert!(r.rate > cap(10.0));
        assert!(r.t2_opt <= t2_max(sd, sr, rd, s));
        assert!(x1 + x3 > 0.0);
    }

    #[test]
    fn direct_case_ignores_relay_destination_gain() {
        let r = solve_three_node(2.0, 1.0, 100.0, 5.0).unwrap();
        assert_eq!(r.strategy, Strategy::Direct);
        assert!((r.rate - cap(10.0)).abs() < 1e-15);
    }

    #[test]
    fn continuous_at_case_boundary() {
        let r = solve_three_node(1.5, 1.5, 3.0, 4.0).unwrap();
        assert_eq!(r.rate, cap(6.0));
        let r2 = solve_three_node(1.5, 1.5 * (1.0 + 1e-12), 3.0, 4.0).unwrap();
        assert!((r2.rate - cap(6.0)).abs() < 1e-9);
    }
}
