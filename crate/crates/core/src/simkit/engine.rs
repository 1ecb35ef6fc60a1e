//! Trial loop. Trial `k` draws its fading from stream `k` of the experiment
//! seed, so results do not depend on how trials are spread over workers.
//!
//! With plain sampling and a fixed target rate every protocol's rate is
//! nondecreasing in SNR, so a trial is summarized by the first grid index at
//! which each protocol supports the rate, found by bisection. The search
//! range of each protocol is narrowed by the per-realization ordering
//! `direct <= GLS <= FO <= cut-set bound <= min(source cut, destination cut)`.
//! Other modes evaluate every grid point on its own.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::bounds::{cutset_supports, ma_cut_outage_lower, OutageTarget};
use crate::error::{Error, Result};
use crate::fo_solver::{fo_feasible, quick_upper_rate, FoProblem};
use crate::netmodel::{cap, db_to_linear, nats_to_bits, GainMatrix, NetworkInstance, RandomSource};
use crate::par::{batches, map_batches};
use crate::protocols::{gls, max_min_selection, ProtocolId};

use super::config::{Experiment, Sampling};
use super::stats::{wilson_interval, WILSON_Z};
use super::{CurveId, OutageCurve, OutagePoint};

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// One curve per (target, requested curve), targets outermost.
    pub curves: Vec<OutageCurve>,
    pub trials: u64,
    /// Trials dropped because a solver failed on them.
    pub flagged_trials: u64,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Needs {
    direct: bool,
    maxmin: bool,
    gls: bool,
    fo: bool,
    bound: bool,
    lb_mc: bool,
}

/// Curves that are estimated from trials (the analytic lower bound is not).
fn sampled(exp: &Experiment, c: CurveId) -> bool {
    c != CurveId::MaCutLowerBound || !exp.means.is_uniform_unit()
}

impl Needs {
    fn of(exp: &Experiment) -> Self {
        let mut n = Needs::default();
        for &c in &exp.curves {
            match c {
                CurveId::Protocol(ProtocolId::Direct) => n.direct = true,
                CurveId::Protocol(ProtocolId::MaxMinSel) => n.maxmin = true,
                CurveId::Protocol(ProtocolId::Gls) => n.gls = true,
                CurveId::Protocol(ProtocolId::Fo) => n.fo = true,
                CurveId::Protocol(ProtocolId::CutSetBound) => n.bound = true,
                CurveId::MaCutLowerBound => n.lb_mc = sampled(exp, c),
            }
        }
        n.gls |= n.fo || n.bound;
        n
    }
}

/// Whether each protocol supports `rate` on one realization, indexed like
/// `Needs`.
#[derive(Debug, Clone, Copy, Default)]
struct Support {
    direct: bool,
    maxmin: bool,
    gls: bool,
    fo: bool,
    bound: bool,
    lb: bool,
}

impl Support {
    fn get(&self, c: CurveId) -> bool {
        match c {
            CurveId::Protocol(ProtocolId::Direct) => self.direct,
            CurveId::Protocol(ProtocolId::MaxMinSel) => self.maxmin,
            CurveId::Protocol(ProtocolId::Gls) => self.gls,
            CurveId::Protocol(ProtocolId::Fo) => self.fo,
            CurveId::Protocol(ProtocolId::CutSetBound) => self.bound,
            CurveId::MaCutLowerBound => self.lb,
        }
    }
}

fn destination_cut_supports(net: &NetworkInstance, rate: f64) -> bool {
    let d = net.destination();
    let sum: f64 = (0..d).map(|i| net.gain(i, d)).sum();
    cap(net.snr() * sum) >= rate
}

/// Evaluates every needed protocol at one point, using the dominance chain
/// to skip solver calls whose answer is already implied.
fn support_at(needs: &Needs, net: &NetworkInstance, rate: f64) -> Result<Support> {
    let quick = quick_upper_rate(net) >= rate;
    let mut s = Support {
        direct: net.direct_rate() >= rate,
        lb: needs.lb_mc && destination_cut_supports(net, rate),
        ..Support::default()
    };
    if needs.maxmin {
        s.maxmin = max_min_selection(net).rate >= rate;
    }
    if !quick {
        return Ok(s);
    }
    if needs.gls {
        s.gls = s.direct || gls(net)?.rate >= rate;
    }
    if needs.fo {
        s.fo = s.gls || fo_feasible(&FoProblem::new(net.clone())?, rate)?.is_some();
    }
    if needs.bound {
        s.bound = s.gls || s.fo || cutset_supports(net, rate)?;
    }
    Ok(s)
}

/// Smallest `k` in `lo..hi` with `pred(k)`, or `hi`; `pred` must be monotone.
fn first_supported(mut lo: usize, mut hi: usize, mut pred: impl FnMut(usize) -> Result<bool>) -> Result<usize> {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

struct Thresholds {
    direct: usize,
    maxmin: usize,
    gls: usize,
    fo: usize,
    bound: usize,
    lb: usize,
}

impl Thresholds {
    fn get(&self, c: CurveId) -> usize {
        match c {
            CurveId::Protocol(ProtocolId::Direct) => self.direct,
            CurveId::Protocol(ProtocolId::MaxMinSel) => self.maxmin,
            CurveId::Protocol(ProtocolId::Gls) => self.gls,
            CurveId::Protocol(ProtocolId::Fo) => self.fo,
            CurveId::Protocol(ProtocolId::CutSetBound) => self.bound,
            CurveId::MaCutLowerBound => self.lb,
        }
    }
}

/// First supporting grid index of every needed protocol for one fading draw.
fn thresholds(needs: &Needs, nets: &[NetworkInstance], rate: f64) -> Result<Thresholds> {
    let k = nets.len();
    let quick = first_supported(0, k, |i| Ok(quick_upper_rate(&nets[i]) >= rate))?;
    let direct = first_supported(quick, k, |i| Ok(nets[i].direct_rate() >= rate))?;
    let maxmin = if needs.maxmin {
        first_supported(0, k, |i| Ok(max_min_selection(&nets[i]).rate >= rate))?
    } else {
        k
    };
    let lb = if needs.lb_mc {
        first_supported(0, k, |i| Ok(destination_cut_supports(&nets[i], rate)))?
    } else {
        k
    };
    let gls_k = if needs.gls {
        first_supported(quick, direct, |i| Ok(gls(&nets[i])?.rate >= rate))?
    } else {
        direct
    };
    let fo = if needs.fo {
        first_supported(quick, gls_k, |i| {
            Ok(fo_feasible(&FoProblem::new(nets[i].clone())?, rate)?.is_some())
        })?
    } else {
        gls_k
    };
    let bound = if needs.bound {
        first_supported(quick, fo, |i| cutset_supports(&nets[i], rate))?
    } else {
        fo
    };
    Ok(Thresholds {
        direct,
        maxmin,
        gls: gls_k,
        fo,
        bound,
        lb,
    })
}

/// Standard exponential and mixture-selector uniform for every off-diagonal
/// link, row-major.
fn base_draws(n: usize, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    let mut v = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let e: f64 = rng.sample(Exp1);
                let u: f64 = rng.random();
                v.push((e, u));
            }
        }
    }
    v
}

/// Gains under the defensive mixture proposal and their likelihood ratio.
/// Links into the source or out of the destination never carry flow and are
/// drawn from their nominal law.
fn proposal_gains(
    exp: &Experiment,
    draws: &[(f64, f64)],
    snr: f64,
    rate: f64,
    mix: f64,
    tilt: f64,
) -> (GainMatrix, f64) {
    let n = exp.n_nodes();
    let means = exp.means.matrix();
    let theta = (tilt * rate.exp_m1() / snr).min(1.0);
    let mut g = GainMatrix::zeros(n);
    let mut log_w = 0.0;
    let mut it = draws.iter();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let &(e, u) = it.next().expect("one draw per link");
            let m = means.get(i, j);
            let used = i != n - 1 && j != 0;
            if !used || theta >= 1.0 {
                g.set(i, j, m * e);
                continue;
            }
            let z = if u < mix { m * theta * e } else { m * e };
            g.set(i, j, z);
            // f / g with f = Exp(m), g = mix Exp(m theta) + (1 - mix) Exp(m)
            let ratio = mix * (-(z / m) * (1.0 / theta - 1.0)).exp() / theta + (1.0 - mix);
            log_w -= ratio.ln();
        }
    }
    (g, log_w.exp())
}

struct Tally {
    outages: Vec<u64>,
    weight: Vec<f64>,
    weight_sq: Vec<f64>,
    flagged: u64,
    first_failure: Option<String>,
}

impl Tally {
    fn new(size: usize) -> Self {
        Tally {
            outages: vec![0; size],
            weight: vec![0.0; size],
            weight_sq: vec![0.0; size],
            flagged: 0,
            first_failure: None,
        }
    }

    fn merge(&mut self, other: Tally) {
        for (a, b) in self.outages.iter_mut().zip(other.outages) {
            *a += b;
        }
        for (a, b) in self.weight.iter_mut().zip(other.weight) {
            *a += b;
        }
        for (a, b) in self.weight_sq.iter_mut().zip(other.weight_sq) {
            *a += b;
        }
        self.flagged += other.flagged;
        if self.first_failure.is_none() {
            self.first_failure = other.first_failure;
        }
    }
}

struct Layout {
    curves: usize,
    points: usize,
}

impl Layout {
    fn idx(&self, target: usize, curve: usize, point: usize) -> usize {
        (target * self.curves + curve) * self.points + point
    }
}

/// Outcome of one trial: `(index, weight)` pairs of outage events.
fn run_trial(exp: &Experiment, needs: &Needs, layout: &Layout, snrs: &[f64], trial: u64) -> Result<Vec<(usize, f64)>> {
    let mut rng = RandomSource::new(exp.seed, trial).rng();
    let mut events = Vec::new();
    match exp.sampling {
        Sampling::Plain => {
            let gains = exp.means.sample(&mut rng);
            let nets: Vec<NetworkInstance> = snrs
                .iter()
                .map(|&s| NetworkInstance::new(gains.clone(), s))
                .collect::<Result<_>>()?;
            for (t, target) in exp.targets.iter().enumerate() {
                match *target {
                    OutageTarget::FixedRate(rate) => {
                        let th = thresholds(needs, &nets, rate)?;
                        for (c, &curve) in exp.curves.iter().enumerate() {
                            if sampled(exp, curve) {
                                for k in 0..th.get(curve) {
                                    events.push((layout.idx(t, c, k), 1.0));
                                }
                            }
                        }
                    }
                    OutageTarget::Multiplexing(_) => {
                        for (k, net) in nets.iter().enumerate() {
                            let s = support_at(needs, net, target.rate_nats(net.snr()))?;
                            for (c, &curve) in exp.curves.iter().enumerate() {
                                if sampled(exp, curve) && !s.get(curve) {
                                    events.push((layout.idx(t, c, k), 1.0));
                                }
                            }
                        }
                    }
                }
            }
        }
        Sampling::Importance { mix, tilt } => {
            let draws = base_draws(exp.n_nodes(), &mut rng);
            for (t, target) in exp.targets.iter().enumerate() {
                for (k, &snr) in snrs.iter().enumerate() {
                    let rate = target.rate_nats(snr);
                    let (gains, w) = proposal_gains(exp, &draws, snr, rate, mix, tilt);
                    let net = NetworkInstance::new(gains, snr)?;
                    let s = support_at(needs, &net, rate)?;
                    for (c, &curve) in exp.curves.iter().enumerate() {
                        if sampled(exp, curve) && !s.get(curve) {
                            events.push((layout.idx(t, c, k), w));
                        }
                    }
                }
            }
        }
    }
    Ok(events)
}

/// Errors when more than `budget` of the trials were flagged, or all were.
fn check_budget(flagged: u64, trials: u64, budget: f64) -> Result<()> {
    if flagged as f64 > budget * trials as f64 || flagged == trials {
        return Err(Error::FailureBudget {
            failed: flagged,
            evaluations: trials,
            budget,
        });
    }
    Ok(())
}

pub fn run_experiment(exp: &Experiment) -> Result<RunReport> {
    let needs = Needs::of(exp);
    let snrs: Vec<f64> = exp.snr_db.iter().map(|&d| db_to_linear(d)).collect();
    let layout = Layout {
        curves: exp.curves.len(),
        points: snrs.len(),
    };
    let size = exp.targets.len() * layout.curves * layout.points;
    let ranges = batches(exp.trials, exp.batch_size);
    let parts = map_batches(&ranges, exp.workers, |range| {
        let mut tally = Tally::new(size);
        for trial in range {
            match run_trial(exp, &needs, &layout, &snrs, trial) {
                Ok(events) => {
                    for (i, w) in events {
                        tally.outages[i] += 1;
                        tally.weight[i] += w;
                        tally.weight_sq[i] += w * w;
                    }
                }
                Err(e) => {
                    tally.flagged += 1;
                    if tally.first_failure.is_none() {
                        tally.first_failure = Some(format!("trial {trial}: {e}"));
                    }
                }
            }
        }
        tally
    })?;
    let mut total = Tally::new(size);
    for p in parts {
        total.merge(p);
    }
    check_budget(total.flagged, exp.trials, exp.failure_budget)?;
    let used = exp.trials - total.flagged;
    let mut curves = Vec::new();
    for (t, target) in exp.targets.iter().enumerate() {
        for (c, &curve) in exp.curves.iter().enumerate() {
            let mut points = Vec::with_capacity(snrs.len());
            for (k, (&snr, &snr_db)) in snrs.iter().zip(&exp.snr_db).enumerate() {
                let rate_bits = nats_to_bits(target.rate_nats(snr));
                if !sampled(exp, curve) {
                    let p = ma_cut_outage_lower(exp.n_nodes(), *target, snr)?;
                    points.push(OutagePoint {
                        snr_db,
                        rate_bits,
                        trials: 0,
                        outages: 0,
                        p_hat: p,
                        ci_lo: p,
                        ci_hi: p,
                    });
                    continue;
                }
                let i = layout.idx(t, c, k);
                let outages = total.outages[i];
                let (p_hat, ci_lo, ci_hi) = match exp.sampling {
                    Sampling::Plain => {
                        let (lo, hi) = wilson_interval(outages, used);
                        (outages as f64 / used as f64, lo, hi)
                    }
                    Sampling::Importance { .. } => {
                        let n = used as f64;
                        let p = total.weight[i] / n;
                        if outages == 0 {
                            (0.0, 0.0, wilson_interval(0, used).1)
                        } else {
                            let var = ((total.weight_sq[i] / n - p * p) / n).max(0.0);
                            let half = WILSON_Z * var.sqrt();
                            (p, (p - half).max(0.0), (p + half).min(1.0))
                        }
                    }
                };
                points.push(OutagePoint {
                    snr_db,
                    rate_bits,
                    trials: used,
                    outages,
                    p_hat,
                    ci_lo,
                    ci_hi,
                });
            }
            curves.push(OutageCurve { curve, points });
        }
    }
    Ok(RunReport {
        curves,
        trials: exp.trials,
        flagged_trials: total.flagged,
        first_failure: total.first_failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn failure_budget() {
        assert!(check_budget(0, 1000, 1e-3).is_ok());
        assert!(check_budget(1, 1000, 1e-3).is_ok());
        assert!(matches!(check_budget(2, 1000, 1e-3), Err(Error::FailureBudget { failed: 2, .. })));
        assert!(check_budget(5, 5, 1.0).is_err());
        assert!(check_budget(1, 1000, 0.0).is_err());
    }

    #[test]
    fn bisection_finds_first_true() {
        let v = [false, false, true, true];
        assert_eq!(first_supported(0, 4, |i| Ok(v[i])).unwrap(), 2);
        assert_eq!(first_supported(3, 4, |i| Ok(v[i])).unwrap(), 3);
        assert_eq!(first_supported(0, 2, |i| Ok(v[i])).unwrap(), 2);
        let none = [false; 3];
        assert_eq!(first_supported(0, 3, |i| Ok(none[i])).unwrap(), 3);
    }

    #[test]
    fn proposal_weight_is_one_without_tilt() {
        let exp = Experiment::parse(
            r#"{"network": {"gains": "uniform", "n_nodes": 4}, "protocols": ["direct"],
                "rates_bits": [1.0], "snr_db": [0.0], "trials": 1}"#,
            Path::new("x.json"),
        )
        .unwrap();
        let mut rng = RandomSource::new(1, 0).rng();
        let draws = base_draws(4, &mut rng);
        let (_, w) = proposal_gains(&exp, &draws, 1e-3, 1.0, 0.5, 2.0);
        assert_eq!(w, 1.0);
        let (g, w) = proposal_gains(&exp, &draws, 1e4, 1.0, 0.5, 2.0);
        assert!(w > 0.0 && w <= 2f64.powi(7) + 1e-9);
        assert!(g.get(3, 0) > 0.0);
    }
}
