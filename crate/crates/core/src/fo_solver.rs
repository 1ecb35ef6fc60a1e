//! Flow-optimized (FO) relaying: the best end-to-end rate over all slot
//! lengths and per-slot flows of the `2N - 2` slot template.
//!
//! The max-min program is solved directly in epigraph form by the barrier
//! engine. With conservation imposed, the minimum over all cuts equals the
//! minimum over `{S}` and `V \ {D}`, so the default [`CutMode::Reduced`] uses
//! only those two; [`CutMode::Full`] keeps every cut for cross-checking.

use serde::Serialize;
use serde_json::{json, Value};

use crate::barrier::{Options, Solution, Status};
use crate::capregion::{bc_min_snr, ma_max_violation, BcDemand, MaDemand};
use crate::error::{Error, Result};
use crate::flowgraph::{
    conservation_residuals, min_cut_value, reduced_min_cut, FlowAllocation, SlotKind, SlotSchedule, CONSERVATION_TOL,
    TOTAL_TIME_TOL,
};
use crate::flowprog::{FlowProgram, ObjectiveCuts, SlotModel};
use crate::netmodel::{cap, NetworkInstance, MAX_NODES};

/// Largest network accepted with every cut in the objective.
pub const MAX_NODES_FULL_CUTS: usize = 6;

/// Slots shorter than this are emptied before the witness is reported.
pub const MIN_SLOT_LENGTH: f64 = 1e-9;

/// Constraint slack accepted by [`validate_fo_witness`].
pub const WITNESS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CutMode {
    Reduced,
    Full,
}

#[derive(Debug, Clone)]
pub struct FoProblem {
    network: NetworkInstance,
    schedule: SlotSchedule,
    cut_mode: CutMode,
}

impl FoProblem {
    pub fn new(network: NetworkInstance) -> Result<Self> {
        let n = network.n_nodes();
        if n > MAX_NODES {
            return Err(Error::Config(format!("FO is limited to {MAX_NODES} nodes, got {n}")));
        }
        let schedule = SlotSchedule::canonical(n)?;
        Ok(FoProblem {
            network,
            schedule,
            cut_mode: CutMode::Reduced,
        })
    }

    pub fn with_cut_mode(mut self, mode: CutMode) -> Result<Self> {
        if mode == CutMode::Full && self.network.n_nodes() > MAX_NODES_FULL_CUTS {
            return Err(Error::Config(format!(
                "full cut enumeration is limited to {MAX_NODES_FULL_CUTS} nodes"
            )));
        }
        self.cut_mode = mode;
        Ok(self)
    }

    /// Replaces the slot template (lengths are ignored).
    pub fn with_schedule(mut self, schedule: SlotSchedule) -> Result<Self> {
        if schedule.n_nodes != self.network.n_nodes() {
            return Err(Error::Config("schedule and network disagree on node count".into()));
        }
        self.schedule = schedule;
        Ok(self)
    }

    pub fn network(&self) -> &NetworkInstance {
        &self.network
    }

    pub fn schedule(&self) -> &SlotSchedule {
        &self.schedule
    }

    pub fn cut_mode(&self) -> CutMode {
        self.cut_mode
    }

    fn program(&self) -> Result<FlowProgram> {
        let cuts = match self.cut_mode {
            CutMode::Reduced => ObjectiveCuts::Reduced,
            CutMode::Full => ObjectiveCuts::Full,
        };
        FlowProgram::build(&self.network, &SlotModel::from_schedule(&self.schedule), cuts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    /// Newton decrement at the last centering step.
    pub kkt_residual: f64,
    pub equality_residual: f64,
    /// Bound on the distance of the barrier objective from the optimum.
    pub gap_bound: f64,
    pub inexact: bool,
    /// Total flow carried between relays, summed over links and slots.
    pub inter_relay_flow: f64,
}

#[derive(Debug, Clone)]
pub struct RateResult {
    /// Nats per channel use.
    pub rate: f64,
    pub flows: FlowAllocation,
    pub diagnostics: SolverDiagnostics,
}

impl RateResult {
    pub fn schedule(&self) -> &SlotSchedule {
        self.flows.schedule()
    }
}

/// Upper bound `min{C(S sum_j Z_Sj), C(S sum_i Z_iD)}` on any slotted rate.
pub fn quick_upper_rate(net: &NetworkInstance) -> f64 {
    let n = net.n_nodes();
    let (src, dst) = (net.source(), net.destination());
    let out: f64 = (1..n).map(|j| net.gain(src, j)).sum();
    let inn: f64 = (0..dst).map(|i| net.gain(i, dst)).sum();
    cap(net.snr() * out).min(cap(net.snr() * inn))
}

fn equal_lengths(schedule: &SlotSchedule) -> SlotSchedule {
    let mut s = schedule.clone();
    let k = s.slots.len();
    s.set_lengths(&vec![1.0 / k as f64; k]);
    s
}

fn witness(problem: &FoProblem, fp: &FlowProgram, z: &[f64]) -> Result<FlowAllocation> {
    let (lengths, flows) = fp.cleaned(z, MIN_SLOT_LENGTH);
    let mut schedule = problem.schedule.clone();
    schedule.set_lengths(&lengths);
    let mut alloc = FlowAllocation::zeros(schedule);
    for (i, slot) in flows.iter().enumerate() {
        for &(a, b, x) in slot {
            alloc.set(i, a, b, x)?;
        }
    }
    Ok(alloc)
}

fn inter_relay_flow(alloc: &FlowAllocation) -> f64 {
    let dst = alloc.n_nodes() - 1;
    alloc
        .iter()
        .filter(|&(_, a, b, _)| a != 0 && b != dst)
        .map(|(_, _, _, x)| x)
        .sum()
}

fn witness_rate(problem: &FoProblem, alloc: &FlowAllocation) -> Result<f64> {
    match problem.cut_mode {
        CutMode::Reduced => reduced_min_cut(alloc),
        CutMode::Full => Ok(min_cut_value(alloc)),
    }
}

fn finish(problem: &FoProblem, fp: &FlowProgram, sol: &Solution) -> Result<RateResult> {
    let flows = witness(problem, fp, &sol.z)?;
    let rate = witness_rate(problem, &flows)?;
    Ok(RateResult {
        rate,
        diagnostics: SolverDiagnostics {
            iterations: sol.iterations,
            kkt_residual: sol.newton_decrement,
            equality_residual: sol.equality_residual,
            gap_bound: sol.gap_bound,
            inexact: sol.inexact,
            inter_relay_flow: inter_relay_flow(&flows),
        },
        flows,
    })
}

fn zero_result(problem: &FoProblem) -> RateResult {
    RateResult {
        rate: 0.0,
        flows: FlowAllocation::zeros(equal_lengths(&problem.schedule)),
        diagnostics: SolverDiagnostics {
            iterations: 0,
            kkt_residual: 0.0,
            equality_residual: 0.0,
            gap_bound: 0.0,
            inexact: false,
            inter_relay_flow: 0.0,
        },
    }
}

/// Maximum FO rate with its attaining schedule and flows.
pub fn solve_fo(problem: &FoProblem) -> Result<RateResult> {
    let fp = problem.program()?;
    if fp.n_flow_vars() == 0 {
        return Ok(zero_result(problem));
    }
    let sol = fp.solve(&Options::default())?;
    finish(problem, &fp, &sol)
}

/// [`solve_fo`] with every source/destination cut in the objective.
pub fn solve_fo_fullcuts(network: &NetworkInstance) -> Result<RateResult> {
    solve_fo(&FoProblem::new(network.clone())?.with_cut_mode(CutMode::Full)?)
}

/// Whether rate `target` (nats) is achievable; returns a witness allocation
/// with both objective cuts carrying at least `target` when it is.
pub fn fo_feasible(problem: &FoProblem, target: f64) -> Result<Option<FlowAllocation>> {
    if !(target >= 0.0) {
        return Err(Error::Domain(format!("target rate {target} must be nonnegative")));
    }
    if target == 0.0 {
        return Ok(Some(FlowAllocation::zeros(equal_lengths(&problem.schedule))));
    }
    if target > quick_upper_rate(&problem.network) {
        return Ok(None);
    }
    let fp = problem.program()?;
    if fp.n_flow_vars() == 0 {
        return Ok(None);
    }
    let opts = Options {
        target: Some(-target),
        ..Options::default()
    };
    let sol = fp.solve(&opts)?;
    if sol.status == Status::TargetUnreachable {
        return Ok(None);
    }
    let w = witness(problem, &fp, &sol.z)?;
    Ok((witness_rate(problem, &w)? >= target).then_some(w))
}

/// Outcome of the independent witness check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub total_time_error: f64,
    pub max_conservation_residual: f64,
    /// Largest `bc_min_snr / S - 1` over broadcast slots.
    pub max_bc_excess: f64,
    pub max_ma_violation: f64,
    pub min_flow: f64,
}

impl WitnessReport {
    pub fn is_valid(&self) -> bool {
        self.total_time_error <= TOTAL_TIME_TOL
            && self.max_conservation_residual <= CONSERVATION_TOL
            && self.max_bc_excess <= WITNESS_TOL
            && self.max_ma_violation <= WITNESS_TOL
            && self.min_flow >= 0.0
    }
}

/// Re-checks every constraint family on an allocation using only the
/// capacity-region and flow-graph primitives.
pub fn validate_fo_witness(net: &NetworkInstance, alloc: &FlowAllocation) -> Result<WitnessReport> {
    let sched = alloc.schedule();
    if sched.n_nodes != net.n_nodes() {
        return Err(Error::Contract("allocation and network disagree on node count".into()));
    }
    let mut report = WitnessReport {
        total_time_error: (sched.total_length() - 1.0).abs(),
        max_conservation_residual: conservation_residuals(alloc).iter().fold(0.0, |m, r| m.max(r.abs())),
        max_bc_excess: f64::NEG_INFINITY,
        max_ma_violation: f64::NEG_INFINITY,
        min_flow: alloc.iter().map(|f| f.3).fold(f64::INFINITY, f64::min),
    };
    if sched.slots.iter().any(|s| s.length < 0.0) {
        report.total_time_error = f64::INFINITY;
    }
    for (i, slot) in sched.slots.iter().enumerate() {
        let pairs: Vec<(usize, f64)> = slot.peers.iter().copied().zip(alloc.slot_flows(i).iter().copied()).collect();
        match slot.kind {
            SlotKind::Bc => {
                let d = BcDemand {
                    tx: slot.hub,
                    targets: pairs,
                    slot_length: slot.length,
                };
                let excess = match bc_min_snr(&d, net.gains()) {
                    Ok(s) => s / net.snr() - 1.0,
                    Err(Error::Infeasible(_)) => f64::INFINITY,
                    Err(e) => return Err(e),
                };
                report.max_bc_excess = report.max_bc_excess.max(excess);
            }
            SlotKind::Ma => {
                let d = MaDemand {
                    rx: slot.hub,
                    sources: pairs,
                    slot_length: slot.length,
                };
                report.max_ma_violation = report.max_ma_violation.max(ma_max_violation(&d, net.gains(), net.snr()));
            }
        }
    }
    Ok(report)
}

/// JSON dump of the assembled program, the barrier solution (constraint
/// values and multipliers) and the witness flows.
pub fn dump_program(problem: &FoProblem) -> Result<Value> {
    let fp = problem.program()?;
    let sol = fp.solve(&Options::default())?;
    let result = finish(problem, &fp, &sol)?;
    let linear_values: Vec<f64> = fp.program.inequalities.iter().map(|r| r.dot(&sol.z) - r.rhs).collect();
    let lse_values: Vec<f64> = fp.program.lse.iter().map(|c| c.value(&sol.z)).collect();
    Ok(json!({
        "n_nodes": fp.n_nodes,
        "cut_mode": problem.cut_mode,
        "program": fp.program,
        "solution": sol,
        "linear_values": linear_values,
        "lse_values": lse_values,
        "rate": result.rate,
        "diagnostics": result.diagnostics,
        "witness": result.flows.to_json(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::GainMatrix;

    fn problem(g: GainMatrix, snr: f64) -> FoProblem {
        FoProblem::new(NetworkInstance::new(g, snr).unwrap()).unwrap()
    }

    #[test]
    fn direct_only_network() {
        let mut g = GainMatrix::zeros(4);
        g.set(0, 3, 1.3);
        let r = solve_fo(&problem(g, 10.0)).unwrap();
        assert!((r.rate - cap(13.0)).abs() < 1e-6, "{}", r.rate);
    }

    #[test]
    fn zero_network() {
        let r = solve_fo(&problem(GainMatrix::zeros(4), 10.0)).unwrap();
        assert_eq!(r.rate, 0.0);
        let r = solve_fo_fullcuts(&NetworkInstance::new(GainMatrix::zeros(5), 3.0).unwrap()).unwrap();
        assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn witness_is_valid() {
        // equal gains: no slot moves more than C(S) out of the source
        let r = solve_fo(&problem(GainMatrix::uniform(4, 1.0), 10.0)).unwrap();
        assert!((r.rate - cap(10.0)).abs() < 1e-5, "{}", r.rate);

        let mut g = GainMatrix::uniform(4, 4.0);
        g.set(0, 3, 1.0);
        g.set(3, 0, 1.0);
        let net = NetworkInstance::new(g.clone(), 10.0).unwrap();
        let r = solve_fo(&problem(g, 10.0)).unwrap();
        let rep = validate_fo_witness(&net, &r.flows).unwrap();
        assert!(rep.is_valid(), "{rep:?}");
        assert!(r.rate > cap(10.0) + 0.1, "{}", r.rate);
        assert!(r.rate <= quick_upper_rate(&net));
    }

    #[test]
    fn feasibility_edges() {
        let p = problem(GainMatrix::uniform(4, 1.0), 10.0);
        assert!(fo_feasible(&p, 0.0).unwrap().is_some());
        assert!(fo_feasible(&p, -1.0).is_err());
        let over = cap(30.0) + 1e-6;
        assert!(fo_feasible(&p, over).unwrap().is_none());
        let best = solve_fo(&p).unwrap().rate;
        assert!(fo_feasible(&p, best * 0.999).unwrap().is_some());
        assert!(fo_feasible(&p, best * 1.001).unwrap().is_none());
    }

    #[test]
    fn size_limits() {
        let net = NetworkInstance::new(GainMatrix::uniform(9, 1.0), 1.0).unwrap();
        assert!(FoProblem::new(net).is_err());
        let net = NetworkInstance::new(GainMatrix::uniform(7, 1.0), 1.0).unwrap();
        assert!(FoProblem::new(net).unwrap().with_cut_mode(CutMode::Full).is_err());
    }
}
