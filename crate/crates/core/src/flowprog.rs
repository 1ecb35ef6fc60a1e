//! Assembly of the slotted max-min flow program shared by the FO solver and
//! the cut-set bound.
//!
//! Variables are one length per slot, one flow per usable link per slot, and
//! the epigraph variable `s` that is maximized subject to `s <= x(C)` for each
//! objective cut.

use std::collections::VecDeque;

use crate::barrier::{self, LinearRow, Options, PerspectiveLse, Program, Solution};
use crate::error::Result;
use crate::flowgraph::{enumerate_cuts, Cut, SlotKind, SlotSchedule};
use crate::netmodel::{cap, NetworkInstance};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SlotModel {
    /// Degraded Gaussian broadcast from `hub`.
    Bc { hub: usize, peers: Vec<usize> },
    /// Gaussian multiple access into `hub`.
    Ma { hub: usize, peers: Vec<usize> },
    /// Several transmitters and receivers at once, limited only by the
    /// sum-SNR capacity of every cut.
    CutSet { tx: Vec<usize>, rx: Vec<usize> },
}

impl SlotModel {
    fn links(&self) -> Vec<(usize, usize)> {
        match self {
            SlotModel::Bc { hub, peers } => peers.iter().map(|&p| (*hub, p)).collect(),
            SlotModel::Ma { hub, peers } => peers.iter().map(|&p| (p, *hub)).collect(),
            SlotModel::CutSet { tx, rx } => tx
                .iter()
                .flat_map(|&a| rx.iter().filter(move |&&b| b != a).map(move |&b| (a, b)))
                .collect(),
        }
    }

    pub(crate) fn from_schedule(schedule: &SlotSchedule) -> Vec<SlotModel> {
        schedule
            .slots
            .iter()
            .map(|s| match s.kind {
                SlotKind::Bc => SlotModel::Bc {
                    hub: s.hub,
                    peers: s.peers.clone(),
                },
                SlotKind::Ma => SlotModel::Ma {
                    hub: s.hub,
                    peers: s.peers.clone(),
                },
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ObjectiveCuts {
    /// `{S}` and `V \ {D}` only.
    Reduced,
    /// All `2^{N-2}` cuts.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LinkVar {
    pub from: usize,
    pub to: usize,
    pub var: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct FlowProgram {
    pub program: Program,
    pub n_nodes: usize,
    pub time_vars: Vec<usize>,
    /// Usable links of each slot with their variable index.
    pub links: Vec<Vec<LinkVar>>,
    pub start: Vec<f64>,
    pub objective_cuts: Vec<Cut>,
}

/// Nodes reachable from `from` (forward) or reaching `from` (backward) over
/// the directed pairs in `adj`.
fn reach(adj: &[Vec<bool>], from: usize, forward: bool) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut parent = vec![None; n];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            let edge = if forward { adj[u][v] } else { adj[v][u] };
            if edge && !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    (seen, parent)
}

impl FlowProgram {
    pub(crate) fn n_flow_vars(&self) -> usize {
        self.links.iter().map(Vec::len).sum()
    }

    pub(crate) fn build(net: &NetworkInstance, slots: &[SlotModel], cuts: ObjectiveCuts) -> Result<Self> {
        let n = net.n_nodes();
        let (src, dst) = (net.source(), net.destination());
        let snr = net.snr();
        let z = |a: usize, b: usize| net.gain(a, b);

        let mut adj = vec![vec![false; n]; n];
        for slot in slots {
            for (a, b) in slot.links() {
                if z(a, b) > 0.0 {
                    adj[a][b] = true;
                }
            }
        }
        let (from_src, fwd_parent) = reach(&adj, src, true);
        let (to_dst, bwd_parent) = reach(&adj, dst, false);
        let usable = |a: usize, b: usize| z(a, b) > 0.0 && from_src[a] && to_dst[b];

        let mut next = 0;
        let time_vars: Vec<usize> = (0..slots.len())
            .map(|_| {
                next += 1;
                next - 1
            })
            .collect();
        let mut links = Vec::with_capacity(slots.len());
        for slot in slots {
            let mut v = Vec::new();
            for (a, b) in slot.links() {
                if usable(a, b) {
                    v.push(LinkVar { from: a, to: b, var: next });
                    next += 1;
                }
            }
            links.push(v);
        }
        let s_var = next;
        let mut p = Program::new(next + 1);
        p.cost[s_var] = -1.0;

        for &t in &time_vars {
            p.inequalities.push(LinearRow::new(vec![(t, -1.0)], 0.0));
        }
        for l in links.iter().flatten() {
            p.inequalities.push(LinearRow::new(vec![(l.var, -1.0)], 0.0));
        }
        p.equalities
            .push(LinearRow::new(time_vars.iter().map(|&t| (t, 1.0)).collect(), 1.0));
        for r in net.relays() {
            let mut row = Vec::new();
            for l in links.iter().flatten() {
                if l.from == r {
                    row.push((l.var, 1.0));
                } else if l.to == r {
                    row.push((l.var, -1.0));
                }
            }
            if !row.is_empty() {
                p.equalities.push(LinearRow::new(row, 0.0));
            }
        }

        let all_cuts = enumerate_cuts(n)?;
        for (i, slot) in slots.iter().enumerate() {
            let t = time_vars[i];
            let lv = &links[i];
            if lv.is_empty() {
                continue;
            }
            match slot {
                SlotModel::Bc { hub, .. } => {
                    let mut rx: Vec<(f64, usize)> = lv.iter().map(|l| (z(*hub, l.to), l.var)).collect();
                    if rx.len() == 1 {
                        let (g, var) = rx[0];
                        p.inequalities.push(LinearRow::new(vec![(var, 1.0), (t, -cap(g * snr))], 0.0));
                        continue;
                    }
                    rx.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let mut terms = Vec::new();
                    for k in 0..rx.len() {
                        let inv_next = if k + 1 < rx.len() { 1.0 / rx[k + 1].0 } else { 0.0 };
                        let w = 1.0 / rx[k].0 - inv_next;
                        if w > 0.0 {
                            terms.push((w.ln(), k + 1));
                        }
                    }
                    p.lse.push(PerspectiveLse {
                        time: t,
                        flows: rx.iter().map(|r| r.1).collect(),
                        terms,
                        log_budget: (snr + 1.0 / rx[0].0).ln(),
                    });
                }
                SlotModel::Ma { hub, .. } => {
                    let k = lv.len();
                    for mask in 1u32..(1u32 << k) {
                        let mut row = Vec::new();
                        let mut gain = 0.0;
                        for (j, l) in lv.iter().enumerate() {
                            if mask >> j & 1 == 1 {
                                row.push((l.var, 1.0));
                                gain += z(l.from, *hub);
                            }
                        }
                        row.push((t, -cap(gain * snr)));
                        p.inequalities.push(LinearRow::new(row, 0.0));
                    }
                }
                SlotModel::CutSet { tx, rx } => {
                    for cut in &all_cuts {
                        let mut row: Vec<(usize, f64)> = lv
                            .iter()
                            .filter(|l| cut.crosses(l.from, l.to))
                            .map(|l| (l.var, 1.0))
                            .collect();
                        if row.is_empty() {
                            continue;
                        }
                        let mut gain = 0.0;
                        for &a in tx.iter().filter(|&&a| cut.on_source_side(a)) {
                            for &b in rx.iter().filter(|&&b| b != a && !cut.on_source_side(b)) {
                                gain += z(a, b);
                            }
                        }
                        row.push((t, -cap(gain * snr)));
                        p.inequalities.push(LinearRow::new(row, 0.0));
                    }
                }
            }
        }

        let objective_cuts = match cuts {
            ObjectiveCuts::Reduced => vec![Cut::source_only(), Cut::all_but_destination(n)],
            ObjectiveCuts::Full => all_cuts,
        };
        for cut in &objective_cuts {
            let mut row: Vec<(usize, f64)> = links
                .iter()
                .flatten()
                .filter(|l| cut.crosses(l.from, l.to))
                .map(|l| (l.var, -1.0))
                .collect();
            row.push((s_var, 1.0));
            p.inequalities.push(LinearRow::new(row, 0.0));
        }

        // Strict start: equal slot lengths and a small conserving flow made of
        // one source-to-destination walk through every usable link.
        let mut visits = vec![0.0; p.n_vars];
        let mut first_var = vec![vec![None; n]; n];
        for l in links.iter().flatten() {
            first_var[l.from][l.to].get_or_insert(l.var);
        }
        let pair_var = |a: usize, b: usize| first_var[a][b].expect("walk uses usable pairs only");
        for l in links.iter().flatten() {
            visits[l.var] += 1.0;
            let mut v = l.from;
            while let Some(u) = fwd_parent[v] {
                visits[pair_var(u, v)] += 1.0;
                v = u;
            }
            let mut v = l.to;
            while let Some(w) = bwd_parent[v] {
                visits[pair_var(v, w)] += 1.0;
                v = w;
            }
        }
        let mut start = vec![0.0; p.n_vars];
        for &t in &time_vars {
            start[t] = 1.0 / slots.len() as f64;
        }
        let mut eps = 1e-2;
        let mut fp = FlowProgram {
            program: p,
            n_nodes: n,
            time_vars,
            links,
            start: Vec::new(),
            objective_cuts,
        };
        for _ in 0..60 {
            for l in fp.links.iter().flatten() {
                start[l.var] = eps * visits[l.var];
            }
            start[s_var] = 0.0;
            start[s_var] = fp.min_objective_cut(&start) - 1.0;
            if fp.program.max_inequality(&start) < 0.0 {
                break;
            }
            eps *= 0.5;
        }
        fp.start = start;
        Ok(fp)
    }

    pub(crate) fn min_objective_cut(&self, z: &[f64]) -> f64 {
        self.objective_cuts
            .iter()
            .map(|c| {
                self.links
                    .iter()
                    .flatten()
                    .filter(|l| c.crosses(l.from, l.to))
                    .map(|l| z[l.var])
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn solve(&self, opts: &Options) -> Result<Solution> {
        barrier::solve(&self.program, &self.start, opts)
    }

    /// Slot lengths and per-slot flows of an iterate after degenerate-slot
    /// cleanup: slots shorter than `min_len` are emptied and their time is
    /// given to the longest slot; the lengths are renormalized to sum to 1.
    pub(crate) fn cleaned(&self, z: &[f64], min_len: f64) -> (Vec<f64>, Vec<Vec<(usize, usize, f64)>>) {
        let mut t: Vec<f64> = self.time_vars.iter().map(|&i| z[i].max(0.0)).collect();
        let mut flows: Vec<Vec<(usize, usize, f64)>> = self
            .links
            .iter()
            .map(|lv| lv.iter().map(|l| (l.from, l.to, z[l.var].max(0.0))).collect())
            .collect();
        let longest = (0..t.len()).fold(0, |b, i| if t[i] > t[b] { i } else { b });
        let mut freed = 0.0;
        for i in 0..t.len() {
            if i != longest && t[i] < min_len {
                freed += t[i];
                t[i] = 0.0;
                for f in &mut flows[i] {
                    f.2 = 0.0;
                }
            }
        }
        t[longest] += freed;
        // absorb the rounding left by the barrier's equality residual
        let excess = t.iter().sum::<f64>() - 1.0;
        t[longest] -= excess;
        (t, flows)
    }
}
