//! Slot schedules, per-slot flow allocations and cut bookkeeping.
//!
//! Each slot is a star ("basic graph"): a broadcast (BC) slot has one
//! transmitting hub and several receiving peers, a multiple-access (MA) slot
//! has one receiving hub and several transmitting peers. Time-sharing the
//! slots over a unit interval gives the equivalent graph whose link flows are
//! the per-slot flows summed.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Absolute tolerance on relay flow conservation.
pub const CONSERVATION_TOL: f64 = 1e-7;

/// Tolerance on the total-time constraint.
pub const TOTAL_TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    #[serde(rename = "BC")]
    Bc,
    #[serde(rename = "MA")]
    Ma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDescriptor {
    pub kind: SlotKind,
    /// Transmitter of a BC slot, receiver of an MA slot.
    pub hub: usize,
    pub peers: Vec<usize>,
    pub length: f64,
}

impl SlotDescriptor {
    /// Builds a slot and checks the half-duplex slot rules for an
    /// `n_nodes` network.
    pub fn new(kind: SlotKind, hub: usize, peers: Vec<usize>, length: f64, n_nodes: usize) -> Result<Self> {
        let slot = SlotDescriptor { kind, hub, peers, length };
        slot.validate(n_nodes)?;
        Ok(slot)
    }

    fn validate(&self, n: usize) -> Result<()> {
        let dest = n - 1;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.hub >= n {
            return bad(format!("hub {} outside a {n}-node network", self.hub));
        }
        if self.peers.is_empty() {
            return bad("slot has no peers".into());
        }
        let mut seen = vec![false; n];
        for &p in &self.peers {
            if p >= n || p == self.hub || seen[p] {
                return bad(format!("invalid peer {p} for hub {}", self.hub));
            }
            seen[p] = true;
            let allowed = match (self.kind, self.hub) {
                (SlotKind::Bc, 0) => true,
                (SlotKind::Bc, h) if h == dest => false,
                (SlotKind::Bc, _) => p != 0,
                (SlotKind::Ma, 0) => false,
                (SlotKind::Ma, h) if h == dest => true,
                (SlotKind::Ma, _) => p != dest,
            };
            if !allowed {
                return bad(format!("{:?} slot with hub {} may not include node {p}", self.kind, self.hub));
            }
        }
        if !(self.length >= 0.0 && self.length.is_finite()) {
            return bad(format!("slot length {} must be nonnegative", self.length));
        }
        Ok(())
    }

    /// Directed link `(from, to)` between the hub and its `k`-th peer.
    #[inline]
    pub fn link(&self, k: usize) -> (usize, usize) {
        match self.kind {
            SlotKind::Bc => (self.hub, self.peers[k]),
            SlotKind::Ma => (self.peers[k], self.hub),
        }
    }

    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.peers.len()).map(|k| self.link(k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSchedule {
    pub n_nodes: usize,
    pub slots: Vec<SlotDescriptor>,
}

impl SlotSchedule {
    pub fn new(n_nodes: usize, slots: Vec<SlotDescriptor>) -> Result<Self> {
        if n_nodes < 3 {
            return Err(Error::Config(format!("need at least 3 nodes, got {n_nodes}")));
        }
        if slots.len() > 2 * n_nodes - 2 {
            return Err(Error::Config(format!(
                "{} slots exceed the 2N-2 = {} maximum",
                slots.len(),
                2 * n_nodes - 2
            )));
        }
        for s in &slots {
            s.validate(n_nodes)?;
        }
        Ok(SlotSchedule { n_nodes, slots })
    }

    /// The `2N - 2` slot template: source BC; then for each relay in index
    /// order its MA-receive slot followed by its BC slot; destination MA last.
    /// All lengths are zero.
    pub fn canonical(n_nodes: usize) -> Result<Self> {
        if n_nodes < 3 {
            return Err(Error::Config(format!("need at least 3 nodes, got {n_nodes}")));
        }
        let dest = n_nodes - 1;
        let relays: Vec<usize> = (1..dest).collect();
        let mut slots = vec![SlotDescriptor {
            kind: SlotKind::Bc,
            hub: 0,
            peers: (1..n_nodes).collect(),
            length: 0.0,
        }];
        for &r in &relays {
            let mut from = vec![0];
            from.extend(relays.iter().copied().filter(|&q| q != r));
            slots.push(SlotDescriptor {
                kind: SlotKind::Ma,
                hub: r,
                peers: from,
                length: 0.0,
            });
            let mut to: Vec<usize> = relays.iter().copied().filter(|&q| q != r).collect();
            to.push(dest);
            slots.push(SlotDescriptor {
                kind: SlotKind::Bc,
                hub: r,
                peers: to,
                length: 0.0,
            });
        }
        slots.push(SlotDescriptor {
            kind: SlotKind::Ma,
            hub: dest,
            peers: (0..dest).collect(),
            length: 0.0,
        });
        Self::new(n_nodes, slots)
    }

    pub fn total_length(&self) -> f64 {
        self.slots.iter().map(|s| s.length).sum()
    }

    /// Checks the total-time constraint.
    pub fn check_lengths(&self) -> Result<()> {
        if self.slots.iter().any(|s| s.length < 0.0) {
            return Err(Error::Contract("negative slot length".into()));
        }
        let total = self.total_length();
        if (total - 1.0).abs() > TOTAL_TIME_TOL {
            return Err(Error::Contract(format!("slot lengths sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn set_lengths(&mut self, lengths: &[f64]) {
        for (s, &t) in self.slots.iter_mut().zip(lengths) {
            s.length = t;
        }
    }
}

/// Per-slot link flows `x_AB^i`, aligned with each slot's peer list.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAllocation {
    schedule: SlotSchedule,
    flows: Vec<Vec<f64>>,
}

impl FlowAllocation {
    pub fn zeros(schedule: SlotSchedule) -> Self {
        let flows = schedule.slots.iter().map(|s| vec![0.0; s.peers.len()]).collect();
        FlowAllocation { schedule, flows }
    }

    pub fn schedule(&self) -> &SlotSchedule {
        &self.schedule
    }

    pub fn schedule_mut(&mut self) -> &mut SlotSchedule {
        &mut self.schedule
    }

    pub fn n_nodes(&self) -> usize {
        self.schedule.n_nodes
    }

    fn position(&self, slot: usize, from: usize, to: usize) -> Option<usize> {
        let s = self.schedule.slots.get(slot)?;
        (0..s.peers.len()).find(|&k| s.link(k) == (from, to))
    }

    /// Sets the flow on `from -> to` during `slot`. The link must belong to
    /// the slot's star and the value must be nonnegative.
    pub fn set(&mut self, slot: usize, from: usize, to: usize, value: f64) -> Result<()> {
        if !(value >= 0.0) {
            return Err(Error::Domain(format!("flow {value} must be nonnegative")));
        }
        let k = self
            .position(slot, from, to)
            .ok_or_else(|| Error::Config(format!("link {from}->{to} is not part of slot {slot}")))?;
        self.flows[slot][k] = value;
        Ok(())
    }

    pub fn get(&self, slot: usize, from: usize, to: usize) -> f64 {
        self.position(slot, from, to).map_or(0.0, |k| self.flows[slot][k])
    }

    /// Flows of slot `i`, aligned with `schedule().slots[i].peers`.
    pub fn slot_flows(&self, slot: usize) -> &[f64] {
        &self.flows[slot]
    }

    /// `(slot, from, to, flow)` for every link of every slot.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.schedule.slots.iter().enumerate().flat_map(move |(i, s)| {
            (0..s.peers.len()).map(move |k| {
                let (a, b) = s.link(k);
                (i, a, b, self.flows[i][k])
            })
        })
    }

    /// Per-link totals `x_AB = sum_i x_AB^i` as an `n x n` table.
    pub fn link_totals(&self) -> Vec<Vec<f64>> {
        let n = self.n_nodes();
        let mut tot = vec![vec![0.0; n]; n];
        for (_, a, b, x) in self.iter() {
            tot[a][b] += x;
        }
        tot
    }

    /// `a * self + b * other`; both must share the same schedule layout.
    pub fn combine(&self, a: f64, other: &FlowAllocation, b: f64) -> Result<FlowAllocation> {
        if self.flows.len() != other.flows.len()
            || self.flows.iter().zip(&other.flows).any(|(x, y)| x.len() != y.len())
        {
            return Err(Error::Contract("allocations have different layouts".into()));
        }
        let flows = self
            .flows
            .iter()
            .zip(&other.flows)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
            .collect();
        Ok(FlowAllocation {
            schedule: self.schedule.clone(),
            flows,
        })
    }

    /// Debug dump: slot list plus a flow map keyed `"i:A->B"`.
    pub fn to_json(&self) -> Value {
        let mut flows = serde_json::Map::new();
        for (i, a, b, x) in self.iter() {
            flows.insert(format!("{i}:{a}->{b}"), json!(x));
        }
        json!({
            "n_nodes": self.schedule.n_nodes,
            "slots": self.schedule.slots,
            "flows": flows,
        })
    }
}

/// A source/destination cut given by its source side `V^s` as a node bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cut {
    source_side: u64,
}

impl Cut {
    /// `source_side` must contain node 0 and exclude `n_nodes - 1`.
    pub fn new(source_side: u64, n_nodes: usize) -> Result<Self> {
        if n_nodes >= 64 || source_side & 1 == 0 || source_side >> (n_nodes - 1) != 0 {
            return Err(Error::Config(format!("{source_side:#b} is not a source/destination cut")));
        }
        Ok(Cut { source_side })
    }

    /// The cut `{S}`.
    pub fn source_only() -> Self {
        Cut { source_side: 1 }
    }

    /// Everything except the destination on the source side.
    pub fn all_but_destination(n_nodes: usize) -> Self {
        Cut {
            source_side: (1u64 << (n_nodes - 1)) - 1,
        }
    }

    #[inline]
    pub fn on_source_side(&self, node: usize) -> bool {
        self.source_side >> node & 1 == 1
    }

    #[inline]
    pub fn crosses(&self, from: usize, to: usize) -> bool {
        self.on_source_side(from) && !self.on_source_side(to)
    }

    pub fn source_side(&self) -> u64 {
        self.source_side
    }
}

/// All `2^(n-2)` cuts, ordered by the relay bitmask.
pub fn enumerate_cuts(n_nodes: usize) -> Result<Vec<Cut>> {
    if n_nodes < 3 {
        return Err(Error::Config(format!("need at least 3 nodes, got {n_nodes}")));
    }
    if n_nodes > 40 {
        return Err(Error::Config("too many nodes to enumerate cuts".into()));
    }
    let relays = n_nodes - 2;
    Ok((0..1u64 << relays)
        .map(|mask| Cut {
            source_side: 1 | (mask << 1),
        })
        .collect())
}

pub fn cut_flow(cut: &Cut, alloc: &FlowAllocation) -> f64 {
    alloc
        .iter()
        .filter(|&(_, a, b, _)| cut.crosses(a, b))
        .map(|(_, _, _, x)| x)
        .sum()
}

/// Outflow minus inflow for each relay, in relay index order.
pub fn conservation_residuals(alloc: &FlowAllocation) -> Vec<f64> {
    let n = alloc.n_nodes();
    let mut r = vec![0.0; n];
    for (_, a, b, x) in alloc.iter() {
        r[a] += x;
        r[b] -= x;
    }
    r[1..n - 1].to_vec()
}

pub fn is_conserving(alloc: &FlowAllocation) -> bool {
    conservation_residuals(alloc).iter().all(|r| r.abs() <= CONSERVATION_TOL)
}

/// Minimum cut flow over every source/destination cut.
pub fn min_cut_value(alloc: &FlowAllocation) -> f64 {
    enumerate_cuts(alloc.n_nodes())
        .expect("schedule has a valid node count")
        .iter()
        .map(|c| cut_flow(c, alloc))
        .fold(f64::INFINITY, f64::min)
}

/// `min{x(C_S), x(C_D)}`, valid only for conserving allocations.
pub fn reduced_min_cut(alloc: &FlowAllocation) -> Result<f64> {
    let res = conservation_residuals(alloc);
    if let Some((i, r)) = res.iter().enumerate().find(|(_, r)| r.abs() > CONSERVATION_TOL) {
        return Err(Error::Contract(format!(
            "relay {} has conservation residual {r}; reduced cut form does not apply",
            i + 1
        )));
    }
    let n = alloc.n_nodes();
    Ok(cut_flow(&Cut::source_only(), alloc).min(cut_flow(&Cut::all_but_destination(n), alloc)))
}

/// Random allocation that conserves flow at every relay exactly (up to
/// rounding), for property tests. Built from random source-to-destination
/// walks through distinct relays plus random relay cycles; every hop is
/// placed in a randomly chosen slot of `schedule` that carries that link.
pub fn random_conserving_allocation<R: Rng + ?Sized>(schedule: &SlotSchedule, rng: &mut R) -> FlowAllocation {
    let n = schedule.n_nodes;
    let dest = n - 1;
    let mut carriers: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (i, s) in schedule.slots.iter().enumerate() {
        for k in 0..s.peers.len() {
            carriers.entry(s.link(k)).or_default().push((i, k));
        }
    }
    let mut alloc = FlowAllocation::zeros(schedule.clone());
    let mut push = |a: usize, b: usize, amount: f64, rng: &mut R| -> bool {
        match carriers.get(&(a, b)) {
            Some(c) if !c.is_empty() => {
                let (i, k) = c[rng.random_range(0..c.len())];
                alloc.flows[i][k] += amount;
                true
            }
            _ => false,
        }
    };
    let relays: Vec<usize> = (1..dest).collect();
    let n_walks = rng.random_range(1..=4);
    for _ in 0..n_walks {
        let mut order = relays.clone();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let hops = rng.random_range(0..=relays.len());
        let mut path = vec![0];
        path.extend_from_slice(&order[..hops]);
        path.push(dest);
        if path.windows(2).all(|w| carriers.contains_key(&(w[0], w[1]))) {
            let amount: f64 = rng.random_range(0.0..1.0);
            for w in path.windows(2) {
                push(w[0], w[1], amount, rng);
            }
        }
    }
    if relays.len() >= 2 {
        for _ in 0..rng.random_range(0..=2) {
            let a = relays[rng.random_range(0..relays.len())];
            let mut b = relays[rng.random_range(0..relays.len())];
            if a == b {
                b = if a == relays[0] { relays[1] } else { relays[0] };
            }
            if carriers.contains_key(&(a, b)) && carriers.contains_key(&(b, a)) {
                let amount: f64 = rng.random_range(0.0..0.5);
                push(a, b, amount, rng);
                push(b, a, amount, rng);
            }
        }
    }
    alloc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_node_example() -> FlowAllocation {
        let slots = vec![
            SlotDescriptor::new(SlotKind::Bc, 0, vec![2, 1], 0.5, 3).unwrap(),
            SlotDescriptor::new(SlotKind::Ma, 2, vec![0, 1], 0.5, 3).unwrap(),
        ];
        let mut a = FlowAllocation::zeros(SlotSchedule::new(3, slots).unwrap());
        a.set(0, 0, 2, 0.3).unwrap();
        a.set(0, 0, 1, 0.2).unwrap();
        a.set(1, 0, 2, 0.1).unwrap();
        a.set(1, 1, 2, 0.2).unwrap();
        a
    }

    #[test]
    fn cut_counts() {
        assert!(enumerate_cuts(2).is_err());
        let c3 = enumerate_cuts(3).unwrap();
        assert_eq!(c3, vec![Cut::source_only(), Cut::all_but_destination(3)]);
        assert_eq!(enumerate_cuts(4).unwrap().len(), 4);
        assert_eq!(enumerate_cuts(5).unwrap().len(), 8);
        let c6 = enumerate_cuts(6).unwrap();
        assert_eq!(c6.len(), 16);
        assert!(c6.contains(&Cut::source_only()) && c6.contains(&Cut::all_but_destination(6)));
        let mut dedup = c6.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 16);
        for c in c6 {
            assert!(c.on_source_side(0) && !c.on_source_side(5));
        }
    }

    #[test]
    fn three_node_cut_flows() {
        let a = three_node_example();
        let cuts = enumerate_cuts(3).unwrap();
        assert!((cut_flow(&cuts[0], &a) - 0.6).abs() < 1e-15);
        assert!((cut_flow(&cuts[1], &a) - 0.6).abs() < 1e-15);
        assert_eq!(conservation_residuals(&a), vec![0.0]);
        assert!((reduced_min_cut(&a).unwrap() - 0.6).abs() < 1e-15);
        assert!((min_cut_value(&a) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn conservation_residual_sign() {
        let mut a = three_node_example();
        a.set(0, 0, 1, 0.3).unwrap();
        let r = conservation_residuals(&a);
        assert!((r[0] + 0.1).abs() < 1e-15);
        assert!(matches!(reduced_min_cut(&a), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_flows() {
        let a = FlowAllocation::zeros(SlotSchedule::canonical(5).unwrap());
        assert_eq!(conservation_residuals(&a), vec![0.0; 3]);
        assert_eq!(min_cut_value(&a), 0.0);
        assert_eq!(reduced_min_cut(&a).unwrap(), 0.0);
        for c in enumerate_cuts(5).unwrap() {
            assert_eq!(cut_flow(&c, &a), 0.0);
        }
    }

    #[test]
    fn inter_relay_edge_membership() {
        let mut a = FlowAllocation::zeros(SlotSchedule::canonical(4).unwrap());
        // relay 1 BC slot is index 2
        a.set(2, 1, 2, 0.5).unwrap();
        let c = Cut::new(0b011, 4).unwrap();
        assert!((cut_flow(&c, &a) - 0.5).abs() < 1e-15);
        assert_eq!(cut_flow(&Cut::source_only(), &a), 0.0);
    }

    #[test]
    fn canonical_layout() {
        let s = SlotSchedule::canonical(4).unwrap();
        assert_eq!(s.slots.len(), 6);
        let kinds: Vec<_> = s.slots.iter().map(|s| (s.kind, s.hub)).collect();
        assert_eq!(
            kinds,
            vec![
                (SlotKind::Bc, 0),
                (SlotKind::Ma, 1),
                (SlotKind::Bc, 1),
                (SlotKind::Ma, 2),
                (SlotKind::Bc, 2),
                (SlotKind::Ma, 3)
            ]
        );
        let links: usize = s.slots.iter().map(|s| s.peers.len()).sum();
        assert_eq!(links, 14);
        assert_eq!(SlotSchedule::canonical(5).unwrap().slots.len(), 8);
    }

    #[test]
    fn slot_rules() {
        assert!(SlotDescriptor::new(SlotKind::Bc, 1, vec![0], 0.1, 4).is_err());
        assert!(SlotDescriptor::new(SlotKind::Bc, 3, vec![1], 0.1, 4).is_err());
        assert!(SlotDescriptor::new(SlotKind::Ma, 1, vec![3], 0.1, 4).is_err());
        assert!(SlotDescriptor::new(SlotKind::Ma, 0, vec![1], 0.1, 4).is_err());
        assert!(SlotDescriptor::new(SlotKind::Ma, 3, vec![0, 1, 2], 0.1, 4).is_ok());
        assert!(SlotDescriptor::new(SlotKind::Bc, 0, vec![], 0.1, 4).is_err());
        assert!(SlotDescriptor::new(SlotKind::Bc, 0, vec![1, 1], 0.1, 4).is_err());
        assert!(SlotDescriptor::new(SlotKind::Bc, 0, vec![0], 0.1, 4).is_err());
        let too_many = vec![SlotDescriptor::new(SlotKind::Bc, 0, vec![1], 0.1, 3).unwrap(); 5];
        assert!(SlotSchedule::new(3, too_many).is_err());
    }

    #[test]
    fn link_must_belong_to_slot() {
        let mut a = FlowAllocation::zeros(SlotSchedule::canonical(4).unwrap());
        assert!(a.set(0, 1, 2, 0.1).is_err());
        assert!(a.set(0, 0, 1, -0.1).is_err());
    }

    #[test]
    fn total_time_check() {
        let mut s = SlotSchedule::canonical(3).unwrap();
        assert!(s.check_lengths().is_err());
        s.set_lengths(&[0.25; 4]);
        assert!(s.check_lengths().is_ok());
    }

    #[test]
    fn json_dump_keys() {
        let v = three_node_example().to_json();
        assert_eq!(v["flows"]["0:0->2"], json!(0.3));
        assert_eq!(v["flows"]["1:1->2"], json!(0.2));
        assert_eq!(v["slots"][0]["kind"], json!("BC"));
    }
}
