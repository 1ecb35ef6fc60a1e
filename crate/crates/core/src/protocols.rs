//! Rate maps for the relaying protocols compared in outage experiments.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::bounds::{cutset_upper, BoundResult};
use crate::error::{Error, Result};
use crate::fo_solver::{solve_fo, FoProblem, SolverDiagnostics};
use crate::netmodel::{cap, NetworkInstance};
use crate::three_node::{solve_three_node, ThreeNodeResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ProtocolId {
    Fo,
    Gls,
    MaxMinSel,
    Direct,
    CutSetBound,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 5] = [
        ProtocolId::Fo,
        ProtocolId::Gls,
        ProtocolId::MaxMinSel,
        ProtocolId::Direct,
        ProtocolId::CutSetBound,
    ];

    /// Stable identifier used in CSV output.
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolId::Fo => "fo",
            ProtocolId::Gls => "gls",
            ProtocolId::MaxMinSel => "maxmin",
            ProtocolId::Direct => "direct",
            ProtocolId::CutSetBound => "bound",
        }
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProtocolId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown protocol {s:?}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum OutcomeDetail {
    None,
    Gls {
        /// Relays whose source link beats the direct link.
        candidates: Vec<usize>,
        /// Number of three-node maximizations performed.
        maximizations: usize,
        best: Option<ThreeNodeResult>,
    },
    MaxMin {
        relay: usize,
        relayed_rate: f64,
    },
    Fo(SolverDiagnostics),
    Bound {
        iterations: usize,
        slot_lengths: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolOutcome {
    pub protocol: ProtocolId,
    /// Nats per channel use.
    pub rate: f64,
    pub chosen_relay: Option<usize>,
    pub detail: OutcomeDetail,
}

pub fn direct(net: &NetworkInstance) -> ProtocolOutcome {
    ProtocolOutcome {
        protocol: ProtocolId::Direct,
        rate: net.direct_rate(),
        chosen_relay: None,
        detail: OutcomeDetail::None,
    }
}

/// Relays `k` with `Z_{S R_k} > Z_{S D}`, in index order.
pub fn gls_candidates(net: &NetworkInstance) -> Vec<usize> {
    let (s, d) = (net.source(), net.destination());
    let z_sd = net.gain(s, d);
    net.relays().filter(|&k| net.gain(s, k) > z_sd).collect()
}

/// Generalized link selection: the best three-node optimum over the relays
/// whose source link is stronger than the direct link, or direct
/// transmission when there is none.
pub fn gls(net: &NetworkInstance) -> Result<ProtocolOutcome> {
    let (s, d, snr) = (net.source(), net.destination(), net.snr());
    let candidates = gls_candidates(net);
    let mut best: Option<(usize, ThreeNodeResult)> = None;
    for &k in &candidates {
        let r = solve_three_node(net.gain(s, d), net.gain(s, k), net.gain(k, d), snr)?;
        if best.as_ref().is_none_or(|b| r.rate > b.1.rate) {
            best = Some((k, r));
        }
    }
    let maximizations = candidates.len();
    Ok(match best {
        None => ProtocolOutcome {
            protocol: ProtocolId::Gls,
            rate: net.direct_rate(),
            chosen_relay: None,
            detail: OutcomeDetail::Gls {
                candidates,
                maximizations,
                best: None,
            },
        },
        Some((k, r)) => ProtocolOutcome {
            protocol: ProtocolId::Gls,
            rate: r.rate,
            chosen_relay: Some(k),
            detail: OutcomeDetail::Gls {
                candidates,
                maximizations,
                best: Some(r),
            },
        },
    })
}

/// Relay maximizing `min(Z_{S R_i}, Z_{R_i D})`; ties go to the smallest index.
pub fn max_min_relay(net: &NetworkInstance) -> usize {
    let (s, d) = (net.source(), net.destination());
    let score = |k: usize| net.gain(s, k).min(net.gain(k, d));
    net.relays().fold(1, |b, k| if score(k) > score(b) { k } else { b })
}

/// Max-min relay selection with two equal half slots: the selected relay
/// decodes the first half and repeats it, the destination combines both
/// halves. Falls back to direct transmission when that is better.
pub fn max_min_selection(net: &NetworkInstance) -> ProtocolOutcome {
    let (s, d, snr) = (net.source(), net.destination(), net.snr());
    let k = max_min_relay(net);
    let relayed = 0.5 * cap(net.gain(s, k) * snr).min(cap((net.gain(s, d) + net.gain(k, d)) * snr));
    ProtocolOutcome {
        protocol: ProtocolId::MaxMinSel,
        rate: relayed.max(net.direct_rate()),
        chosen_relay: Some(k),
        detail: OutcomeDetail::MaxMin {
            relay: k,
            relayed_rate: relayed,
        },
    }
}

pub fn fo(net: &NetworkInstance) -> Result<ProtocolOutcome> {
    let r = solve_fo(&FoProblem::new(net.clone())?)?;
    Ok(ProtocolOutcome {
        protocol: ProtocolId::Fo,
        rate: r.rate,
        chosen_relay: None,
        detail: OutcomeDetail::Fo(r.diagnostics),
    })
}

pub fn cutset(net: &NetworkInstance) -> Result<ProtocolOutcome> {
    let BoundResult {
        rate,
        slot_lengths,
        iterations,
        ..
    } = cutset_upper(net)?;
    Ok(ProtocolOutcome {
        protocol: ProtocolId::CutSetBound,
        rate,
        chosen_relay: None,
        detail: OutcomeDetail::Bound {
            iterations,
            slot_lengths,
        },
    })
}

pub fn evaluate(protocol: ProtocolId, net: &NetworkInstance) -> Result<ProtocolOutcome> {
    match protocol {
        ProtocolId::Fo => fo(net),
        ProtocolId::Gls => gls(net),
        ProtocolId::MaxMinSel => Ok(max_min_selection(net)),
        ProtocolId::Direct => Ok(direct(net)),
        ProtocolId::CutSetBound => cutset(net),
    }
}
