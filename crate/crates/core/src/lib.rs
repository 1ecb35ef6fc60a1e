//! Cooperative relaying for half-duplex Gaussian relay networks.
//!
//! The crate computes achievable source-to-destination rates for an `N`-node
//! relay network under several protocols and estimates their outage
//! probabilities by Monte Carlo:
//!
//! * [`fo_solver`] solves the flow-optimized (FO) max-min program over slot
//!   lengths and per-slot flows with a log-barrier interior-point engine
//!   ([`barrier`]).
//! * [`three_node`] is the exact closed-form/scalar solver for one relay.
//! * [`protocols`] builds generalized-link selection (GLS), max-min relay
//!   selection and direct transmission on top of it.
//! * [`bounds`] provides the cut-set upper bound on the rate and the analytic
//!   destination-cut outage lower bound.
//! * [`simkit`] runs reproducible outage sweeps, estimates diversity slopes
//!   and serializes curves.
//!
//! Rates are in nats per channel use everywhere inside the crate. Conversion
//! to bits/s/Hz happens only when reading experiment targets and writing
//! results.

pub mod barrier;
pub mod bounds;
pub mod capregion;
pub mod error;
pub mod flowgraph;
pub mod fo_solver;
pub mod netmodel;
pub mod par;
pub mod protocols;
pub mod scalar;
pub mod simkit;
pub mod special;
pub mod three_node;
pub mod verify;

mod flowprog;

pub use error::{Error, Result};
pub use netmodel::{GainMatrix, MeanGains, NetworkInstance, RandomSource};
pub use protocols::{ProtocolId, ProtocolOutcome};
