//! Gate teleportation over Bell-pair networks.
//!
//! Parties hold qubits of an arbitrary (possibly entangled) input state and
//! share Bell pairs in either a parallel (star) or series (path) topology.
//! The protocols in [`protocols`] implement nonlocal controlled gates using
//! only local operations and classical messages, and [`verify`] checks every
//! measurement branch against an ideal oracle while auditing ebit/cbit costs.

pub mod cli;
pub mod gates;
pub mod network;
pub mod protocols;
pub mod statevector;
pub mod trace;
pub mod verify;

/// Equality tolerance for states, unitarity and involution checks.
pub const TOLERANCE: f64 = 1e-10;

/// Outcomes with probability below this are impossible branches.
pub const IMPOSSIBLE_CUTOFF: f64 = 1e-12;

pub use gates::Gate;
pub use network::{CostLedger, Network, TopologyKind};
pub use protocols::{BranchOutcomes, Family, ProtocolSpec};
pub use statevector::{Basis, StateVector};
pub use verify::{verify_protocol, VerificationReport};
