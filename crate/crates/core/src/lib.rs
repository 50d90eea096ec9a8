//! Load management for two-layer anycast CDNs.
//!
//! A primary layer of `n` nodes (co-located DNS server and HTTP proxy) shares one
//! anycast address. Node `i` answers a DNS query with the primary-layer address
//! with probability `x_i` and offloads to a remote secondary layer otherwise.
//! Requests answered by node `i` land at proxy `j` with probability `C_ij`, so the
//! proxy loads are `S = Cᵀ diag(A) x`.
//!
//! The crate provides:
//!
//! * [`dual`]: a distributed dual-decomposition solver for the convex
//!   delay/latency trade-off, with the coupling term optionally recovered
//!   through an emulated control-packet channel ([`fastcontrol`]).
//! * [`greedy`]: the damped ODE model of the greedy local heuristic, with a
//!   feasibility-preserving RK4 integrator.
//! * [`stability`]: overload polytope, Jacobians, two-node fixed-point
//!   classification and the Dulac divergence.
//! * [`oracle`]: brute-force primal references used to cross-check the above.
//! * [`harness`]: seeded Monte-Carlo sweeps over synthetic instances.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod costs;
pub mod dual;
pub mod error;
pub mod fastcontrol;
pub mod greedy;
pub mod harness;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod stability;

pub use costs::{CostValue, OffloadCost, OverloadCost};
pub use dual::{run_dual, BetaMode, DualConfig, DualSolution, StepRule};
pub use error::{Error, Result};
pub use fastcontrol::{ChannelConfig, ChannelMode};
pub use greedy::{integrate, GreedyConfig, Trajectory, Verdict};
pub use harness::{run_sweep, ExperimentConfig, SweepResult};
pub use model::{Matrix, NodeCost, SystemInstance, ValidationReport};
pub use stability::{StabilityReport, TwoNodeParams};
