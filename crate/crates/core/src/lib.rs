//! Deterministic simulation library for cooperative multi-armed bandits on
//! randomly activated communication graphs.
//!
//! A group of agents faces the same set of arms but observes rewards
//! through heterogeneous local distributions; the quantity that matters is
//! each arm's mean averaged over agents. Agents cannot see that average
//! directly. Instead they track it by gossiping running estimates over a
//! communication graph whose edges activate independently each round, and
//! they successively eliminate arms whose confidence intervals fall below
//! the leader's.
//!
//! The crate provides:
//!
//! - [`graph`]: base topologies, per-round activation sampling, gossip
//!   weight matrices, and spectral quantities (algebraic connectivity,
//!   empirical contraction factors),
//! - [`environment`]: heterogeneous reward tables and reward sampling,
//! - [`agent`]: per-agent protocol state and the four per-round phases,
//! - [`burnin`]: optional link-probability estimation before the protocol,
//! - [`sim`]: the round-synchronous engine, baseline, and replication
//!   driver with always-on invariant checks,
//! - [`experiments`]: parameter sweeps, slope fits, and CSV/JSON output,
//! - [`streams`]: named, non-overlapping random streams so every run is
//!   reproducible from one seed.

pub mod agent;
pub mod burnin;
pub mod environment;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod sim;
pub mod streams;

pub use agent::{gossip_update, intersect_active_sets, AgentState, GseParams};
pub use burnin::BurnInState;
pub use environment::{BanditInstance, RewardKind};
pub use error::{Error, Result};
pub use experiments::{ExperimentSpec, SweepKind};
pub use graph::{
    estimate_contraction, estimate_contraction_detailed, sample_comm_graph, BaseGraph,
    CommSnapshot, ContractionEstimate, SpectralMethod, SpectralSummary, Topology,
};
pub use sim::{
    run_replicated, run_replication, Algorithm, InstanceSource, RegretTrace, ReplicatedResult,
    SimConfig,
};
