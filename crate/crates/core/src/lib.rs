//! Round-based simulator for cluster-head election in wireless sensor
//! networks.
//!
//! The crate models a stationary sensor field with a two- or three-tier
//! energy population, drives five election protocols (LEACH, SEP, ESEP,
//! DEEC, and the consumption-rate-weighted ECRSEP) over a shared first-order
//! radio energy model, and reports stability and throughput metrics per
//! round. Runs are deterministic given their seed, so protocols can be
//! compared on paired random numbers.

pub mod engine;
pub mod metrics;
pub mod model;
pub mod protocols;

pub use engine::{run_simulation, RoundMetrics, Simulation, SimulationSummary};
pub use metrics::{compare, summarize, ComparisonReport, LifetimeSummary};
pub use model::{
    build_network, total_initial_energy, ConfigError, EcrMode, NodeState, Protocol, RadioModel,
    ScenarioConfig, Tier,
};
pub use protocols::{elect_cluster_heads, ElectionContext};
