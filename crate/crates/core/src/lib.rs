//! Optimal quantization and power allocation for distributed detection in
//! wireless sensor networks.
//!
//! Sensors compute a local energy statistic, quantize it with as many bits
//! as their channel capacity allows, and send it to a fusion center that
//! forms a weighted sum. Powers are chosen to maximize the detection
//! deflection under a total power budget, either centrally or by dual
//! ascent with average consensus among the sensors.

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod config;
pub mod consensus;
pub mod error;
pub mod exec;
pub mod fusion;
pub mod gaussian;
pub mod model;
pub mod montecarlo;
pub mod quantize;
pub mod solver_central;
pub mod solver_dist;

pub use config::Config;
pub use consensus::{
    consensus_average, random_geometric_graph, ConsensusResult, Graph, Metropolis, StopRule,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use fusion::{FusionMoments, FusionWeights};
pub use model::{Hypothesis, NetworkSpec, Scenario, SensorParams};
pub use montecarlo::{DetectionEstimate, Scheme};
pub use quantize::QuantSpec;
pub use solver_central::{kkt_check, solve_centralized, KktReport, PowerAllocation};
pub use solver_dist::{solve_distributed, DualAscentTrace, SolverConfig, StepRule};
