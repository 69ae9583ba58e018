//! Simulation and inference for the hypergeometric randomly reinforced urn.
//!
//! - [`urn`]: exact single-urn dynamics with pluggable draw-size and
//!   reinforcement policies.
//! - [`estimators`]: plug-in variance estimates and confidence intervals for
//!   the limit proportion.
//! - [`multi_urn`]: systems of urns coupled by common random factors.
//! - [`montecarlo`]: deterministic parallel replications and the
//!   limit-theorem diagnostics built on them.

pub mod error;
pub mod estimators;
pub mod montecarlo;
pub mod multi_urn;
pub mod rng;
pub mod stats;
pub mod urn;

pub use error::{Error, Result};
pub use estimators::{
    confidence_interval, normal_quantile, plugin_estimates, variance_estimates,
    ConfidenceInterval, IntervalBasis, PlugInEstimates, VarianceEstimates,
};
pub use rng::{RngStream, StreamSeed};
pub use urn::{
    increment_identity_check, run_trajectory, sample_hypergeometric, step, DrawSizePolicy,
    ReinforcementPolicy, Snapshot, StepRecord, Trajectory, Urn, UrnConfig, UrnState,
};
