//! Estimate the carbon footprint of training large language models.
//!
//! The pipeline runs in four stages, one module each:
//!
//! 1. [`scaling`] turns a model width into a full workload: parameter counts
//!    for a mixture-of-experts transformer, dataset size, training FLOPs,
//!    expected loss, and the critical batch size.
//! 2. [`hardware`] describes GPUs — a small catalog of known parts plus a
//!    compounding projection of per-component improvement rates for
//!    hypothetical future parts.
//! 3. [`perf`] and [`search`] time one training step under a (TP, DP, PP, EP)
//!    parallelism plan and find the plan that meets a deadline on the fewest
//!    GPUs.
//! 4. [`carbon`] converts the chosen deployment into operational and embodied
//!    emissions; [`scenario`] sweeps model sizes under named what-if toggles
//!    and fits loss-versus-carbon power laws to the result.
//!
//! [`config`] and [`output`] handle TOML configuration and deterministic CSV
//! emission for the command-line tool.

pub mod carbon;
pub mod config;
pub mod hardware;
pub mod output;
pub mod scenario;
pub mod perf;
pub mod scaling;
pub mod search;

pub use carbon::{CarbonConfig, CarbonReport};
pub use hardware::{GpuSpec, ScalingRates};
pub use perf::{ParallelismPlan, PerfConfig, PlanTiming};
pub use scaling::{Architecture, ScalingConfig};
pub use scenario::{PowerLawFit, RunParams, ScenarioConfig, ScenarioRun};
pub use search::{PlanOutcome, SearchError};
