//! Slotted Aloha with ZigZag collision recovery: backlog Markov chains,
//! stationary analysis, drift/stability, throughput optimization and a
//! frame-level Monte Carlo simulator.
//!
//! ```
//! use zigzag_aloha::{solve_model, ModelParams, SolverMethod, Variant};
//!
//! let params = ModelParams::new(10, 0.04, 0.8, Variant::ZigzagPaper).unwrap();
//! let solved = solve_model(&params, SolverMethod::Direct).unwrap();
//! assert_eq!(solved.stationary.pi.len(), 11);
//! assert!(solved.metrics.throughput_total <= 10.0 * 0.04);
//! ```

pub mod chain;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod model;
pub mod optimize;
pub mod report;
pub mod sim;
pub mod stationary;

pub use chain::{lookup, registry, ChainModel, TransitionMatrix};
pub use error::{Error, Result};
pub use metrics::{classify_stability, drift_curve, DriftCurve, MetricsReport, StabilityVerdict};
pub use model::{BacklogState, FrameOutcome, ModelParams, Variant};
pub use optimize::{maximize_throughput, OptimizationResult};
pub use report::{solve_model, SolvedModel};
pub use sim::{simulate, SimConfig, SimResult, TimeAccounting};
pub use stationary::{occupancy_distance, solve_stationary, SolverMethod, StationaryDistribution};
