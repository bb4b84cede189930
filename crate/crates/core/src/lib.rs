//! Battery reserve dispatch and response-aware grid reliability analysis.
//!
//! The crate quantifies how a fast storage reserve improves power-grid
//! reliability. It ingests net-imbalance time series, computes sample-based
//! reliability indices (with and without awareness of the inertia/governor
//! response band), and dispatches a battery against the imbalance with either
//! myopic threshold controllers or deterministic horizon optimizers (linear or
//! quadratic cost, optional state-of-charge management).
//!
//! Solvers ship in three tiers:
//!
//! * [`myopic`] — per-step threshold rules that need no look-ahead,
//! * [`opt_convex`] — an epigraph reformulation solved by an internal
//!   operator-splitting (ADMM) QP solver with banded KKT factorization,
//! * [`opt_mccormick`] — exact mixed-integer formulations with McCormick
//!   envelopes, solved by branch-and-bound, used as ground truth on short
//!   horizons.
//!
//! The [`oracle`] module provides brute-force enumeration for tiny horizons,
//! [`verify`] a randomized cross-solver harness, and [`scenario`] a sweep
//! runner producing comparison tables and plot-ready CSV output.

pub mod battery;
pub mod error;
pub mod metrics;
pub mod myopic;
pub mod opt_convex;
pub mod opt_mccormick;
pub mod oracle;
pub mod problem;
pub mod response;
pub mod scenario;
pub mod timeseries;
pub mod verify;

mod solver;

pub use battery::{mean_soc, BatterySpec, BatteryState};
pub use error::{Error, Result};
pub use metrics::{report, residuals, ri_from_saidi, saidi_classic, ReliabilityReport};
pub use myopic::{run_policy, Policy, SocBand};
pub use problem::{CostKind, DispatchResult, ProblemSpec, SocPenalty, SolverStats};
pub use response::ResponseModel;
pub use timeseries::{load_csv, resample, synth, write_csv, CsvSchema, ImbalanceSeries, SynthModel};
