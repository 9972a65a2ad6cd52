//! Saddle-point solver for `min_x max_y f1(x) + Φ(x, y) − f2(y)` with
//! convex-concave smooth coupling `Φ`, built on proximal gradient
//! descent-ascent steps with one-step gradient extrapolation.
//!
//! Alongside the solver the crate computes the per-iteration certificate
//! quantities behind its convergence guarantees, so every run can be checked
//! against its theoretical bounds, and ships brute-force oracles (finite
//! differences, grid prox, small matrix games, closed-form saddle points)
//! for testing.

pub mod certificates;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod prox;
pub mod schedule;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use problem::{
    Coupling, CouplingKind, CouplingOracle, GradPair, LipschitzQuad, PrimalDualPoint, SaddleProblem,
};
pub use prox::Regularizer;
pub use schedule::{make_constant, make_geometric, ScheduleKind, Splitting, StepParams, StepSchedule};
pub use solver::{run, run_with, stop_rules, RunOptions, RunRecord, SolverState, StopReason, StopRule};
