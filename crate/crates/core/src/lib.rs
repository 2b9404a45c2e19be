//! Stochastic Popov (past-extragradient) and stochastic projection methods for
//! constrained variational inequalities with non-monotone operators.
//!
//! The crate provides the operator families used in the experiments, exact
//! projections onto simple sets, stepsize schedules, the two solvers with a
//! per-step audit, empirical property checks, rate-bound evaluators and a
//! multi-seed experiment harness that writes CSV output.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod feasible_sets;
pub mod operators;
pub mod schedules;
pub mod solvers;

pub use error::{Error, Result};
pub use feasible_sets::{Diameter, FeasibleSet};
pub use operators::{DeclaredConstants, NoiseModel, OperatorInstance, SolutionSet, Vector};
pub use schedules::{StepsizeSchedule, Theorem};
pub use solvers::{run, IterationRecord, Method, RunOptions, Trajectory};
