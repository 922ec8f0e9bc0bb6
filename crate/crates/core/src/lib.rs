//! Solvers for finite constrained discounted MDPs where feasibility is
//! uniform: a policy `g` is feasible against a threshold policy `π^c` when
//! its discounted cost satisfies `J^g(x) <= J^{π^c}(x)` at every state.
//!
//! The crate provides
//! - exact policy evaluation and the single-policy operators ([`evaluation`]),
//! - cost-feasible action sets `A^π` and `α_π` ([`feasibility`]),
//! - policy iteration restricted to an action-set map and the `T_F` operator ([`restricted`]),
//! - the off-line improvement algorithm, PI refinement and the on-line method ([`algorithms`]),
//! - brute-force certificates for small instances ([`oracle`]),
//! - instance generation, file formats and command execution ([`generate`], [`format`], [`report`], [`commands`]).

pub mod algorithms;
pub mod commands;
mod enumerate;
pub mod error;
pub mod evaluation;
pub mod feasibility;
pub mod format;
pub mod generate;
pub mod model;
pub mod oracle;
pub mod report;
pub mod restricted;

pub use error::{CmdpError, Result, Violation};
pub use feasibility::{ActionSetMap, SlacknessMode};
pub use model::{CmdpInstance, Policy, RawInstance, ValueFunction, EPS_FEAS};
