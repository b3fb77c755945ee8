//! Closed-form free boundaries for optimal investment-stopping problems.
//!
//! An investor trades one stock and a bank account and may stop at any time
//! before the horizon, collecting `U(x - K)` on wealth above the floor `K`.
//! The crate approximates the dual exercise boundary by a closed-form curve
//! ([`boundary::GcaBoundary`]), evaluates the dual value along it
//! ([`dual_value`]), and recovers the primal value and strategy
//! ([`primal::PrimalSolver`]). A binomial tree ([`btm`]) and a
//! finite-difference obstacle solver ([`fd`]) are included as oracles.
//!
//! ```
//! use freebound::config::RunConfig;
//! use freebound::primal::PrimalSolver;
//! use freebound::utility::UtilitySpec;
//!
//! # fn main() -> Result<(), freebound::error::Error> {
//! let problem = RunConfig::reference_example(UtilitySpec::NonHara).problem()?;
//! let solver = PrimalSolver::new(&problem)?;
//! let sol = solver.primal_value(0.0, 1.5)?;
//! assert!(sol.value > 1.5 && sol.strategy > 0.0);
//! # Ok(())
//! # }
//! ```

// `!(x > 0.0)` is the NaN-rejecting form used for every domain check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod btm;
pub mod config;
pub mod dual_value;
pub mod error;
pub mod fd;
pub mod model;
pub mod numerics;
pub mod primal;
pub mod report;
pub mod utility;
