//! Uniform-price auction engine for corporate bond issuance under
//! two-dimensional investment mandates (budget limit, risk limit).
//!
//! Layers:
//! - [`market`]: domain types, parameter validation, type distributions;
//! - [`clearing`]: demand aggregation, the linear stop-out rule, and
//!   allocation with pro-rata rationing at the margin;
//! - [`equilibrium`]: the closed-form symmetric equilibrium schedule and its
//!   comparative statics;
//! - [`verify`]: independent numerical checks of the equilibrium (expected
//!   payoff, first- and second-order conditions, the bid-schedule ODE, and a
//!   brute-force best-response search);
//! - [`experiments`]: Monte Carlo auction campaigns and parameter sweeps;
//! - [`scenario`] and [`report`]: the scenario file format and the result
//!   writers behind the CLI.

// Negated partial-order comparisons (`!(x > 0.0)`) are deliberate throughout:
// a NaN parameter must fail validation, and `x <= 0.0` would let it through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clearing;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod market;
pub mod quadrature;
pub mod report;
pub mod scenario;
pub mod seeding;
pub mod verify;

pub use error::{Error, Result};
