#![no_std]
#![warn(missing_docs)]

//! Numerics for forecasting competitions decided by the Simple Max rule.
//!
//! Every forecaster submits a probability for each of `m` binary events, is
//! scored with the quadratic rule `1 - (r - y)^2`, and the highest total wins
//! (ties split uniformly). This crate provides:
//!
//! - [`mechanism`]: scoring, winner sets and win shares.
//! - [`belief`]: the p-biased coin world, hypercube reflections and per-event
//!   joint beliefs over an opponent's report and the outcome.
//! - [`strategy`]: finite mixed strategies and profiles.
//! - [`distribution`]: score-difference distributions, exact and binned
//!   convolution, cumulants.
//! - [`utility`]: exact (enumerated or convolved) and Monte Carlo win
//!   probabilities, leave-one-out statistics and best responses.
//! - [`equilibrium`]: the closed-form one- and two-event equilibria and grid
//!   deviation searches.
//! - [`hedging`]: the hedging counterexample: its parameter condition,
//!   weight-class distance margins and sampled dominance checks.
//! - [`edgeworth`]: Hermite polynomials, the two-term Edgeworth expansion,
//!   affine fits and the resulting truthfulness radii.
//!
//! The crate is `no_std` and needs only `alloc`. All randomness flows from
//! explicit `u64` seeds through [`seeding`], where work is split into blocks
//! that each own a ChaCha stream, so results never depend on how many workers
//! evaluate the blocks.

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod belief;
pub mod distribution;
pub mod edgeworth;
pub mod equilibrium;
mod error;
pub mod hedging;
pub(crate) mod math;
pub mod mechanism;
pub mod seeding;
pub mod strategy;
pub mod utility;

pub use crate::error::{Error, Result};
pub use crate::mechanism::{OutcomeVector, ReportVector, WinnerShare};
pub use crate::strategy::{MixedStrategy, StrategyProfile};
