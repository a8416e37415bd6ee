//! Deep-hedging benchmark engine.
//!
//! The crate simulates an equity market with a GJR-GARCH(1,1) log-return
//! model, wraps the sale of a European call in a self-financing hedging
//! environment whose objective is the root semi-quadratic penalty (RSQP)
//! of the terminal loss, prices and delta-hedges the option with
//! Black-Scholes as a baseline, and trains eight deep-RL agents against
//! that baseline under a reproducible experiment harness.
//!
//! Module map:
//!
//! * [`num`] — matrices, a reverse-mode tape, feed-forward networks,
//!   optimizers, and counter-based random streams. No external math deps;
//!   everything is plain `f64`.
//! * [`market`] — GJR-GARCH simulation, maximum-likelihood calibration,
//!   and path-set persistence.
//! * [`env`] — the hedging environment: accounts, episodes, rewards, RSQP.
//! * [`bs`] — Black-Scholes utilities and the delta-hedge baseline policy.
//! * [`agents`] — the eight training procedures (DQL family, MCPG, PPO,
//!   DDPG, TD3) sharing `num` networks and the `env` environment.
//! * [`harness`] — dataset generation, grid search, early stopping,
//!   evaluation, Welch t-tests, reports and plots.

pub mod agents;
pub mod bs;
pub mod env;
mod error;
pub mod harness;
pub mod market;
pub mod num;

pub use error::{Error, Result};
