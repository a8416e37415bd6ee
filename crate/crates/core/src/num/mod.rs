//! Numeric kernel shared by every agent: dense matrices, a reverse-mode
//! tape, feed-forward networks, gradient optimizers, special functions,
//! and deterministic counter-based random streams.

mod matrix;
mod net;
mod optim;
mod rng;
pub mod special;
mod tape;

pub use matrix::Matrix;
pub use net::{Activation, BoundParams, Mlp, NetCheckpoint, OutputHead};
pub use optim::{Optimizer, OptimizerKind};
pub use rng::RngStream;
pub use tape::{Tape, TensorId};
