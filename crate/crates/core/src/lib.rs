//! Dual-agent reinforcement learning for fast single-qubit gate design on a
//! simulated transmon with dispersive (I, Q) readout.
//!
//! * [`sim`]: piecewise-constant transmon evolution, fidelity and leakage.
//! * [`readout`]: Gaussian (I, Q) cluster readout, LDA discrimination.
//! * [`pulse`]: Gaussian/DRAG baselines and action-grid discretisation.
//! * [`rl`]: tabular Q-learning and a small softmax policy network.
//! * [`designer`]: the two-agent training loop, rewards, pre-training and benchmarks.

pub mod designer;
pub mod error;
pub mod pulse;
pub mod readout;
pub mod rl;
pub mod sim;

pub use error::{Error, Result};
