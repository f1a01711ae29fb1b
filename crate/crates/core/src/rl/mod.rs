//! Generic reinforcement-learning machinery, independent of the quantum model.
//!
//! [`tabular`] holds Q-learning and value iteration on finite MDPs; [`policy`]
//! holds the softmax MLP trained by REINFORCE and by supervised pre-training.

pub mod policy;
pub mod tabular;

pub use policy::{
    gaussian_target, greedy_action, sample_action, Optimizer, OptimizerKind, PolicyNet, Step,
    Trajectory,
};
pub use tabular::{
    q_learn, q_update, value_iteration, Exploration, FiniteMdp, LearningSchedule, QTable,
};
