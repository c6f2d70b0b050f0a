//! Per-UAV trajectory learning over the 27-move lattice.

mod dqn;
mod encode;
pub mod net;
mod pg;
mod replay;
pub mod tabular;

pub use dqn::{
    argmax, discounted_return, environment_rng, policy, rewards_by_uav, rollout_greedy, run_training, td_target,
    train_step, Agent, DqnConfig, EpisodeStats, Training,
};
pub use encode::{encode, observation_len};
pub use net::{ActionTarget, Adam, NetFile, NetHeader, ValueNet};
pub use pg::{run_policy_gradient, PgConfig, SoftmaxPolicy};
pub use replay::{ReplayBuffer, Transition};
pub use tabular::{tabular_q_update, train_tabular, GridWorld, QTable};
