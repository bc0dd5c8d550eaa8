//! Actor-critic training of the latent dynamics network.

mod ddpg;
mod replay;

pub use ddpg::{
    actor_objective_gradient, actor_update, critic_targets, critic_update, evaluate,
    policy_actions, soft_update, train, train_with_progress, training_eval_seeds, ActorObjective,
    Critic, CurvePoint, TrainConfig, TrainOutcome,
};
pub use replay::{Batch, ReplayBuffer, Transition};
