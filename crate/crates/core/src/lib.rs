//! Latent-action policies whose actions evolve as `z' = z + A(s) z` in the
//! latent space of a frozen action autoencoder, trained with a
//! deterministic actor-critic, plus post-hoc stability diagnostics of the
//! learned matrices `A(s)`.

pub mod autoencoder;
pub mod envs;
pub mod error;
pub mod io;
pub mod nn;
pub mod policy;
pub mod stability;
pub mod trainer;

pub use autoencoder::{
    train_autoencoder, ActionDataset, AeTrainConfig, AeTrainReport, Autoencoder, DatasetSource,
    LatentAction,
};
pub use envs::{ActionBounds, Env, EnvConfig, EnvId, StepResult};
pub use error::{Error, Result};
pub use io::{AutoencoderFile, ModelBundle, RunConfig};
pub use nn::Mat;
pub use policy::{
    latent_step, rollout, ActionMask, DynamicsMatrix, DynamicsNet, LatentPolicy, Start,
    StepDiagnostics, StepRecord, Trajectory,
};
pub use stability::{
    spectral_report, Classification, FloquetReport, KreissMode, KreissReport, SpectralReport,
};
pub use trainer::{train, Critic, TrainConfig, TrainOutcome};
