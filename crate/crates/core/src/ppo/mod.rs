//! Proximal policy optimization with separate Gaussian policy and value networks.

pub mod checkpoint;
pub mod gae;
pub mod network;
pub mod trainer;
pub mod update;

pub use checkpoint::PolicyCheckpoint;
pub use gae::compute_gae;
pub use network::{gaussian_log_prob, sample_action, ActorCritic, PolicyOutput};
pub use trainer::{train, train_seed, CurvePoint, EvalScore, RlEnv, SeedRun, TrainOutcome, TrainerConfig, Transition};
