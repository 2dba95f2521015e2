//! Run configuration, persistence, evaluation and the reference controller.

pub mod baseline;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod eval;
pub mod metrics;

pub use baseline::{PdController, PdGains};
pub use checkpoint::{Checkpoint, Role};
pub use config::RunConfig;
pub use eval::{evaluate, run_episode, ActorPolicy, EpisodeResult, EvalSummary, Policy, TrajectoryRow};
