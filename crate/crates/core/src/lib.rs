//! Hierarchical imitation learning from observation-only demonstrations.
//!
//! A high-level policy picks sub-goals out of the demonstration set every
//! `delta_t` steps; a goal-conditioned low-level policy drives the
//! environment toward them. Both are deterministic actor-critic agents built
//! on the small networks in [`nn`].

pub mod checkpoint;
pub mod demos;
pub mod env;
pub mod error;
pub mod nn;
pub mod policy;
pub mod replay;
pub mod rewards;
pub mod trainer;

pub use checkpoint::{Algo, Checkpoint};
pub use demos::{DemoIndex, DemoSet, Trajectory};
pub use env::{EnvSpec, Environment, StepResult, TaskClass};
pub use error::{Error, Result};
pub use nn::{Activation, Mlp};
pub use policy::{AgentConfig, AgentPair, HighAction};
pub use replay::{HighTransition, LowTransition, ReplayBuffer, Segment};
pub use rewards::RewardParams;
pub use trainer::{LearningCurve, TrainConfig};
