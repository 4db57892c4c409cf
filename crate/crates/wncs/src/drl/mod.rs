//! Deterministic actor-critic codesign learners: twin critics with target
//! networks, experience replay, the cascaded dual-branch actor with
//! matching-based action embedding, partial policy gradients, and the
//! training loop.

pub mod actor;
pub mod agent;
pub mod buffer;
pub mod train;

pub use actor::{ActorShape, CodesignActor, SchedHead};
pub use agent::{embed_action, ActionSelection, BatchView, Hyper, Td3Agent};
pub use buffer::{Experience, ReplayBuffer};
pub use train::{train, EpisodeLog, TrainRun, TrainingLog};
