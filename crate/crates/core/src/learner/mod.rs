//! Convolutional-recurrent actor-critic networks trained with clipped-surrogate
//! policy optimization. Gradients are derived by hand for the fixed topology.

mod checkpoint;
mod gae;
mod net;
mod policy;
mod ppo;
mod spec;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointEntry, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gae::{gae_advantages, returns_from_advantages};
pub use net::{LstmState, NetInput, OwnedInput};
pub use policy::{log_softmax, ActOutput, ForwardOutput, PolicyHandle, RecurrentState};
pub use ppo::{
    loss_and_grad, prepare_batch, update, Episode, LossStats, OptimConfig, OptimizerKind, OptimizerState, RolloutBatch,
    TrainEpisode,
};
pub use spec::{Embedding, NetworkSpec, TowerLayout};
