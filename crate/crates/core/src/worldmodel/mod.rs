//! Recurrent world model (encoder MLP, GRU memory, decoder MLP with a skip
//! connection from the encoder around the GRU) and its training procedures.

mod model;
mod normalize;
mod permutation;
mod rollout;
mod stateless;
mod train;

pub use model::{MemoryState, WorldModel, WorldModelArch};
pub use normalize::Normalizer;
pub use permutation::sample_permutation;
pub use rollout::{encode_trajectory, imagine_rollout, memory_sequence, prediction_spread, Rollout};
pub use stateless::StatelessModel;
pub use train::{
    evaluate_loss, no_change_baseline, one_step_errors, train, train_standard, train_stateless,
    train_time_invariant, OneStepPredictor, TrainConfig, TrainMode, TrainOutcome, TrainableModel,
};

use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of loss terms per trajectory: predictions of `s_{t+1}` for
/// `t = 0 ..= len - 2`.
pub(crate) fn loss_terms<T: Scalar>(traj: &Trajectory<T>) -> usize {
    traj.len().saturating_sub(1)
}

pub(crate) fn check_dataset<T: Scalar>(dataset: &[Trajectory<T>], state_dim: usize, action_dim: usize) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData("empty dataset".into()));
    }
    for (i, t) in dataset.iter().enumerate() {
        if t.len() < 2 {
            return Err(Error::InsufficientData(format!("trajectory {i} has fewer than 2 transitions")));
        }
        if t.states.iter().any(|s| s.len() != state_dim) || t.actions.iter().any(|a| a.len() != action_dim) {
            return Err(Error::Dimension {
                context: "dataset trajectory vs model",
                expected: state_dim,
                got: t.states[0].len(),
            });
        }
    }
    Ok(())
}
