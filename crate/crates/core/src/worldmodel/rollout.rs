use serde::{Deserialize, Serialize};

use super::model::{MemoryState, WorldModel};
use crate::envs::Trajectory;
use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

const DIVERGENCE_LIMIT: f64 = 1e6;

/// Memories `h_0 ..= h_T` obtained by running the model along a trajectory.
pub fn memory_sequence<T: Scalar>(model: &WorldModel<T>, traj: &Trajectory<T>) -> Result<Vec<Vec<T>>> {
    let mut out = Vec::with_capacity(traj.len() + 1);
    out.push(vec![T::zero(); model.memory_size()]);
    for t in 0..traj.len() {
        let enc = model.encode(&traj.states[t], &traj.actions[t])?;
        let (_, h) = model.predict_from_encoding(&traj.states[t], &enc, &out[t])?;
        out.push(h);
    }
    Ok(out)
}

/// Memory after consuming the first `upto` transitions (`h_0 = 0`).
pub fn encode_trajectory<T: Scalar>(model: &WorldModel<T>, traj: &Trajectory<T>, upto: usize) -> Result<MemoryState<T>> {
    if upto > traj.len() {
        return Err(Error::InvalidArgument(format!("step {upto} beyond trajectory length {}", traj.len())));
    }
    let mut mem = MemoryState { source: Some(traj.seed), ..MemoryState::zero(model.memory_size()) };
    for t in 0..upto {
        mem = model.forward(&traj.states[t], &traj.actions[t], &mem)?.1;
    }
    Ok(mem)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Rollout<T: Scalar> {
    /// Start state followed by one predicted state per action.
    pub states: Vec<Vec<T>>,
    /// Set when the rollout was cut short because a state blew up.
    pub diverged: bool,
}

/// Open-loop imagined rollout.
///
/// The memory is first populated by teacher-forcing the model on
/// `conditioning` (a trajectory from the environment whose behaviour should
/// be imitated); the model then predicts from `start` under `actions`,
/// feeding back its own predictions while continuing to update memory.
pub fn imagine_rollout<T: Scalar>(model: &WorldModel<T>, start: &[T], actions: &[Vec<T>], conditioning: &Trajectory<T>) -> Result<Rollout<T>> {
    check_dim("rollout start state", model.arch().state_dim, start.len())?;
    let mut memory = encode_trajectory(model, conditioning, conditioning.len())?.h;
    let mut states = vec![start.to_vec()];
    let limit = T::lit(DIVERGENCE_LIMIT);
    for a in actions {
        let current = states.last().unwrap();
        let (next, h) = match model.predict(current, a, &memory) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => return Ok(Rollout { states, diverged: true }),
            Err(e) => return Err(e),
        };
        if next.iter().any(|x| !x.is_finite() || x.abs() > limit) {
            return Ok(Rollout { states, diverged: true });
        }
        states.push(next);
        memory = h;
    }
    Ok(Rollout { states, diverged: false })
}

/// Mean over state features of the variance, across `memories`, of the
/// model's prediction at one fixed `(state, action)`. A memory that only
/// carries trajectory-constant information gives a small spread when the
/// memories come from different times of one trajectory.
pub fn prediction_spread<T: Scalar>(model: &WorldModel<T>, memories: &[Vec<T>], state: &[T], action: &[T]) -> Result<T> {
    if memories.is_empty() {
        return Err(Error::InsufficientData("no memories".into()));
    }
    let enc = model.encode(state, action)?;
    let preds = memories
        .iter()
        .map(|h| Ok(model.predict_from_encoding(state, &enc, h)?.0))
        .collect::<Result<Vec<_>>>()?;
    let n = T::from_usize(preds.len()).unwrap();
    let dim = state.len();
    let mut total = T::zero();
    for i in 0..dim {
        let mean = preds.iter().map(|p| p[i]).sum::<T>() / n;
        total += preds.iter().map(|p| (p[i] - mean) * (p[i] - mean)).sum::<T>() / n;
    }
    Ok(total / T::from_usize(dim).unwrap())
}
