use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::scalar::Scalar;
use crate::worldmodel::{memory_sequence, MemoryState, WorldModel};

/// State-action pairs over which prediction differences are averaged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AnchorSet<T: Scalar> {
    pub states: Vec<Vec<T>>,
    pub actions: Vec<Vec<T>>,
    /// `(trajectory index, time step)` each pair was drawn from.
    pub slots: Vec<(usize, usize)>,
}

impl<T: Scalar> AnchorSet<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Draws `count` distinct `(trajectory, t)` slots uniformly without replacement.
pub fn build_anchor_set<T: Scalar>(dataset: &[Trajectory<T>], count: usize, seed: u64) -> Result<AnchorSet<T>> {
    let offsets: Vec<usize> = dataset
        .iter()
        .scan(0usize, |acc, t| {
            let start = *acc;
            *acc += t.len();
            Some(start)
        })
        .collect();
    let total: usize = dataset.iter().map(|t| t.len()).sum();
    if count == 0 || count > total {
        return Err(Error::InsufficientData(format!("cannot draw {count} anchors from {total} state-action pairs")));
    }
    let mut rng = rng_from(seed, &[0xA7C4]);
    let mut picks = index::sample(&mut rng, total, count).into_vec();
    picks.sort_unstable();
    let slots: Vec<(usize, usize)> = picks
        .into_iter()
        .map(|flat| {
            let traj = offsets.partition_point(|&o| o <= flat) - 1;
            (traj, flat - offsets[traj])
        })
        .collect();
    Ok(AnchorSet {
        states: slots.iter().map(|&(i, t)| dataset[i].states[t].clone()).collect(),
        actions: slots.iter().map(|&(i, t)| dataset[i].actions[t].clone()).collect(),
        slots,
    })
}

/// Draws `count` memories `h_t` uniformly over `(trajectory, t)` with
/// `t` in `min_t ..= T`, without replacement.
pub fn sample_memories<T: Scalar>(model: &WorldModel<T>, dataset: &[Trajectory<T>], count: usize, min_t: usize, seed: u64) -> Result<Vec<MemoryState<T>>> {
    let per_traj: Vec<usize> = dataset.iter().map(|t| (t.len() + 1).saturating_sub(min_t)).collect();
    let total: usize = per_traj.iter().sum();
    if count == 0 || count > total {
        return Err(Error::InsufficientData(format!("cannot draw {count} memories from {total} candidates")));
    }
    let mut rng = rng_from(seed, &[0x3E30]);
    let mut picks = index::sample(&mut rng, total, count).into_vec();
    picks.sort_unstable();
    let mut out = Vec::with_capacity(count);
    let (mut traj, mut base) = (0usize, 0usize);
    let mut cached: Option<(usize, Vec<Vec<T>>)> = None;
    for flat in picks {
        while flat >= base + per_traj[traj] {
            base += per_traj[traj];
            traj += 1;
        }
        let t = min_t + (flat - base);
        if cached.as_ref().map(|c| c.0) != Some(traj) {
            cached = Some((traj, memory_sequence(model, &dataset[traj])?));
        }
        let h = cached.as_ref().unwrap().1[t].clone();
        out.push(MemoryState { h, t, source: Some(dataset[traj].seed) });
    }
    Ok(out)
}
