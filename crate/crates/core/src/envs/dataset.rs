use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EnvId, EnvState};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
use crate::scalar::{all_finite, Scalar};

/// A recorded episode: `states.len() == actions.len() + 1`.
///
/// `hidden` is the ground-truth hidden parameter. It exists for evaluation
/// only; no training routine reads it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Trajectory<T: Scalar> {
    pub env: EnvId,
    pub seed: u64,
    pub hidden: T,
    pub states: Vec<Vec<T>>,
    pub actions: Vec<Vec<T>>,
}

impl<T: Scalar> Trajectory<T> {
    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(Error::Format(format!(
                "trajectory {} has {} states for {} actions",
                self.seed,
                self.states.len(),
                self.actions.len()
            )));
        }
        let (sd, ad) = (self.env.state_dim(), self.env.action_dim());
        if self.states.iter().any(|s| s.len() != sd) || self.actions.iter().any(|a| a.len() != ad) {
            return Err(Error::Format(format!("trajectory {} has inconsistent dimensions", self.seed)));
        }
        if !self.states.iter().chain(&self.actions).all(|v| all_finite(v)) || !self.hidden.is_finite() {
            return Err(Error::NonFinite(format!("trajectory {}", self.seed)));
        }
        if !self.env.hidden_spec().contains(self.hidden.to_f64_lossy()) {
            return Err(Error::Format(format!("trajectory {} hidden value {} outside support", self.seed, self.hidden)));
        }
        Ok(())
    }
}

/// Runs `env` from `start` under the given actions with a fixed hidden value.
pub fn simulate<T: Scalar>(env: EnvId, hidden: T, start: Vec<T>, actions: &[Vec<T>], seed: u64) -> Result<Trajectory<T>> {
    let mut st = EnvState::new(env, start, hidden)?;
    let mut states = Vec::with_capacity(actions.len() + 1);
    states.push(st.values.clone());
    for a in actions {
        states.push(st.advance(a)?.to_vec());
    }
    Ok(Trajectory { env, seed, hidden, states, actions: actions.to_vec() })
}

/// `count` trajectories of `length` transitions under an i.i.d. uniform
/// random policy. Trajectory `i` depends only on `(seed, i)`.
pub fn generate_dataset<T: Scalar>(env: EnvId, count: usize, length: usize, seed: u64) -> Result<Vec<Trajectory<T>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("trajectory count must be positive".into()));
    }
    if length < 2 {
        return Err(Error::InvalidArgument("trajectory length must be at least 2".into()));
    }
    let spec = env.hidden_spec();
    spec.validate()?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(seed, &[i as u64]);
            let hidden = spec.sample(&mut rng);
            let start = env.sample_start(&mut rng);
            let actions: Vec<Vec<T>> = (0..length).map(|_| env.sample_action(&mut rng)).collect();
            simulate(env, hidden, start, &actions, derive_seed(seed, &[i as u64]))
        })
        .collect()
}

/// One JSON document per line.
pub fn write_jsonl<T: Scalar>(path: &Path, trajectories: &[Trajectory<T>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for t in trajectories {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: Scalar>(path: &Path) -> Result<Vec<Trajectory<T>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Trajectory<T> = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        t.validate()?;
        out.push(t);
    }
    Ok(out)
}
