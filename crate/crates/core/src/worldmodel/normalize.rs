use serde::{Deserialize, Serialize};

use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-feature affine statistics for model inputs and the predicted state delta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Normalizer<T: Scalar> {
    pub state_mean: Vec<T>,
    pub state_scale: Vec<T>,
    pub action_mean: Vec<T>,
    pub action_scale: Vec<T>,
    pub delta_mean: Vec<T>,
    pub delta_scale: Vec<T>,
}

fn mean_and_scale<'a, T: Scalar + 'a>(rows: impl Iterator<Item = Vec<T>> + Clone, dim: usize) -> (Vec<T>, Vec<T>) {
    let count = T::from_usize(rows.clone().count().max(1)).unwrap();
    let mut mean = vec![T::zero(); dim];
    for r in rows.clone() {
        for (m, x) in mean.iter_mut().zip(&r) {
            *m += *x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![T::zero(); dim];
    for r in rows {
        for ((v, x), m) in var.iter_mut().zip(&r).zip(&mean) {
            *v += (*x - *m) * (*x - *m);
        }
    }
    let tiny = T::lit(1e-12);
    let scale = var
        .into_iter()
        .zip(&mean)
        .map(|(v, m)| {
            let sd = (v / count).sqrt();
            if sd > tiny * T::one().max(m.abs()) {
                sd
            } else {
                T::one()
            }
        })
        .collect();
    (mean, scale)
}

impl<T: Scalar> Normalizer<T> {
    /// Zero means and unit scales.
    pub fn identity(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_mean: vec![T::zero(); state_dim],
            state_scale: vec![T::one(); state_dim],
            action_mean: vec![T::zero(); action_dim],
            action_scale: vec![T::one(); action_dim],
            delta_mean: vec![T::zero(); state_dim],
            delta_scale: vec![T::one(); state_dim],
        }
    }

    /// Fits means and standard deviations to a dataset. Features with no
    /// spread keep a unit scale.
    pub fn fit(dataset: &[Trajectory<T>]) -> Result<Self> {
        let first = dataset.first().ok_or_else(|| Error::InsufficientData("empty dataset".into()))?;
        let (sd, ad) = (first.states[0].len(), first.actions[0].len());
        let states = dataset.iter().flat_map(|t| t.states.iter().cloned());
        let actions = dataset.iter().flat_map(|t| t.actions.iter().cloned());
        let deltas = dataset.iter().flat_map(|t| {
            t.states
                .windows(2)
                .map(|w| w[1].iter().zip(&w[0]).map(|(&b, &a)| b - a).collect::<Vec<T>>())
        });
        let (state_mean, state_scale) = mean_and_scale(states, sd);
        let (action_mean, action_scale) = mean_and_scale(actions, ad);
        let (delta_mean, delta_scale) = mean_and_scale(deltas, sd);
        Ok(Self { state_mean, state_scale, action_mean, action_scale, delta_mean, delta_scale })
    }

    pub fn state_dim(&self) -> usize {
        self.state_mean.len()
    }

    pub fn action_dim(&self) -> usize {
        self.action_mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let scales = self.state_scale.iter().chain(&self.action_scale).chain(&self.delta_scale);
        if scales.clone().all(|s| *s > T::zero() && s.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("normalization scales must be positive and finite".into()))
        }
    }

    /// Concatenated normalized `(state, action)`.
    pub fn input(&self, state: &[T], action: &[T]) -> Vec<T> {
        let s = state
            .iter()
            .zip(&self.state_mean)
            .zip(&self.state_scale)
            .map(|((&x, &m), &c)| (x - m) / c);
        let a = action
            .iter()
            .zip(&self.action_mean)
            .zip(&self.action_scale)
            .map(|((&x, &m), &c)| (x - m) / c);
        s.chain(a).collect()
    }

    pub fn delta_target(&self, state: &[T], next: &[T]) -> Vec<T> {
        (0..state.len())
            .map(|i| (next[i] - state[i] - self.delta_mean[i]) / self.delta_scale[i])
            .collect()
    }

    /// `state + denormalized delta`.
    pub fn apply_delta(&self, state: &[T], normalized_delta: &[T]) -> Vec<T> {
        (0..state.len())
            .map(|i| state[i] + (normalized_delta[i] * self.delta_scale[i] + self.delta_mean[i]))
            .collect()
    }
}
