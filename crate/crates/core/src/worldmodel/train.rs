use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{WorldModel, WorldModelArch};
use super::normalize::Normalizer;
use super::rollout::memory_sequence;
use super::stateless::StatelessModel;
use super::{check_dataset, loss_terms, sample_permutation};
use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, ParamVector, Parameterized};
use crate::rng::rng_from;
use crate::scalar::{all_finite, Scalar};

// rng stream tags
const INIT: u64 = 1;
const SHUFFLE: u64 = 2;
const PERMUTE: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    Standard,
    TimeInvariant,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Standard => "standard",
            TrainMode::TimeInvariant => "time-invariant",
        }
    }
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(TrainMode::Standard),
            "time-invariant" => Ok(TrainMode::TimeInvariant),
            other => Err(Error::InvalidArgument(format!("unknown training mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Trajectories per optimizer step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub memory_size: usize,
    pub encoder_layers: Vec<usize>,
    pub decoder_layers: Vec<usize>,
    pub seed: u64,
    pub mode: TrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            learning_rate: 1e-3,
            memory_size: 32,
            encoder_layers: vec![64, 64],
            decoder_layers: vec![64, 64],
            seed: 0,
            mode: TrainMode::Standard,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.memory_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!("training config must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn arch(&self, state_dim: usize, action_dim: usize) -> WorldModelArch {
        WorldModelArch {
            state_dim,
            action_dim,
            memory_size: self.memory_size,
            encoder_layers: self.encoder_layers.clone(),
            decoder_layers: self.decoder_layers.clone(),
        }
    }
}

/// A trained model and its per-epoch mean training loss.
#[derive(Clone, Debug)]
pub struct TrainOutcome<M, T> {
    pub model: M,
    pub loss_trace: Vec<T>,
}

/// Models trainable by [`train`]'s loop over whole trajectories.
pub trait TrainableModel<T: Scalar>: Parameterized<T> + Clone + Send + Sync {
    fn fit_normalizer(&mut self, normalizer: Normalizer<T>) -> Result<()>;

    /// Adds the gradient of one trajectory's loss into `grad` and returns the loss.
    fn loss_grad(&self, traj: &Trajectory<T>, permutation: Option<&[usize]>, grad: &mut [T]) -> Result<T>;
}

impl<T: Scalar> TrainableModel<T> for WorldModel<T> {
    fn fit_normalizer(&mut self, normalizer: Normalizer<T>) -> Result<()> {
        self.set_normalizer(normalizer)
    }

    fn loss_grad(&self, traj: &Trajectory<T>, permutation: Option<&[usize]>, grad: &mut [T]) -> Result<T> {
        self.trajectory_loss_grad(traj, permutation, grad)
    }
}

impl<T: Scalar> TrainableModel<T> for StatelessModel<T> {
    fn fit_normalizer(&mut self, normalizer: Normalizer<T>) -> Result<()> {
        self.set_normalizer(normalizer)
    }

    fn loss_grad(&self, traj: &Trajectory<T>, _permutation: Option<&[usize]>, grad: &mut [T]) -> Result<T> {
        self.trajectory_loss_grad(traj, grad)
    }
}

/// Mini-batch Adam over whole trajectories with full backpropagation through
/// time. Per-trajectory gradients may be computed on any number of threads;
/// they are reduced in batch order so results do not depend on scheduling.
fn fit<T: Scalar, M: TrainableModel<T>>(mut model: M, dataset: &[Trajectory<T>], cfg: &TrainConfig, shuffle_memory: bool) -> Result<TrainOutcome<M, T>> {
    model.fit_normalizer(Normalizer::fit(dataset)?)?;
    let adam = AdamConfig { learning_rate: cfg.learning_rate, ..AdamConfig::default() };
    let mut params = ParamVector::new(model.flat_params());
    let n_params = params.len();
    let count = T::from_usize(dataset.len()).unwrap();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut rng_from(cfg.seed, &[SHUFFLE, epoch as u64]));
        let mut epoch_loss = T::zero();
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<Result<(T, Vec<T>)>> = batch
                .par_iter()
                .map(|&i| {
                    let traj = &dataset[i];
                    let perm = shuffle_memory
                        .then(|| sample_permutation(traj.len(), &mut rng_from(cfg.seed, &[PERMUTE, epoch as u64, i as u64])));
                    let mut grad = vec![T::zero(); n_params];
                    let diverged = || Error::NonFiniteLoss { index: i, seed: traj.seed };
                    let loss = model.loss_grad(traj, perm.as_deref(), &mut grad).map_err(|e| match e {
                        Error::NonFinite(_) => diverged(),
                        other => other,
                    })?;
                    if !loss.is_finite() || !all_finite(&grad) {
                        return Err(diverged());
                    }
                    Ok((loss, grad))
                })
                .collect();
            params.zero_grad();
            for r in results {
                let (loss, grad) = r?;
                epoch_loss += loss;
                for (acc, g) in params.grad.iter_mut().zip(&grad) {
                    *acc += *g;
                }
            }
            let scale = T::one() / T::from_usize(batch.len()).unwrap();
            params.grad.iter_mut().for_each(|g| *g *= scale);
            params.adam_step(&adam)?;
            model.load_flat_params(&params.values)?;
        }
        let mean = epoch_loss / count;
        log::debug!("epoch {epoch}: loss {mean:e}");
        trace.push(mean);
    }
    Ok(TrainOutcome { model, loss_trace: trace })
}

fn dims<T: Scalar>(dataset: &[Trajectory<T>]) -> Result<(usize, usize)> {
    let first = dataset.first().ok_or_else(|| Error::InsufficientData("empty dataset".into()))?;
    let (sd, ad) = (first.env.state_dim(), first.env.action_dim());
    check_dataset(dataset, sd, ad)?;
    Ok((sd, ad))
}

/// Trains a recurrent world model in the mode selected by `cfg.mode`.
pub fn train<T: Scalar>(dataset: &[Trajectory<T>], cfg: &TrainConfig) -> Result<TrainOutcome<WorldModel<T>, T>> {
    cfg.validate()?;
    let (sd, ad) = dims(dataset)?;
    let model = WorldModel::new(cfg.arch(sd, ad), &mut rng_from(cfg.seed, &[INIT]))?;
    fit(model, dataset, cfg, cfg.mode == TrainMode::TimeInvariant)
}

/// Plain prediction-error training.
pub fn train_standard<T: Scalar>(dataset: &[Trajectory<T>], cfg: &TrainConfig) -> Result<TrainOutcome<WorldModel<T>, T>> {
    train(dataset, &TrainConfig { mode: TrainMode::Standard, ..cfg.clone() })
}

/// Training with the additional shuffled-memory prediction term.
pub fn train_time_invariant<T: Scalar>(dataset: &[Trajectory<T>], cfg: &TrainConfig) -> Result<TrainOutcome<WorldModel<T>, T>> {
    train(dataset, &TrainConfig { mode: TrainMode::TimeInvariant, ..cfg.clone() })
}

/// Trains the memoryless comparison model with the same budget.
pub fn train_stateless<T: Scalar>(dataset: &[Trajectory<T>], cfg: &TrainConfig) -> Result<TrainOutcome<StatelessModel<T>, T>> {
    cfg.validate()?;
    let (sd, ad) = dims(dataset)?;
    let model = StatelessModel::new(cfg.arch(sd, ad), &mut rng_from(cfg.seed, &[INIT]))?;
    fit(model, dataset, cfg, false)
}

/// Mean training objective over a dataset; `permutations`, when given, holds
/// one memory permutation per trajectory.
pub fn evaluate_loss<T: Scalar, M: TrainableModel<T>>(model: &M, dataset: &[Trajectory<T>], permutations: Option<&[Vec<usize>]>) -> Result<T> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData("empty dataset".into()));
    }
    if let Some(p) = permutations {
        crate::error::check_dim("permutation count", dataset.len(), p.len())?;
    }
    let mut scratch = vec![T::zero(); model.num_params()];
    let mut total = T::zero();
    for (i, traj) in dataset.iter().enumerate() {
        total += model.loss_grad(traj, permutations.map(|p| p[i].as_slice()), &mut scratch)?;
    }
    Ok(total / T::from_usize(dataset.len()).unwrap())
}

/// Teacher-forced one-step predictor, used to compare models feature by feature.
pub trait OneStepPredictor<T: Scalar>: Sync {
    /// Predictions of `s_{t+1}` for `t = 0 ..= len - 2`.
    fn one_step_predictions(&self, traj: &Trajectory<T>) -> Result<Vec<Vec<T>>>;
}

impl<T: Scalar> OneStepPredictor<T> for WorldModel<T> {
    fn one_step_predictions(&self, traj: &Trajectory<T>) -> Result<Vec<Vec<T>>> {
        let memories = memory_sequence(self, traj)?;
        (0..loss_terms(traj))
            .map(|t| Ok(self.predict(&traj.states[t], &traj.actions[t], &memories[t])?.0))
            .collect()
    }
}

impl<T: Scalar> OneStepPredictor<T> for StatelessModel<T> {
    fn one_step_predictions(&self, traj: &Trajectory<T>) -> Result<Vec<Vec<T>>> {
        (0..loss_terms(traj))
            .map(|t| self.predict(&traj.states[t], &traj.actions[t]))
            .collect()
    }
}

fn per_feature_mean<T: Scalar>(dataset: &[Trajectory<T>], mut row: impl FnMut(&Trajectory<T>) -> Result<Vec<Vec<T>>>) -> Result<Vec<T>> {
    let dim = dataset.first().ok_or_else(|| Error::InsufficientData("empty dataset".into()))?.states[0].len();
    let mut sums = vec![T::zero(); dim];
    let mut count = 0usize;
    for traj in dataset {
        for r in row(traj)? {
            for (s, x) in sums.iter_mut().zip(&r) {
                *s += *x;
            }
            count += 1;
        }
    }
    let c = T::from_usize(count.max(1)).unwrap();
    Ok(sums.into_iter().map(|s| s / c).collect())
}

/// Per-feature mean absolute one-step error in raw state units.
pub fn one_step_errors<T: Scalar, P: OneStepPredictor<T> + ?Sized>(model: &P, dataset: &[Trajectory<T>]) -> Result<Vec<T>> {
    per_feature_mean(dataset, |traj| {
        let preds = model.one_step_predictions(traj)?;
        Ok(preds
            .iter()
            .enumerate()
            .map(|(t, p)| p.iter().zip(&traj.states[t + 1]).map(|(&a, &b)| (a - b).abs()).collect())
            .collect())
    })
}

/// Per-feature mean absolute error of predicting `s_{t+1} = s_t`.
pub fn no_change_baseline<T: Scalar>(dataset: &[Trajectory<T>]) -> Result<Vec<T>> {
    per_feature_mean(dataset, |traj| {
        Ok((0..loss_terms(traj))
            .map(|t| traj.states[t].iter().zip(&traj.states[t + 1]).map(|(&a, &b)| (a - b).abs()).collect())
            .collect())
    })
}
