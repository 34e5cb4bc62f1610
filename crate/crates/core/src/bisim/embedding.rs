use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::DistanceDataset;
use crate::error::{check_dim, Error, Result};
use crate::nn::{Activation, AdamConfig, DenseNet, DenseTrace, ParamVector};
use crate::rng::rng_from;
use crate::scalar::{l1_distance, Scalar};

// memories per gradient chunk; fixed so the reduction order never depends on thread count
const CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Output dimension.
    pub dim: usize,
    pub hidden_layers: Vec<usize>,
    /// Full passes over the training pairs.
    pub epochs: usize,
    pub batch_pairs: usize,
    pub learning_rate: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dim: 8,
            hidden_layers: vec![64, 64],
            epochs: 500,
            batch_pairs: 1024,
            learning_rate: 1e-3,
            holdout_fraction: 0.1,
            seed: 0,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.batch_pairs == 0 || self.hidden_layers.contains(&0) {
            return Err(Error::InvalidArgument("embedding sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::InvalidArgument(format!("holdout fraction {} outside [0, 1)", self.holdout_fraction)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Feed-forward map from a memory vector to a point whose L1 distances
/// approximate latent bisimulation distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EmbeddingModel<T: Scalar> {
    pub net: DenseNet<T>,
}

impl<T: Scalar> EmbeddingModel<T> {
    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.net.output_dim()
    }
}

/// Applies the embedding to a memory vector.
pub fn embed<T: Scalar>(model: &EmbeddingModel<T>, memory: &[T]) -> Result<Vec<T>> {
    model.net.forward(memory)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EmbeddingOutcome<T: Scalar> {
    pub model: EmbeddingModel<T>,
    /// Mean absolute stress over training pairs during each epoch, in raw units.
    pub loss_trace: Vec<f64>,
    pub train_pairs: usize,
    pub heldout_pairs: usize,
    /// Mean `| ||e_i - e_j||_1 - d_ij |` over held-out pairs.
    pub heldout_stress: f64,
    /// Mean target distance over held-out pairs.
    pub heldout_mean_distance: f64,
}

impl<T: Scalar> EmbeddingOutcome<T> {
    /// Held-out stress as a fraction of the mean held-out distance; zero when
    /// both are zero.
    pub fn relative_stress(&self) -> f64 {
        if self.heldout_mean_distance > 0.0 {
            self.heldout_stress / self.heldout_mean_distance
        } else if self.heldout_stress == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Mean over `pairs` of `| ||e(x_i) - e(x_j)||_1 - d |` for `(i, j, d)` with
/// `x = inputs`, adding its parameter gradient into `grad`. Only the inputs
/// named by some pair are evaluated.
pub fn stress_loss_grad<T: Scalar>(net: &DenseNet<T>, inputs: &[&[T]], pairs: &[(usize, usize, T)], grad: &mut [T]) -> Result<T> {
    check_dim("embedding gradient", net.params().len(), grad.len())?;
    if pairs.is_empty() {
        return Ok(T::zero());
    }
    // inputs touched by the pairs, in first-seen order
    let mut slot = std::collections::HashMap::new();
    let mut members = Vec::new();
    for &(i, j, _) in pairs {
        for m in [i, j] {
            if m >= inputs.len() {
                return Err(Error::InvalidArgument(format!("pair index {m} out of range")));
            }
            slot.entry(m).or_insert_with(|| {
                members.push(m);
                members.len() - 1
            });
        }
    }
    let traces: Vec<DenseTrace<T>> = members.par_iter().map(|&m| net.forward_traced(inputs[m])).collect::<Result<_>>()?;

    let dim = net.output_dim();
    let weight = T::one() / T::from_usize(pairs.len()).unwrap();
    let mut loss = T::zero();
    let mut grad_emb = vec![vec![T::zero(); dim]; members.len()];
    for &(i, j, d) in pairs {
        let (a, b) = (slot[&i], slot[&j]);
        let (ei, ej) = (traces[a].output(), traces[b].output());
        let resid = l1_distance(ei, ej) - d;
        loss += resid.abs();
        let r = resid.sign0() * weight;
        for k in 0..dim {
            let g = r * (ei[k] - ej[k]).sign0();
            grad_emb[a][k] += g;
            grad_emb[b][k] -= g;
        }
    }

    let chunk_grads: Vec<Vec<T>> = traces
        .par_chunks(CHUNK)
        .zip(grad_emb.par_chunks(CHUNK))
        .map(|(ts, gs)| {
            let mut acc = vec![T::zero(); grad.len()];
            for (t, g) in ts.iter().zip(gs) {
                net.backward(t, g, &mut acc);
            }
            acc
        })
        .collect();
    for g in &chunk_grads {
        for (p, x) in grad.iter_mut().zip(g) {
            *p += *x;
        }
    }
    Ok(loss * weight)
}

/// Fits an embedding so that L1 distances match the dataset, minimizing the
/// mean absolute stress with Adam over shuffled pair minibatches.
///
/// Unordered pairs `i < j` are split once into training and held-out sets.
/// When the held-out share rounds to zero pairs, stress is reported on the
/// training pairs instead. Targets are divided by their mean over training
/// pairs while fitting, and the output layer is rescaled at the end, so the
/// result does not depend on the units of the distances.
pub fn train_embedding<T: Scalar>(data: &DistanceDataset<T>, cfg: &EmbeddingConfig) -> Result<EmbeddingOutcome<T>> {
    cfg.validate()?;
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} memories, need at least 2")));
    }
    let input = data.memories[0].h.len();
    for m in &data.memories {
        check_dim("embedding input", input, m.h.len())?;
    }
    let mut dims = vec![input];
    dims.extend(&cfg.hidden_layers);
    dims.push(cfg.dim);
    let mut net = DenseNet::mlp(&dims, Activation::Identity, &mut rng_from(cfg.seed, &[1]))?;

    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    pairs.shuffle(&mut rng_from(cfg.seed, &[2]));
    let n_hold = (pairs.len() as f64 * cfg.holdout_fraction).floor() as usize;
    let n_hold = n_hold.min(pairs.len() - 1);
    let heldout: Vec<(usize, usize)> = pairs[..n_hold].to_vec();
    let mut train: Vec<(usize, usize)> = pairs[n_hold..].to_vec();

    // fit distances divided by their training mean; the scale is folded back
    // into the output layer afterwards so the model reproduces raw units
    let mean_train = train.iter().map(|&(i, j)| data.get(i, j).to_f64_lossy()).sum::<f64>() / train.len() as f64;
    let scale = if mean_train > 0.0 { mean_train } else { 1.0 };
    let inv_scale = T::lit(1.0 / scale);

    let adam = AdamConfig { learning_rate: cfg.learning_rate, ..AdamConfig::default() };
    let mut params = ParamVector::new(net.params().to_vec());
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let inputs: Vec<&[T]> = data.memories.iter().map(|m| m.h.as_slice()).collect();
    for epoch in 0..cfg.epochs {
        train.shuffle(&mut rng_from(cfg.seed, &[3, epoch as u64]));
        let mut epoch_loss = 0.0;
        for batch in train.chunks(cfg.batch_pairs) {
            let scaled: Vec<(usize, usize, T)> = batch.iter().map(|&(i, j)| (i, j, data.get(i, j) * inv_scale)).collect();
            params.zero_grad();
            let loss = stress_loss_grad(&net, &inputs, &scaled, &mut params.grad)?;
            epoch_loss += loss.to_f64_lossy() * batch.len() as f64 * scale;
            params.adam_step(&adam)?;
            net.params_mut().copy_from_slice(&params.values);
        }
        loss_trace.push(epoch_loss / train.len() as f64);
    }

    let last = net.num_layers() - 1;
    let (w, b) = net.layer_mut(last);
    for x in w.iter_mut().chain(b.iter_mut()) {
        *x *= T::lit(scale);
    }
    let model = EmbeddingModel { net };
    let report = if heldout.is_empty() { &train } else { &heldout };
    let embedded = data.memories.iter().map(|m| embed(&model, &m.h)).collect::<Result<Vec<_>>>()?;
    let (mut stress, mut mean) = (0.0, 0.0);
    for &(i, j) in report {
        let d = data.get(i, j).to_f64_lossy();
        stress += (l1_distance(&embedded[i], &embedded[j]).to_f64_lossy() - d).abs();
        mean += d;
    }
    let count = report.len() as f64;
    Ok(EmbeddingOutcome {
        model,
        loss_trace,
        train_pairs: train.len(),
        heldout_pairs: heldout.len(),
        heldout_stress: stress / count,
        heldout_mean_distance: mean / count,
    })
}
