use serde::{Deserialize, Serialize};

use super::normalize::Normalizer;
use crate::envs::Trajectory;
use crate::error::{check_dim, Error, Result};
use crate::nn::{l1_loss_into, Activation, DenseNet, DenseTrace, GruCell, GruTrace, Parameterized};
use crate::rng::Rng;
use crate::scalar::{all_finite, Scalar};

/// Layer sizes of a [`WorldModel`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldModelArch {
    pub state_dim: usize,
    pub action_dim: usize,
    pub memory_size: usize,
    /// Encoder layer widths; the last one is the encoder output size.
    pub encoder_layers: Vec<usize>,
    /// Decoder hidden layer widths (the output layer is `state_dim`).
    pub decoder_layers: Vec<usize>,
}

impl WorldModelArch {
    pub fn validate(&self) -> Result<()> {
        let dims = [self.state_dim, self.action_dim, self.memory_size];
        if dims.contains(&0) || self.encoder_layers.is_empty() || self.encoder_layers.contains(&0) || self.decoder_layers.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid world model architecture {self:?}")));
        }
        Ok(())
    }

    pub fn encoder_output(&self) -> usize {
        *self.encoder_layers.last().unwrap()
    }

    pub(crate) fn encoder_dims(&self) -> Vec<usize> {
        std::iter::once(self.state_dim + self.action_dim).chain(self.encoder_layers.iter().copied()).collect()
    }

    /// Decoder widths when it reads `extra` memory features besides the encoder output.
    pub(crate) fn decoder_dims(&self, extra: usize) -> Vec<usize> {
        std::iter::once(extra + self.encoder_output())
            .chain(self.decoder_layers.iter().copied())
            .chain(std::iter::once(self.state_dim))
            .collect()
    }
}

/// Recurrent memory `h_t` tagged with where it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MemoryState<T: Scalar> {
    pub h: Vec<T>,
    pub t: usize,
    pub source: Option<u64>,
}

impl<T: Scalar> MemoryState<T> {
    pub fn zero(size: usize) -> Self {
        Self { h: vec![T::zero(); size], t: 0, source: None }
    }
}

/// Encoder MLP over normalized `(s, a)`, a GRU over the encoding, and a
/// decoder reading `[GRU output, encoder output]` that predicts the
/// normalized state delta.
///
/// With memory `h`, the one-step prediction is `s + delta` and the next
/// memory is the GRU output. Parameter order: encoder, GRU, decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WorldModel<T: Scalar> {
    arch: WorldModelArch,
    normalizer: Normalizer<T>,
    encoder: DenseNet<T>,
    gru: GruCell<T>,
    decoder: DenseNet<T>,
}

/// Forward record of one time step.
pub(crate) struct StepTrace<T> {
    pub enc: DenseTrace<T>,
    pub gru: GruTrace<T>,
}

fn finite_or<T: Scalar>(xs: &[T], layer: &str) -> Result<()> {
    if all_finite(xs) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{layer} output")))
    }
}

impl<T: Scalar> WorldModel<T> {
    /// Randomly initialized model with identity normalization.
    pub fn new(arch: WorldModelArch, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let encoder = DenseNet::mlp(&arch.encoder_dims(), Activation::Tanh, rng)?;
        let gru = GruCell::init(arch.encoder_output(), arch.memory_size, rng)?;
        let decoder = DenseNet::mlp(&arch.decoder_dims(arch.memory_size), Activation::Identity, rng)?;
        let normalizer = Normalizer::identity(arch.state_dim, arch.action_dim);
        Ok(Self { arch, normalizer, encoder, gru, decoder })
    }

    pub fn arch(&self) -> &WorldModelArch {
        &self.arch
    }

    pub fn memory_size(&self) -> usize {
        self.arch.memory_size
    }

    pub fn normalizer(&self) -> &Normalizer<T> {
        &self.normalizer
    }

    pub fn set_normalizer(&mut self, normalizer: Normalizer<T>) -> Result<()> {
        check_dim("normalizer state", self.arch.state_dim, normalizer.state_dim())?;
        check_dim("normalizer action", self.arch.action_dim, normalizer.action_dim())?;
        normalizer.validate()?;
        self.normalizer = normalizer;
        Ok(())
    }

    pub fn encoder(&self) -> &DenseNet<T> {
        &self.encoder
    }

    pub fn gru(&self) -> &GruCell<T> {
        &self.gru
    }

    pub fn decoder(&self) -> &DenseNet<T> {
        &self.decoder
    }

    pub fn decoder_mut(&mut self) -> &mut DenseNet<T> {
        &mut self.decoder
    }

    /// Encoder output for `(s, a)`; depends on neither memory nor time.
    pub fn encode(&self, state: &[T], action: &[T]) -> Result<Vec<T>> {
        check_dim("world model state", self.arch.state_dim, state.len())?;
        check_dim("world model action", self.arch.action_dim, action.len())?;
        let out = self.encoder.forward(&self.normalizer.input(state, action))?;
        finite_or(&out, "encoder")?;
        Ok(out)
    }

    /// Prediction and next memory given a precomputed encoding of `(s, a)`.
    pub fn predict_from_encoding(&self, state: &[T], encoding: &[T], memory: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let next = self.gru.step(encoding, memory)?;
        finite_or(&next, "GRU")?;
        let mut dec_in = next.clone();
        dec_in.extend_from_slice(encoding);
        let delta = self.decoder.forward(&dec_in)?;
        finite_or(&delta, "decoder")?;
        Ok((self.normalizer.apply_delta(state, &delta), next))
    }

    /// `(predicted next state, next memory)` from `(s, a, h)`.
    pub fn predict(&self, state: &[T], action: &[T], memory: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        check_dim("world model memory", self.arch.memory_size, memory.len())?;
        let enc = self.encode(state, action)?;
        self.predict_from_encoding(state, &enc, memory)
    }

    pub fn forward(&self, state: &[T], action: &[T], memory: &MemoryState<T>) -> Result<(Vec<T>, MemoryState<T>)> {
        let (pred, h) = self.predict(state, action, &memory.h)?;
        Ok((pred, MemoryState { h, t: memory.t + 1, source: memory.source }))
    }

    pub(crate) fn step_traced(&self, state: &[T], action: &[T], memory: &[T]) -> Result<StepTrace<T>> {
        let enc = self.encoder.forward_traced(&self.normalizer.input(state, action))?;
        let gru = self.gru.step_traced(enc.output(), memory)?;
        Ok(StepTrace { enc, gru })
    }

    fn decoder_input(gru_out: &[T], enc_out: &[T]) -> Vec<T> {
        let mut v = gru_out.to_vec();
        v.extend_from_slice(enc_out);
        v
    }

    /// Loss of one trajectory, adding its gradient into `grad`.
    ///
    /// Without a permutation this is the mean over `t = 0 ..= T-2` of the L1
    /// error of the normalized delta. With a permutation `p` of `{0..=T}`, each
    /// term also includes the error of the prediction made with memory
    /// `h_{p(t)}` instead of `h_t`; gradients flow through both uses.
    pub(crate) fn trajectory_loss_grad(&self, traj: &Trajectory<T>, permutation: Option<&[usize]>, grad: &mut [T]) -> Result<T> {
        let n = traj.len();
        let terms = super::loss_terms(traj);
        if terms == 0 {
            return Err(Error::InsufficientData("trajectory needs at least 2 transitions".into()));
        }
        if let Some(p) = permutation {
            check_dim("memory permutation", n + 1, p.len())?;
        }
        let m = self.arch.memory_size;
        let weight = T::one() / T::from_usize(terms).unwrap();

        // forward: h_0 .. h_n
        let mut steps: Vec<StepTrace<T>> = Vec::with_capacity(n);
        let mut memories: Vec<Vec<T>> = Vec::with_capacity(n + 1);
        memories.push(vec![T::zero(); m]);
        for t in 0..n {
            let st = self.step_traced(&traj.states[t], &traj.actions[t], &memories[t])?;
            memories.push(st.gru.output.clone());
            steps.push(st);
        }

        let n_enc = self.encoder.params().len();
        let n_gru = self.gru.params().len();
        let (g_enc, rest) = grad.split_at_mut(n_enc);
        let (g_gru, g_dec) = rest.split_at_mut(n_gru);

        let mut d_enc: Vec<Vec<T>> = vec![vec![T::zero(); self.arch.encoder_output()]; n];
        let mut d_mem: Vec<Vec<T>> = vec![vec![T::zero(); m]; n + 1];
        let mut standard = T::zero();
        let mut shuffled = T::zero();
        let out_dim = self.arch.state_dim;

        for t in 0..terms {
            let target = self.normalizer.delta_target(&traj.states[t], &traj.states[t + 1]);
            let enc_out = steps[t].enc.output();
            let dec = self.decoder.forward_traced(&Self::decoder_input(&memories[t + 1], enc_out))?;
            let mut d_out = vec![T::zero(); out_dim];
            let loss = l1_loss_into(dec.output(), &target, weight, &mut d_out);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("prediction at step {t}")));
            }
            standard += loss;

            let same = permutation.is_some_and(|p| p[t] == t);
            if same {
                // shuffled prediction coincides with the standard one
                shuffled += loss;
                d_out.iter_mut().for_each(|g| *g = *g + *g);
            }
            let d_in = self.decoder.backward(&dec, &d_out, g_dec);
            for i in 0..m {
                d_mem[t + 1][i] += d_in[i];
            }
            for (d, g) in d_enc[t].iter_mut().zip(&d_in[m..]) {
                *d += *g;
            }

            if let (Some(p), false) = (permutation, same) {
                let k = p[t];
                let gru = self.gru.step_traced(enc_out, &memories[k])?;
                let dec = self.decoder.forward_traced(&Self::decoder_input(&gru.output, enc_out))?;
                let mut d_out = vec![T::zero(); out_dim];
                let loss = l1_loss_into(dec.output(), &target, weight, &mut d_out);
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("shuffled prediction at step {t}")));
                }
                shuffled += loss;
                let d_in = self.decoder.backward(&dec, &d_out, g_dec);
                let (dx, dh) = self.gru.backward(&gru, &d_in[..m], g_gru);
                for i in 0..m {
                    d_mem[k][i] += dh[i];
                }
                for ((d, a), b) in d_enc[t].iter_mut().zip(&dx).zip(&d_in[m..]) {
                    *d += *a + *b;
                }
            }
        }

        // backpropagation through time
        for t in (0..n).rev() {
            let (head, tail) = d_mem.split_at_mut(t + 1);
            let (dx, dh) = self.gru.backward(&steps[t].gru, &tail[0], g_gru);
            for (a, b) in head[t].iter_mut().zip(&dh) {
                *a += *b;
            }
            for (a, b) in d_enc[t].iter_mut().zip(&dx) {
                *a += *b;
            }
            if d_enc[t].iter().any(|g| *g != T::zero()) {
                self.encoder.backward(&steps[t].enc, &d_enc[t], g_enc);
            }
        }

        Ok(if permutation.is_some() { (standard + shuffled) * weight } else { standard * weight })
    }
}

impl<T: Scalar> Parameterized<T> for WorldModel<T> {
    fn segments(&self) -> Vec<&[T]> {
        vec![self.encoder.params(), self.gru.params(), self.decoder.params()]
    }

    fn segments_mut(&mut self) -> Vec<&mut [T]> {
        vec![self.encoder.params_mut(), self.gru.params_mut(), self.decoder.params_mut()]
    }
}
