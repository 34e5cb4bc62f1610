use serde::{Deserialize, Serialize};

use super::model::WorldModelArch;
use super::normalize::Normalizer;
use crate::envs::Trajectory;
use crate::error::{check_dim, Error, Result};
use crate::nn::{l1_loss_into, Activation, DenseNet, Parameterized};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Memoryless counterpart of [`super::WorldModel`]: the same encoder and
/// decoder widths with the GRU removed, mapping `(s, a)` straight to the
/// next state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StatelessModel<T: Scalar> {
    arch: WorldModelArch,
    normalizer: Normalizer<T>,
    encoder: DenseNet<T>,
    decoder: DenseNet<T>,
}

impl<T: Scalar> StatelessModel<T> {
    pub fn new(arch: WorldModelArch, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let encoder = DenseNet::mlp(&arch.encoder_dims(), Activation::Tanh, rng)?;
        let decoder = DenseNet::mlp(&arch.decoder_dims(0), Activation::Identity, rng)?;
        let normalizer = Normalizer::identity(arch.state_dim, arch.action_dim);
        Ok(Self { arch, normalizer, encoder, decoder })
    }

    pub fn arch(&self) -> &WorldModelArch {
        &self.arch
    }

    pub fn normalizer(&self) -> &Normalizer<T> {
        &self.normalizer
    }

    pub fn set_normalizer(&mut self, normalizer: Normalizer<T>) -> Result<()> {
        check_dim("normalizer state", self.arch.state_dim, normalizer.state_dim())?;
        normalizer.validate()?;
        self.normalizer = normalizer;
        Ok(())
    }

    pub fn predict(&self, state: &[T], action: &[T]) -> Result<Vec<T>> {
        check_dim("stateless model state", self.arch.state_dim, state.len())?;
        check_dim("stateless model action", self.arch.action_dim, action.len())?;
        let enc = self.encoder.forward(&self.normalizer.input(state, action))?;
        let delta = self.decoder.forward(&enc)?;
        if delta.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("stateless decoder output".into()));
        }
        Ok(self.normalizer.apply_delta(state, &delta))
    }

    pub(crate) fn trajectory_loss_grad(&self, traj: &Trajectory<T>, grad: &mut [T]) -> Result<T> {
        let terms = super::loss_terms(traj);
        if terms == 0 {
            return Err(Error::InsufficientData("trajectory needs at least 2 transitions".into()));
        }
        let weight = T::one() / T::from_usize(terms).unwrap();
        let (g_enc, g_dec) = grad.split_at_mut(self.encoder.params().len());
        let mut total = T::zero();
        for t in 0..terms {
            let enc = self.encoder.forward_traced(&self.normalizer.input(&traj.states[t], &traj.actions[t]))?;
            let dec = self.decoder.forward_traced(enc.output())?;
            let target = self.normalizer.delta_target(&traj.states[t], &traj.states[t + 1]);
            let mut d_out = vec![T::zero(); target.len()];
            total += l1_loss_into(dec.output(), &target, weight, &mut d_out);
            let d_enc = self.decoder.backward(&dec, &d_out, g_dec);
            self.encoder.backward(&enc, &d_enc, g_enc);
        }
        Ok(total * weight)
    }
}

impl<T: Scalar> Parameterized<T> for StatelessModel<T> {
    fn segments(&self) -> Vec<&[T]> {
        vec![self.encoder.params(), self.decoder.params()]
    }

    fn segments_mut(&mut self) -> Vec<&mut [T]> {
        vec![self.encoder.params_mut(), self.decoder.params_mut()]
    }
}
