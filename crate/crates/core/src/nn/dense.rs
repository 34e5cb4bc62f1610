use serde::{Deserialize, Serialize};

use super::{uniform_fill, Parameterized};
use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed in terms of the activation output.
    #[inline]
    fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::Identity => T::one(),
        }
    }
}

/// Fully connected feed-forward network.
///
/// Parameter layout, per layer in order: the `out x in` weight matrix in
/// row-major order followed by the `out` bias vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DenseNet<T: Scalar> {
    dims: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<T>,
}

/// Activations recorded by [`DenseNet::forward_traced`]; entry 0 is the input.
#[derive(Clone, Debug)]
pub struct DenseTrace<T> {
    pub activations: Vec<Vec<T>>,
}

impl<T> DenseTrace<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("trace holds at least the input")
    }
}

impl<T: Scalar> DenseNet<T> {
    /// Zero-initialized network. `activations` has one entry per layer.
    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument(
                "a dense net needs at least input and output dimensions".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidArgument("layer dimensions must be positive".into()));
        }
        check_dim("dense activations", dims.len() - 1, activations.len())?;
        let n = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            dims: dims.to_vec(),
            activations: activations.to_vec(),
            params: vec![T::zero(); n],
        })
    }

    /// Multi-layer perceptron with tanh hidden layers and the given output
    /// activation, weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn mlp(dims: &[usize], output: Activation, rng: &mut Rng) -> Result<Self> {
        let layers = dims.len().saturating_sub(1);
        let mut acts = vec![Activation::Tanh; layers];
        if let Some(last) = acts.last_mut() {
            *last = output;
        }
        let mut net = Self::zeros(dims, &acts)?;
        for l in 0..layers {
            let bound = 1.0 / (dims[l] as f64).sqrt();
            let (w, b) = net.layer_mut(l);
            uniform_fill(w, bound, rng);
            uniform_fill(b, bound, rng);
        }
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.activations.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.dims[..=layer]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// `(weights, bias)` of one layer.
    pub fn layer(&self, layer: usize) -> (&[T], &[T]) {
        let off = self.layer_offset(layer);
        let (i, o) = (self.dims[layer], self.dims[layer + 1]);
        let (w, rest) = self.params[off..].split_at(i * o);
        (w, &rest[..o])
    }

    pub fn layer_mut(&mut self, layer: usize) -> (&mut [T], &mut [T]) {
        let off = self.layer_offset(layer);
        let (i, o) = (self.dims[layer], self.dims[layer + 1]);
        let (w, rest) = self.params[off..].split_at_mut(i * o);
        (w, &mut rest[..o])
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        check_dim("dense input", self.input_dim(), input.len())?;
        let mut x = input.to_vec();
        let mut offset = 0;
        for (l, act) in self.activations.iter().enumerate() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            x = affine(&self.params[offset..], n_in, n_out, &x, *act);
            offset += n_in * n_out + n_out;
        }
        Ok(x)
    }

    /// Forward pass that keeps every layer's activation for [`Self::backward`].
    pub fn forward_traced(&self, input: &[T]) -> Result<DenseTrace<T>> {
        check_dim("dense input", self.input_dim(), input.len())?;
        let mut activations = Vec::with_capacity(self.dims.len());
        activations.push(input.to_vec());
        let mut offset = 0;
        for (l, act) in self.activations.iter().enumerate() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let y = affine(&self.params[offset..], n_in, n_out, &activations[l], *act);
            activations.push(y);
            offset += n_in * n_out + n_out;
        }
        Ok(DenseTrace { activations })
    }

    /// Backpropagates `grad_out` (gradient w.r.t. the output), accumulating
    /// parameter gradients into `grad_params` and returning the input gradient.
    pub fn backward(&self, trace: &DenseTrace<T>, grad_out: &[T], grad_params: &mut [T]) -> Vec<T> {
        debug_assert_eq!(grad_params.len(), self.params.len());
        debug_assert_eq!(grad_out.len(), self.output_dim());
        let mut delta = grad_out.to_vec();
        let mut offset = self.params.len();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            offset -= n_in * n_out + n_out;
            let y = &trace.activations[l + 1];
            let x = &trace.activations[l];
            for (d, &yo) in delta.iter_mut().zip(y) {
                *d *= self.activations[l].derivative_from_output(yo);
            }
            let w = &self.params[offset..offset + n_in * n_out];
            let (gw, gb) = grad_params[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let mut grad_in = vec![T::zero(); n_in];
            for o in 0..n_out {
                let d = delta[o];
                gb[o] += d;
                if d == T::zero() {
                    continue;
                }
                let row = o * n_in..(o + 1) * n_in;
                super::outer_accumulate(d, x, &w[row.clone()], &mut gw[row], &mut grad_in);
            }
            delta = grad_in;
        }
        delta
    }
}

/// `act(W x + b)` for one layer whose parameters start at `params[0]`.
#[inline]
fn affine<T: Scalar>(params: &[T], n_in: usize, n_out: usize, x: &[T], act: Activation) -> Vec<T> {
    let (w, rest) = params.split_at(n_in * n_out);
    let b = &rest[..n_out];
    (0..n_out)
        .map(|o| {
            let row = &w[o * n_in..(o + 1) * n_in];
            let s = b[o] + super::dot(row, x);
            act.apply(s)
        })
        .collect()
}

impl<T: Scalar> Parameterized<T> for DenseNet<T> {
    fn segments(&self) -> Vec<&[T]> {
        vec![&self.params]
    }

    fn segments_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.params]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{central_difference, max_relative_error};
    use crate::rng::rng_from;
    use rand::Rng as _;

    #[test]
    fn zero_weights_output_the_bias() {
        let mut net = DenseNet::<f64>::zeros(&[3, 2], &[Activation::Identity]).unwrap();
        net.layer_mut(0).1.copy_from_slice(&[0.25, -4.0]);
        assert_eq!(net.forward(&[7.0, -1.0, 3.5]).unwrap(), vec![0.25, -4.0]);
    }

    #[test]
    fn identity_weights_reproduce_input() {
        let mut net = DenseNet::<f64>::zeros(&[3, 3], &[Activation::Identity]).unwrap();
        let (w, _) = net.layer_mut(0);
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let x = [0.3, -1.7, 12.0];
        assert_eq!(net.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn wrong_input_length_is_rejected() {
        let net = DenseNet::<f64>::zeros(&[2, 3, 1], &[Activation::Tanh, Activation::Identity]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
        assert!(DenseNet::<f64>::zeros(&[2, 3], &[Activation::Tanh, Activation::Tanh]).is_err());
        assert!(DenseNet::<f64>::zeros(&[2, 0, 1], &[Activation::Tanh, Activation::Tanh]).is_err());
    }

    #[test]
    fn forward_is_bit_reproducible() {
        let mut rng = rng_from(1, &[]);
        let net = DenseNet::<f64>::mlp(&[4, 8, 3], Activation::Identity, &mut rng).unwrap();
        let x = [0.1, 0.2, -0.3, 0.9];
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert_eq!(a, b);
        assert_eq!(net.forward_traced(&x).unwrap().output(), &a[..]);
    }

    #[test]
    fn input_gradient_matches_finite_differences_2_3_2() {
        for seed in 0..10 {
            let mut rng = rng_from(seed, &[0xd3]);
            let net = DenseNet::<f64>::mlp(&[2, 3, 2], Activation::Identity, &mut rng).unwrap();
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let proj: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let objective = |inp: &[f64]| -> f64 {
                net.forward(inp).unwrap().iter().zip(&proj).map(|(y, p)| y * p).sum()
            };
            let trace = net.forward_traced(&x).unwrap();
            let mut gp = vec![0.0; net.params().len()];
            let analytic = net.backward(&trace, &proj, &mut gp);
            let numeric = central_difference(objective, &x, 1e-5);
            assert!(max_relative_error(&analytic, &numeric, 1e-8) < 1e-6);
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let mut rng = rng_from(9, &[]);
        let net = DenseNet::<f64>::mlp(&[3, 5, 4, 2], Activation::Identity, &mut rng).unwrap();
        let x = [0.4, -0.8, 0.15];
        let proj = [0.7, -1.3];
        let trace = net.forward_traced(&x).unwrap();
        let mut analytic = vec![0.0; net.params().len()];
        net.backward(&trace, &proj, &mut analytic);
        let numeric = central_difference(
            |p: &[f64]| {
                let mut probe = net.clone();
                probe.params_mut().copy_from_slice(p);
                probe.forward(&x).unwrap().iter().zip(&proj).map(|(y, q)| y * q).sum()
            },
            net.params(),
            1e-5,
        );
        assert!(max_relative_error(&analytic, &numeric, 1e-8) < 1e-6);
    }
}
