use serde::{Deserialize, Serialize};

use super::{uniform_fill, Parameterized};
use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Gated recurrent unit:
///
/// ```text
/// z  = sigmoid(W_z x + U_z h + b_z)
/// r  = sigmoid(W_r x + U_r h + b_r)
/// c  = tanh(W_c x + U_c (r * h) + b_c)
/// h' = (1 - z) * h + z * c
/// ```
///
/// Parameters are stored gate by gate (update, reset, candidate), each gate as
/// `W (hidden x input)`, `U (hidden x hidden)` and `b (hidden)`, matrices row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GruCell<T: Scalar> {
    input_dim: usize,
    hidden_dim: usize,
    params: Vec<T>,
}

/// Intermediate values of one [`GruCell::step_traced`] call.
#[derive(Clone, Debug)]
pub struct GruTrace<T> {
    pub input: Vec<T>,
    pub hidden: Vec<T>,
    pub update: Vec<T>,
    pub reset: Vec<T>,
    pub candidate: Vec<T>,
    pub output: Vec<T>,
}

const UPDATE: usize = 0;
const RESET: usize = 1;
const CANDIDATE: usize = 2;

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Scalar> GruCell<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::InvalidArgument("GRU dimensions must be positive".into()));
        }
        let block = hidden_dim * (input_dim + hidden_dim + 1);
        Ok(Self {
            input_dim,
            hidden_dim,
            params: vec![T::zero(); 3 * block],
        })
    }

    /// Uniform init with bound `1/sqrt(fan_in)` per matrix (`1/sqrt(hidden)` for biases).
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Result<Self> {
        let mut cell = Self::zeros(input_dim, hidden_dim)?;
        let (wb, ub) = (1.0 / (input_dim as f64).sqrt(), 1.0 / (hidden_dim as f64).sqrt());
        for gate in 0..3 {
            let (w, u, b) = cell.gate_mut(gate);
            uniform_fill(w, wb, rng);
            uniform_fill(u, ub, rng);
            uniform_fill(b, ub, rng);
        }
        Ok(cell)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn block(&self) -> usize {
        self.hidden_dim * (self.input_dim + self.hidden_dim + 1)
    }

    fn split_gate<'a>(&self, p: &'a [T]) -> (&'a [T], &'a [T], &'a [T]) {
        let (n, h) = (self.input_dim, self.hidden_dim);
        let (w, rest) = p.split_at(h * n);
        let (u, b) = rest.split_at(h * h);
        (w, u, &b[..h])
    }

    /// `(W, U, b)` of gate 0 (update), 1 (reset) or 2 (candidate).
    pub fn gate(&self, gate: usize) -> (&[T], &[T], &[T]) {
        let off = gate * self.block();
        self.split_gate(&self.params[off..off + self.block()])
    }

    pub fn gate_mut(&mut self, gate: usize) -> (&mut [T], &mut [T], &mut [T]) {
        let (n, h, block) = (self.input_dim, self.hidden_dim, self.block());
        let p = &mut self.params[gate * block..(gate + 1) * block];
        let (w, rest) = p.split_at_mut(h * n);
        let (u, b) = rest.split_at_mut(h * h);
        (w, u, b)
    }

    /// `W x + U m + b` for one gate.
    fn preactivation(&self, gate: usize, x: &[T], m: &[T]) -> Vec<T> {
        let (w, u, b) = self.gate(gate);
        let (n, h) = (self.input_dim, self.hidden_dim);
        (0..h)
            .map(|o| {
                b[o] + super::dot(&w[o * n..(o + 1) * n], x) + super::dot(&u[o * h..(o + 1) * h], m)
            })
            .collect()
    }

    fn check(&self, input: &[T], hidden: &[T]) -> Result<()> {
        check_dim("GRU input", self.input_dim, input.len())?;
        check_dim("GRU hidden state", self.hidden_dim, hidden.len())
    }

    pub fn step(&self, input: &[T], hidden: &[T]) -> Result<Vec<T>> {
        Ok(self.step_traced(input, hidden)?.output)
    }

    pub fn step_traced(&self, input: &[T], hidden: &[T]) -> Result<GruTrace<T>> {
        self.check(input, hidden)?;
        let update: Vec<T> = self.preactivation(UPDATE, input, hidden).into_iter().map(sigmoid).collect();
        let reset: Vec<T> = self.preactivation(RESET, input, hidden).into_iter().map(sigmoid).collect();
        let gated: Vec<T> = reset.iter().zip(hidden).map(|(&r, &h)| r * h).collect();
        let candidate: Vec<T> = self
            .preactivation(CANDIDATE, input, &gated)
            .into_iter()
            .map(|x| x.tanh())
            .collect();
        let output = (0..self.hidden_dim)
            .map(|i| (T::one() - update[i]) * hidden[i] + update[i] * candidate[i])
            .collect();
        Ok(GruTrace {
            input: input.to_vec(),
            hidden: hidden.to_vec(),
            update,
            reset,
            candidate,
            output,
        })
    }

    /// Backpropagates `grad_out` through one step. Parameter gradients are
    /// accumulated into `grad_params`; returns `(d input, d hidden)`.
    pub fn backward(&self, trace: &GruTrace<T>, grad_out: &[T], grad_params: &mut [T]) -> (Vec<T>, Vec<T>) {
        debug_assert_eq!(grad_params.len(), self.params.len());
        let (n, h) = (self.input_dim, self.hidden_dim);
        let one = T::one();
        let mut d_input = vec![T::zero(); n];
        let mut d_hidden: Vec<T> = (0..h).map(|i| grad_out[i] * (one - trace.update[i])).collect();

        let d_cand_pre: Vec<T> = (0..h)
            .map(|i| {
                let c = trace.candidate[i];
                grad_out[i] * trace.update[i] * (one - c * c)
            })
            .collect();
        let d_update_pre: Vec<T> = (0..h)
            .map(|i| {
                let z = trace.update[i];
                grad_out[i] * (trace.candidate[i] - trace.hidden[i]) * z * (one - z)
            })
            .collect();

        let gated: Vec<T> = trace.reset.iter().zip(&trace.hidden).map(|(&r, &m)| r * m).collect();
        let block = self.block();
        let d_gated = self.gate_backward(CANDIDATE, &d_cand_pre, &trace.input, &gated, &mut grad_params[2 * block..], &mut d_input);
        let d_reset_pre: Vec<T> = (0..h)
            .map(|i| {
                let r = trace.reset[i];
                d_gated[i] * trace.hidden[i] * r * (one - r)
            })
            .collect();
        for i in 0..h {
            d_hidden[i] += d_gated[i] * trace.reset[i];
        }

        let d_h_update = self.gate_backward(UPDATE, &d_update_pre, &trace.input, &trace.hidden, &mut grad_params[..block], &mut d_input);
        let d_h_reset = self.gate_backward(RESET, &d_reset_pre, &trace.input, &trace.hidden, &mut grad_params[block..2 * block], &mut d_input);
        for i in 0..h {
            d_hidden[i] += d_h_update[i] + d_h_reset[i];
        }
        (d_input, d_hidden)
    }

    /// Gradient of `W x + U m + b` given the preactivation gradient. Adds the
    /// input gradient into `d_input` and returns the gradient w.r.t. `m`.
    fn gate_backward(&self, gate: usize, d_pre: &[T], x: &[T], m: &[T], grad: &mut [T], d_input: &mut [T]) -> Vec<T> {
        let (n, h) = (self.input_dim, self.hidden_dim);
        let (w, u, _) = self.gate(gate);
        let (gw, rest) = grad.split_at_mut(h * n);
        let (gu, gb) = rest.split_at_mut(h * h);
        let mut d_m = vec![T::zero(); h];
        for o in 0..h {
            let d = d_pre[o];
            gb[o] += d;
            if d == T::zero() {
                continue;
            }
            let (rw, ru) = (o * n..(o + 1) * n, o * h..(o + 1) * h);
            super::outer_accumulate(d, x, &w[rw.clone()], &mut gw[rw], d_input);
            super::outer_accumulate(d, m, &u[ru.clone()], &mut gu[ru], &mut d_m);
        }
        d_m
    }
}

impl<T: Scalar> Parameterized<T> for GruCell<T> {
    fn segments(&self) -> Vec<&[T]> {
        vec![&self.params]
    }

    fn segments_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.params]
    }
}
