use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{all_finite, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Flat trainable parameters together with their gradient buffer and Adam
/// moment estimates. All four buffers always have the same length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ParamVector<T: Scalar> {
    pub values: Vec<T>,
    pub grad: Vec<T>,
    m: Vec<T>,
    v: Vec<T>,
    step: u64,
}

impl<T: Scalar> ParamVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        let n = values.len();
        Self {
            values,
            grad: vec![T::zero(); n],
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    /// Copies `gradient` into the gradient buffer and applies one Adam update.
    pub fn adam_step_with(&mut self, gradient: &[T], cfg: &AdamConfig) -> Result<()> {
        check_dim("adam gradient", self.values.len(), gradient.len())?;
        self.grad.copy_from_slice(gradient);
        self.adam_step(cfg)
    }

    /// One bias-corrected Adam update from the current gradient buffer.
    ///
    /// A non-finite gradient leaves the parameters untouched and returns an error.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        if !all_finite(&self.grad) {
            let idx = self.grad.iter().position(|g| !g.is_finite()).unwrap();
            return Err(Error::NonFinite(format!("gradient entry {idx}")));
        }
        self.step += 1;
        let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
        let lr = T::lit(cfg.learning_rate);
        let eps = T::lit(cfg.epsilon);
        let one = T::one();
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        for i in 0..self.values.len() {
            let g = self.grad[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            self.values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
