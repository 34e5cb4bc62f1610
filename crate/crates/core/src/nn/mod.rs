//! Minimal differentiable layer set: dense nets, a GRU cell, the L1 loss and
//! Adam. Parameters of every layer live in one flat buffer with a stable
//! layout so optimizers and checkpoints can treat a model as a single vector.

mod adam;
mod dense;
pub mod gradcheck;
mod gru;
mod loss;

pub use adam::{AdamConfig, ParamVector};
pub use dense::{Activation, DenseNet, DenseTrace};
pub use gru::{GruCell, GruTrace};
pub use loss::{l1_loss, l1_loss_into};

use crate::scalar::Scalar;

/// Anything whose trainable parameters can be viewed as ordered flat segments.
pub trait Parameterized<T: Scalar> {
    fn segments(&self) -> Vec<&[T]>;
    fn segments_mut(&mut self) -> Vec<&mut [T]>;

    fn num_params(&self) -> usize {
        self.segments().iter().map(|s| s.len()).sum()
    }

    fn flat_params(&self) -> Vec<T> {
        self.segments().concat()
    }

    /// Overwrites every parameter from `src`, which must have `num_params()` entries.
    fn load_flat_params(&mut self, src: &[T]) -> crate::Result<()> {
        crate::error::check_dim("load_flat_params", self.num_params(), src.len())?;
        let mut offset = 0;
        for seg in self.segments_mut() {
            let n = seg.len();
            seg.copy_from_slice(&src[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes.
/// The summation order is fixed, so results are reproducible.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let split = n - n % 8;
    for (ca, cb) in a[..split].chunks_exact(8).zip(b[..split].chunks_exact(8)) {
        for k in 0..8 {
            acc[k] += ca[k] * cb[k];
        }
    }
    let mut tail = T::zero();
    for i in split..n {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Rank-one update of one weight row and the matching input gradient:
/// `grad_row += d * x` and `grad_in += d * w_row`.
#[inline]
pub(crate) fn outer_accumulate<T: Scalar>(d: T, x: &[T], w_row: &[T], grad_row: &mut [T], grad_in: &mut [T]) {
    for ((g, &xi), (gi, &wi)) in grad_row.iter_mut().zip(x).zip(grad_in.iter_mut().zip(w_row)) {
        *g += d * xi;
        *gi += wi * d;
    }
}

pub(crate) fn uniform_fill<T: Scalar>(out: &mut [T], bound: f64, rng: &mut crate::rng::Rng) {
    use rand::Rng;
    for x in out {
        *x = T::lit(rng.random_range(-bound..=bound));
    }
}
