use crate::error::{check_dim, Result};
use crate::scalar::Scalar;

/// Mean absolute difference and its subgradient `sign(prediction - target) / n`
/// (with `sign(0) = 0`).
pub fn l1_loss<T: Scalar>(prediction: &[T], target: &[T]) -> Result<(T, Vec<T>)> {
    check_dim("l1 loss", prediction.len(), target.len())?;
    let mut grad = vec![T::zero(); prediction.len()];
    let loss = l1_loss_into(prediction, target, T::one(), &mut grad);
    Ok((loss, grad))
}

/// Like [`l1_loss`], but adds `weight * gradient` into `grad` instead of
/// allocating. Lengths must already agree.
pub fn l1_loss_into<T: Scalar>(prediction: &[T], target: &[T], weight: T, grad: &mut [T]) -> T {
    debug_assert_eq!(prediction.len(), target.len());
    let n = T::from_usize(prediction.len()).unwrap();
    let scale = weight / n;
    let mut total = T::zero();
    for ((&p, &t), g) in prediction.iter().zip(target).zip(grad.iter_mut()) {
        let diff = p - t;
        total += diff.abs();
        *g += diff.sign0() * scale;
    }
    total / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::central_difference;
    use crate::rng::rng_from;
    use rand::Rng as _;

    #[test]
    fn identical_inputs_give_zero_loss_and_gradient() {
        let (loss, grad) = l1_loss(&[1.0, -1.0], &[1.0, -1.0]).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad, vec![0.0, 0.0]);
    }

    #[test]
    fn direct_evaluation() {
        let (loss, grad) = l1_loss(&[2.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad, vec![0.5, 0.0]);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(l1_loss(&[1.0f64], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences_away_from_ties() {
        let mut rng = rng_from(5, &[]);
        for _ in 0..20 {
            let n = rng.random_range(1..8);
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t: Vec<f64> = p.iter().map(|x| x + if rng.random_bool(0.5) { 0.3 } else { -0.3 }).collect();
            let (_, grad) = l1_loss(&p, &t).unwrap();
            let numeric = central_difference(|q: &[f64]| l1_loss(q, &t).unwrap().0, &p, 1e-5);
            for (a, b) in grad.iter().zip(&numeric) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }
}
