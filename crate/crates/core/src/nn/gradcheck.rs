//! Central finite differences, used as the independent oracle for every
//! analytic gradient in the crate.

use crate::scalar::Scalar;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate `i`.
pub fn central_difference<T, F>(mut f: F, x: &[T], step: f64) -> Vec<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    let h = T::lit(step);
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = f(&probe);
            probe[i] = orig - h;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (h + h)
        })
        .collect()
}

/// Largest coordinate-wise `|a - n| / max(|a|, |n|, floor)`.
///
/// `floor` turns the comparison absolute for coordinates whose true gradient
/// is numerically zero.
pub fn max_relative_error<T: Scalar>(analytic: &[T], numeric: &[T], floor: f64) -> T {
    assert_eq!(analytic.len(), numeric.len());
    let floor = T::lit(floor);
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(T::zero(), T::max)
}
