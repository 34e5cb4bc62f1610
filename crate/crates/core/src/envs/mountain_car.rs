//! Classic mountain car with a gravity multiplier.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) const POSITION_RANGE: (f64, f64) = (-1.2, 0.6);
pub(crate) const MAX_SPEED: f64 = 0.07;
const FORCE: f64 = 0.001;
const GRAVITY: f64 = 0.0025;

/// One step of mountain car with gravity scaled by `g_scale`. Action 0 pushes
/// left, 1 coasts, 2 pushes right.
pub fn mc_step<T: Scalar>(position: T, velocity: T, action: usize, g_scale: T) -> Result<(T, T)> {
    if action > 2 {
        return Err(Error::InvalidArgument(format!("mountain car action {action} not in {{0, 1, 2}}")));
    }
    let push = T::lit(action as f64 - 1.0) * T::lit(FORCE);
    let pull = T::lit(GRAVITY) * g_scale * (T::lit(3.0) * position).cos();
    let max_speed = T::lit(MAX_SPEED);
    let v = (velocity + push - pull).max(-max_speed).min(max_speed);
    let p = (position + v).max(T::lit(POSITION_RANGE.0)).min(T::lit(POSITION_RANGE.1));
    Ok((p, v))
}
