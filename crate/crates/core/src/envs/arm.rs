//! Two decoupled, damped revolute joints driven by torques scaled by a
//! hidden strength factor.

use crate::scalar::Scalar;

pub(crate) const MAX_OMEGA: f64 = 20.0;

#[derive(Clone, Copy, Debug)]
pub struct ArmParams {
    pub dt: f64,
    pub max_torque: f64,
    pub damping: f64,
    pub inertia: f64,
}

impl Default for ArmParams {
    fn default() -> Self {
        Self { dt: 0.05, max_torque: 1.0, damping: 0.1, inertia: 0.25 }
    }
}

/// Wraps an angle into `(-pi, pi]`.
fn wrap_angle<T: Scalar>(x: T) -> T {
    let pi = T::lit(std::f64::consts::PI);
    let two_pi = pi + pi;
    let mut y = x % two_pi;
    if y <= -pi {
        y += two_pi;
    } else if y > pi {
        y -= two_pi;
    }
    y
}

/// State is `[theta1, theta2, omega1, omega2]`. Torques are clipped to
/// `[-1, 1]`; the flag reports whether clipping happened.
pub fn arm_step<T: Scalar>(state: [T; 4], torque: [T; 2], strength: T, p: &ArmParams) -> ([T; 4], bool) {
    let one = T::one();
    let clipped = torque.map(|t| t.max(-one).min(one));
    let saturated = clipped != torque;
    let (dt, damping, inertia) = (T::lit(p.dt), T::lit(p.damping), T::lit(p.inertia));
    let max_omega = T::lit(MAX_OMEGA);
    let mut next = state;
    for j in 0..2 {
        let omega = state[2 + j];
        let accel = (strength * clipped[j] * T::lit(p.max_torque) - damping * omega) / inertia;
        let omega_next = (omega + dt * accel).max(-max_omega).min(max_omega);
        next[2 + j] = omega_next;
        next[j] = wrap_angle(state[j] + dt * omega_next);
    }
    (next, saturated)
}
