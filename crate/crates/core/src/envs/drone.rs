//! Planar drone with thrust and pitch-rate control. Payload mass shapes the
//! translational dynamics; ambient temperature only shapes battery drain.

use crate::scalar::Scalar;

pub(crate) const PAYLOAD_RANGE: (f64, f64) = (0.0, 0.5);
pub(crate) const TEMP_RANGE: (f64, f64) = (-10.0, 40.0);
pub(crate) const DYNAMIC_BOUNDS: [(f64, f64); 6] = [
    (-100.0, 100.0),
    (-100.0, 100.0),
    (-50.0, 50.0),
    (-50.0, 50.0),
    (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
    (0.0, 1.0),
];

const BASE_MASS: f64 = 1.0;
const MAX_THRUST: f64 = 25.0;
const GRAVITY: f64 = 9.81;
const DT: f64 = 0.05;
const IDLE_DRAIN: f64 = 0.01;
const THRUST_DRAIN: f64 = 0.08;
const TEMP_SENSITIVITY: f64 = 0.05;
const NOMINAL_TEMP: f64 = 20.0;
const PITCH_GAIN: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DroneState<T> {
    pub x: T,
    pub z: T,
    pub vx: T,
    pub vz: T,
    pub pitch: T,
    pub battery: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DroneAction<T> {
    /// Fraction of maximum thrust, `[0, 1]`.
    pub thrust: T,
    /// Commanded pitch rate, `[-1, 1]`.
    pub pitch_rate: T,
}

impl<T: Scalar> DroneState<T> {
    pub fn from_slice(s: &[T]) -> Self {
        Self { x: s[0], z: s[1], vx: s[2], vz: s[3], pitch: s[4], battery: s[5] }
    }

    pub fn to_vec(&self) -> Vec<T> {
        vec![self.x, self.z, self.vx, self.vz, self.pitch, self.battery]
    }
}

pub(crate) fn start_state<T: Scalar>(visible: f64) -> Vec<T> {
    vec![T::zero(), T::zero(), T::zero(), T::zero(), T::zero(), T::one(), T::lit(visible)]
}

fn clamp<T: Scalar>(x: T, (lo, hi): (f64, f64)) -> T {
    x.max(T::lit(lo)).min(T::lit(hi))
}

/// One semi-implicit Euler step. The flag reports whether the action had to
/// be clipped into its bounds.
pub fn drone_step<T: Scalar>(s: &DroneState<T>, action: DroneAction<T>, payload_mass: T, ambient_temp: T) -> (DroneState<T>, bool) {
    let thrust = clamp(action.thrust, (0.0, 1.0));
    let rate = clamp(action.pitch_rate, (-1.0, 1.0));
    let saturated = thrust != action.thrust || rate != action.pitch_rate;

    let dt = T::lit(DT);
    let mass = T::lit(BASE_MASS) + payload_mass;
    let pitch = clamp(s.pitch + T::lit(PITCH_GAIN) * rate * dt, DYNAMIC_BOUNDS[4]);
    let force = thrust * T::lit(MAX_THRUST);
    let ax = force * (-pitch.sin()) / mass;
    let az = force * pitch.cos() / mass - T::lit(GRAVITY);
    let vx = clamp(s.vx + ax * dt, DYNAMIC_BOUNDS[2]);
    let vz = clamp(s.vz + az * dt, DYNAMIC_BOUNDS[3]);
    let x = clamp(s.x + vx * dt, DYNAMIC_BOUNDS[0]);
    let z = clamp(s.z + vz * dt, DYNAMIC_BOUNDS[1]);
    let heat = T::one() + T::lit(TEMP_SENSITIVITY) * (ambient_temp - T::lit(NOMINAL_TEMP)).abs();
    let drain = dt * (T::lit(IDLE_DRAIN) + T::lit(THRUST_DRAIN) * thrust * heat);
    let battery = (s.battery - drain).max(T::zero());
    (DroneState { x, z, vx, vz, pitch, battery }, saturated)
}
