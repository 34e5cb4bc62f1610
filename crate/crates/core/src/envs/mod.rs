//! Simulated environments, each with exactly one hidden parameter that is
//! constant over a trajectory, and dataset generation under a random policy.

mod arm;
mod dataset;
mod drone;
mod hidden;
mod mountain_car;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use arm::{arm_step, ArmParams};
pub use dataset::{generate_dataset, read_jsonl, simulate, write_jsonl, Trajectory};
pub use drone::{drone_step, DroneAction, DroneState};
pub use hidden::{HiddenKind, HiddenParamSpec};
pub use mountain_car::mc_step;

use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EnvId {
    MountainCar,
    Arm,
    /// Drone with hidden payload mass; ambient temperature is observable.
    DronePayload,
    /// Drone with hidden ambient temperature; payload mass is observable.
    DroneTemperature,
}

impl EnvId {
    pub const ALL: [EnvId; 4] = [EnvId::MountainCar, EnvId::Arm, EnvId::DronePayload, EnvId::DroneTemperature];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::MountainCar => "mountain-car",
            EnvId::Arm => "arm",
            EnvId::DronePayload => "drone-payload",
            EnvId::DroneTemperature => "drone-temperature",
        }
    }

    pub fn state_dim(self) -> usize {
        self.feature_names().len()
    }

    pub fn action_dim(self) -> usize {
        match self {
            EnvId::MountainCar => 1,
            EnvId::Arm | EnvId::DronePayload | EnvId::DroneTemperature => 2,
        }
    }

    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            EnvId::MountainCar => &["position", "velocity"],
            EnvId::Arm => &["theta1", "theta2", "omega1", "omega2"],
            EnvId::DronePayload => &["x", "z", "vx", "vz", "pitch", "battery", "ambient_temp"],
            EnvId::DroneTemperature => &["x", "z", "vx", "vz", "pitch", "battery", "payload_mass"],
        }
    }

    pub fn hidden_spec(self) -> HiddenParamSpec {
        match self {
            EnvId::MountainCar => HiddenParamSpec::discrete("gravity_scale", vec![0.75, 1.0, 1.25]),
            EnvId::Arm => HiddenParamSpec::discrete("torque_strength", vec![0.5, 0.75, 1.0]),
            EnvId::DronePayload => HiddenParamSpec::continuous("payload_mass", drone::PAYLOAD_RANGE.0, drone::PAYLOAD_RANGE.1),
            EnvId::DroneTemperature => HiddenParamSpec::continuous("ambient_temp", drone::TEMP_RANGE.0, drone::TEMP_RANGE.1),
        }
    }

    /// Declared `(low, high)` bounds of every state feature.
    pub fn state_bounds(self) -> Vec<(f64, f64)> {
        match self {
            EnvId::MountainCar => vec![mountain_car::POSITION_RANGE, (-mountain_car::MAX_SPEED, mountain_car::MAX_SPEED)],
            EnvId::Arm => {
                let pi = std::f64::consts::PI;
                let w = arm::MAX_OMEGA;
                vec![(-pi, pi), (-pi, pi), (-w, w), (-w, w)]
            }
            EnvId::DronePayload | EnvId::DroneTemperature => {
                let mut b = drone::DYNAMIC_BOUNDS.to_vec();
                b.push(if self == EnvId::DronePayload { drone::TEMP_RANGE } else { drone::PAYLOAD_RANGE });
                b
            }
        }
    }

    /// Start state. For the drone the observable (non-hidden) parameter is
    /// drawn here and appended as the last state feature.
    pub fn sample_start<T: Scalar>(self, rng: &mut Rng) -> Vec<T> {
        match self {
            EnvId::MountainCar => vec![T::lit(rng.random_range(-0.6..-0.4)), T::zero()],
            EnvId::Arm => vec![T::zero(); 4],
            EnvId::DronePayload => {
                let temp = rng.random_range(drone::TEMP_RANGE.0..=drone::TEMP_RANGE.1);
                drone::start_state(temp)
            }
            EnvId::DroneTemperature => {
                let payload = rng.random_range(drone::PAYLOAD_RANGE.0..=drone::PAYLOAD_RANGE.1);
                drone::start_state(payload)
            }
        }
    }

    /// Fixed start state used for sweeps: the centre of the start
    /// distribution, with the drone's visible parameter at mid-range.
    pub fn reference_start<T: Scalar>(self) -> Vec<T> {
        match self {
            EnvId::MountainCar => vec![T::lit(-0.5), T::zero()],
            EnvId::Arm => vec![T::zero(); 4],
            EnvId::DronePayload => drone::start_state(0.5 * (drone::TEMP_RANGE.0 + drone::TEMP_RANGE.1)),
            EnvId::DroneTemperature => drone::start_state(0.5 * (drone::PAYLOAD_RANGE.0 + drone::PAYLOAD_RANGE.1)),
        }
    }

    /// Uniform random action.
    pub fn sample_action<T: Scalar>(self, rng: &mut Rng) -> Vec<T> {
        match self {
            EnvId::MountainCar => vec![T::lit(rng.random_range(0..3u32) as f64)],
            EnvId::Arm => vec![T::lit(rng.random_range(-1.0..=1.0)), T::lit(rng.random_range(-1.0..=1.0))],
            EnvId::DronePayload | EnvId::DroneTemperature => {
                vec![T::lit(rng.random_range(0.0..=1.0)), T::lit(rng.random_range(-1.0..=1.0))]
            }
        }
    }

    /// Advances one step. Returns the next state and whether the action had
    /// to be clipped into the action space.
    pub fn step<T: Scalar>(self, state: &[T], action: &[T], hidden: T) -> Result<(Vec<T>, bool)> {
        check_dim("environment state", self.state_dim(), state.len())?;
        check_dim("environment action", self.action_dim(), action.len())?;
        match self {
            EnvId::MountainCar => {
                let a = action[0];
                let idx = [0usize, 1, 2]
                    .into_iter()
                    .find(|&i| a == T::lit(i as f64))
                    .ok_or_else(|| Error::InvalidArgument(format!("mountain car action {a} not in {{0, 1, 2}}")))?;
                let (p, v) = mc_step(state[0], state[1], idx, hidden)?;
                Ok((vec![p, v], false))
            }
            EnvId::Arm => {
                let (next, saturated) = arm_step(
                    [state[0], state[1], state[2], state[3]],
                    [action[0], action[1]],
                    hidden,
                    &ArmParams::default(),
                );
                Ok((next.to_vec(), saturated))
            }
            EnvId::DronePayload | EnvId::DroneTemperature => {
                let visible = state[6];
                let (payload, temp) = if self == EnvId::DronePayload { (hidden, visible) } else { (visible, hidden) };
                let current = DroneState::from_slice(&state[..6]);
                let act = DroneAction { thrust: action[0], pitch_rate: action[1] };
                let (next, saturated) = drone_step(&current, act, payload, temp);
                let mut out = next.to_vec();
                out.push(visible);
                Ok((out, saturated))
            }
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::UnknownEnv(s.to_string()))
    }
}

impl TryFrom<String> for EnvId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EnvId> for String {
    fn from(e: EnvId) -> String {
        e.as_str().to_string()
    }
}

/// A live environment instance: state vector, hidden value and counters.
#[derive(Clone, Debug)]
pub struct EnvState<T: Scalar> {
    pub env: EnvId,
    pub values: Vec<T>,
    pub hidden: T,
    pub steps: usize,
    pub saturations: usize,
}

impl<T: Scalar> EnvState<T> {
    pub fn new(env: EnvId, values: Vec<T>, hidden: T) -> Result<Self> {
        check_dim("environment state", env.state_dim(), values.len())?;
        if !env.hidden_spec().contains(hidden.to_f64_lossy()) {
            return Err(Error::InvalidArgument(format!(
                "hidden value {hidden} outside the support of {}",
                env.hidden_spec().name
            )));
        }
        Ok(Self { env, values, hidden, steps: 0, saturations: 0 })
    }

    pub fn advance(&mut self, action: &[T]) -> Result<&[T]> {
        let (next, saturated) = self.env.step(&self.values, action, self.hidden)?;
        self.values = next;
        self.steps += 1;
        self.saturations += usize::from(saturated);
        Ok(&self.values)
    }

    pub fn within_bounds(&self) -> bool {
        self.values
            .iter()
            .zip(self.env.state_bounds())
            .all(|(v, (lo, hi))| (lo..=hi).contains(&v.to_f64_lossy()))
    }
}
