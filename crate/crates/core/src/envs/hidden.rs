use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HiddenKind {
    Discrete { support: Vec<f64> },
    Continuous { low: f64, high: f64 },
}

/// Distribution of an environment's hidden parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: HiddenKind,
}

impl HiddenParamSpec {
    pub fn discrete(name: &str, support: Vec<f64>) -> Self {
        Self { name: name.into(), kind: HiddenKind::Discrete { support } }
    }

    pub fn continuous(name: &str, low: f64, high: f64) -> Self {
        Self { name: name.into(), kind: HiddenKind::Continuous { low, high } }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            HiddenKind::Discrete { support } if support.is_empty() => {
                Err(Error::InvalidArgument(format!("{}: empty discrete support", self.name)))
            }
            HiddenKind::Continuous { low, high } if !(low < high) => {
                Err(Error::InvalidArgument(format!("{}: empty range [{low}, {high}]", self.name)))
            }
            _ => Ok(()),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, HiddenKind::Discrete { .. })
    }

    pub fn sample<T: Scalar>(&self, rng: &mut Rng) -> T {
        match &self.kind {
            HiddenKind::Discrete { support } => T::lit(support[rng.random_range(0..support.len())]),
            HiddenKind::Continuous { low, high } => T::lit(rng.random_range(*low..=*high)),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        match &self.kind {
            HiddenKind::Discrete { support } => support.iter().any(|&s| s == value || (s as f32) as f64 == value),
            HiddenKind::Continuous { low, high } => (*low..=*high).contains(&value),
        }
    }

    /// `(min, max)` of the support.
    pub fn range(&self) -> (f64, f64) {
        match &self.kind {
            HiddenKind::Discrete { support } => support
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s))),
            HiddenKind::Continuous { low, high } => (*low, *high),
        }
    }

    /// Min-max normalization to `[0, 1]` used in evaluation reports.
    pub fn normalize(&self, value: f64) -> f64 {
        let (lo, hi) = self.range();
        if hi > lo {
            (value - lo) / (hi - lo)
        } else {
            0.0
        }
    }
}
