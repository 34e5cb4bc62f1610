use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::csv::write_rows;
use crate::bisim::{embed, EmbeddingModel};
use crate::envs::Trajectory;
use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;
use crate::worldmodel::{memory_sequence, WorldModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    BaselineMemory,
    TimeInvariantMemory,
    Embedded,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [FeatureKind::BaselineMemory, FeatureKind::TimeInvariantMemory, FeatureKind::Embedded];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::BaselineMemory => "baseline-memory",
            FeatureKind::TimeInvariantMemory => "time-invariant-memory",
            FeatureKind::Embedded => "embedded",
        }
    }
}

/// Features of every trajectory at every step `t = 0 ..= T`, with the
/// trajectories' hidden values kept alongside for evaluation only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureSet<T: Scalar> {
    pub kind: FeatureKind,
    /// `features[trajectory][t]`.
    pub features: Vec<Vec<Vec<T>>>,
    pub labels: Vec<f64>,
}

impl<T: Scalar> FeatureSet<T> {
    pub fn new(kind: FeatureKind, features: Vec<Vec<Vec<T>>>, labels: Vec<f64>) -> Result<Self> {
        check_dim("feature labels", features.len(), labels.len())?;
        let dim = features.first().and_then(|f| f.first()).map_or(0, |v| v.len());
        for traj in &features {
            for v in traj {
                check_dim("feature vector", dim, v.len())?;
            }
        }
        Ok(Self { kind, features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().and_then(|f| f.first()).map_or(0, |v| v.len())
    }

    /// Number of steps available in every trajectory.
    pub fn steps(&self) -> usize {
        self.features.iter().map(|f| f.len()).min().unwrap_or(0)
    }

    /// Feature vectors of all trajectories at step `t`.
    pub fn at_step(&self, t: usize) -> Result<Vec<Vec<T>>> {
        if t >= self.steps() {
            return Err(Error::InvalidArgument(format!("step {t} beyond {} available", self.steps())));
        }
        Ok(self.features.iter().map(|f| f[t].clone()).collect())
    }
}

fn labels<T: Scalar>(dataset: &[Trajectory<T>]) -> Vec<f64> {
    dataset.iter().map(|t| t.hidden.to_f64_lossy()).collect()
}

/// Raw memories `h_0 ..= h_T` of each trajectory.
pub fn memory_features<T: Scalar>(model: &WorldModel<T>, dataset: &[Trajectory<T>], kind: FeatureKind) -> Result<FeatureSet<T>> {
    let features = dataset.par_iter().map(|t| memory_sequence(model, t)).collect::<Result<Vec<_>>>()?;
    FeatureSet::new(kind, features, labels(dataset))
}

/// Embedded memories `e(h_0) ..= e(h_T)` of each trajectory.
pub fn embedded_features<T: Scalar>(model: &WorldModel<T>, embedding: &EmbeddingModel<T>, dataset: &[Trajectory<T>]) -> Result<FeatureSet<T>> {
    check_dim("embedding input", model.memory_size(), embedding.input_dim())?;
    let features = dataset
        .par_iter()
        .map(|t| memory_sequence(model, t)?.iter().map(|h| embed(embedding, h)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    FeatureSet::new(FeatureKind::Embedded, features, labels(dataset))
}

/// One row per `(trajectory, t)`: `trajectory,t,label,f0,f1,...`.
pub fn write_features_csv<T: Scalar>(path: &Path, set: &FeatureSet<T>) -> Result<()> {
    let mut header = vec!["trajectory".to_string(), "t".into(), "label".into()];
    header.extend((0..set.dim()).map(|i| format!("f{i}")));
    let rows = set.features.iter().enumerate().flat_map(|(i, traj)| {
        traj.iter().enumerate().map(move |(t, v)| {
            let mut row = vec![i.to_string(), t.to_string(), set.labels[i].to_string()];
            row.extend(v.iter().map(|x| x.to_string()));
            row
        })
    });
    write_rows(path, &header, rows)
}
