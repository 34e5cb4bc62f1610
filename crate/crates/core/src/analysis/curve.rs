use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::csv::write_rows;
use super::features::{embedded_features, memory_features, FeatureKind, FeatureSet};
use super::knn::{knn_estimate, Task};
use crate::bisim::EmbeddingModel;
use crate::envs::{HiddenParamSpec, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;
use crate::worldmodel::WorldModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Fraction of test trajectories whose class is predicted exactly.
    Accuracy,
    /// Mean absolute error of min-max normalized hidden values.
    NormalizedMae,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::NormalizedMae => "normalized-mae",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationCurve {
    pub kind: FeatureKind,
    pub metric: Metric,
    pub steps: Vec<usize>,
    pub values: Vec<f64>,
    pub train_size: usize,
    pub test_size: usize,
}

impl EstimationCurve {
    pub fn at(&self, step: usize) -> Option<f64> {
        self.steps.iter().position(|&s| s == step).map(|i| self.values[i])
    }
}

/// kNN estimation quality at every step shared by both feature sets.
pub fn estimation_curve<T: Scalar>(train: &FeatureSet<T>, test: &FeatureSet<T>, k: usize, spec: &HiddenParamSpec) -> Result<EstimationCurve> {
    if train.kind != test.kind {
        return Err(Error::InvalidArgument("train and test features are of different kinds".into()));
    }
    if test.is_empty() {
        return Err(Error::InsufficientData("empty kNN test set".into()));
    }
    check_dim("test feature dimension", train.dim(), test.dim())?;
    let task = Task::for_spec(spec);
    let steps = train.steps().min(test.steps());
    let values = (0..steps)
        .into_par_iter()
        .map(|t| {
            let est = knn_estimate(&train.at_step(t)?, &train.labels, &test.at_step(t)?, k, task)?;
            let n = est.len() as f64;
            Ok(match task {
                Task::Discrete => est.iter().zip(&test.labels).filter(|(e, l)| e == l).count() as f64 / n,
                Task::Continuous => est.iter().zip(&test.labels).map(|(&e, &l)| (spec.normalize(e) - spec.normalize(l)).abs()).sum::<f64>() / n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimationCurve {
        kind: train.kind,
        metric: if task == Task::Discrete { Metric::Accuracy } else { Metric::NormalizedMae },
        steps: (0..steps).collect(),
        values,
        train_size: train.len(),
        test_size: test.len(),
    })
}

/// Models behind the three feature kinds. Any may be absent.
#[derive(Clone, Copy)]
pub struct CurveModels<'a, T: Scalar> {
    pub baseline: Option<&'a WorldModel<T>>,
    pub time_invariant: Option<&'a WorldModel<T>>,
    pub embedding: Option<&'a EmbeddingModel<T>>,
}

/// Curves for every feature kind whose models are available; missing kinds
/// are skipped with a warning. The embedded kind needs both the
/// time-invariant model and the embedding.
pub fn estimation_curves<T: Scalar>(
    models: CurveModels<'_, T>,
    eval_train: &[Trajectory<T>],
    eval_test: &[Trajectory<T>],
    k: usize,
    spec: &HiddenParamSpec,
) -> Result<Vec<EstimationCurve>> {
    let mut curves = Vec::new();
    for kind in FeatureKind::ALL {
        let sets = match (kind, models.baseline, models.time_invariant, models.embedding) {
            (FeatureKind::BaselineMemory, Some(m), _, _) | (FeatureKind::TimeInvariantMemory, _, Some(m), _) => {
                Some((memory_features(m, eval_train, kind)?, memory_features(m, eval_test, kind)?))
            }
            (FeatureKind::Embedded, _, Some(m), Some(e)) => Some((embedded_features(m, e, eval_train)?, embedded_features(m, e, eval_test)?)),
            _ => None,
        };
        match sets {
            Some((train, test)) => curves.push(estimation_curve(&train, &test, k, spec)?),
            None => log::warn!("no model for {} features; curve skipped", kind.as_str()),
        }
    }
    Ok(curves)
}

/// `step,<metric>` rows.
pub fn write_curve_csv(path: &Path, curve: &EstimationCurve) -> Result<()> {
    let header = ["step".to_string(), curve.metric.as_str().to_string()];
    write_rows(path, &header, curve.steps.iter().zip(&curve.values).map(|(s, v)| [s.to_string(), v.to_string()]))
}
