use serde::{Deserialize, Serialize};

use crate::envs::HiddenParamSpec;
use crate::error::{check_dim, Error, Result};
use crate::scalar::{l1_distance, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Discrete,
    Continuous,
}

impl Task {
    pub fn for_spec(spec: &HiddenParamSpec) -> Self {
        if spec.is_discrete() {
            Task::Discrete
        } else {
            Task::Continuous
        }
    }
}

/// k-nearest-neighbour estimate of each query's label under L1 distance.
///
/// Every training point tied with the k-th nearest distance is included, so
/// results never depend on the order of the training set. Discrete labels
/// take the majority vote; a tied vote goes to the class whose closest member
/// is nearest, then to the smaller label. Continuous labels take the mean.
pub fn knn_estimate<T: Scalar>(train: &[Vec<T>], labels: &[f64], queries: &[Vec<T>], k: usize, task: Task) -> Result<Vec<f64>> {
    check_dim("knn labels", train.len(), labels.len())?;
    if train.is_empty() {
        return Err(Error::InsufficientData("empty kNN training set".into()));
    }
    if k == 0 || k > train.len() {
        return Err(Error::InvalidArgument(format!("k = {k} with {} training points", train.len())));
    }
    let dim = train[0].len();
    for x in train.iter().chain(queries) {
        check_dim("knn feature", dim, x.len())?;
    }
    Ok(queries
        .iter()
        .map(|q| {
            let mut order: Vec<(T, usize)> = train.iter().enumerate().map(|(i, x)| (l1_distance(q, x), i)).collect();
            order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            let cutoff = order[k - 1].0;
            let neighbours: Vec<(T, f64)> = order.iter().take_while(|(d, _)| *d <= cutoff).map(|&(d, i)| (d, labels[i])).collect();
            match task {
                Task::Continuous => neighbours.iter().map(|n| n.1).sum::<f64>() / neighbours.len() as f64,
                Task::Discrete => vote(&neighbours),
            }
        })
        .collect())
}

fn vote<T: Scalar>(neighbours: &[(T, f64)]) -> f64 {
    // (label, count, nearest distance)
    let mut tally: Vec<(f64, usize, T)> = Vec::new();
    for &(d, label) in neighbours {
        match tally.iter_mut().find(|e| e.0 == label) {
            Some(e) => {
                e.1 += 1;
                if d < e.2 {
                    e.2 = d;
                }
            }
            None => tally.push((label, 1, d)),
        }
    }
    tally
        .into_iter()
        .min_by(|a, b| {
            b.1.cmp(&a.1)
                .then(a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal))
                .then(a.0.total_cmp(&b.0))
        })
        .unwrap()
        .0
}
