use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::anchors::AnchorSet;
use crate::error::{check_dim, Error, Result};
use crate::scalar::{all_finite, l1_distance, Scalar};
use crate::worldmodel::{MemoryState, WorldModel};

/// Memories and the symmetric matrix of their latent bisimulation distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DistanceDataset<T: Scalar> {
    pub memories: Vec<MemoryState<T>>,
    /// Row-major `n x n` matrix over `memories`.
    pub distances: Vec<T>,
    /// Indices (into the caller's memory list) dropped for non-finite predictions.
    pub excluded: Vec<usize>,
}

impl<T: Scalar> DistanceDataset<T> {
    pub fn len(&self) -> usize {
        self.memories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memories.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.distances[i * self.len() + j]
    }

    /// Builds a dataset from an explicit matrix, checking shape, symmetry,
    /// zero diagonal and non-negativity.
    pub fn from_matrix(memories: Vec<MemoryState<T>>, distances: Vec<T>) -> Result<Self> {
        let n = memories.len();
        check_dim("distance matrix", n * n, distances.len())?;
        for i in 0..n {
            if distances[i * n + i] != T::zero() {
                return Err(Error::InvalidArgument(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let d = distances[i * n + j];
                if !(d >= T::zero()) || d != distances[j * n + i] {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) breaks symmetry or sign")));
                }
            }
        }
        Ok(Self { memories, distances, excluded: Vec::new() })
    }
}

/// `d(h_i, h_j) = (1/P) sum_p || f(s_p, a_p, h_i) - f(s_p, a_p, h_j) ||_1`
/// over the anchor set, with predictions in raw state units.
///
/// Memories whose predictions are not finite are excluded and listed in
/// [`DistanceDataset::excluded`]. Rows are computed in parallel; each entry
/// is evaluated independently so the result does not depend on scheduling.
pub fn pairwise_distance<T: Scalar>(model: &WorldModel<T>, anchors: &AnchorSet<T>, memories: &[MemoryState<T>]) -> Result<DistanceDataset<T>> {
    if anchors.is_empty() {
        return Err(Error::InsufficientData("empty anchor set".into()));
    }
    for m in memories {
        check_dim("memory", model.memory_size(), m.h.len())?;
    }
    let encodings = anchors
        .states
        .iter()
        .zip(&anchors.actions)
        .map(|(s, a)| model.encode(s, a))
        .collect::<Result<Vec<_>>>()?;

    // all anchor predictions of one memory, concatenated
    let predictions: Vec<Option<Vec<T>>> = memories
        .par_iter()
        .map(|m| {
            let mut flat = Vec::with_capacity(anchors.len() * model.arch().state_dim);
            for (s, enc) in anchors.states.iter().zip(&encodings) {
                match model.predict_from_encoding(s, enc, &m.h) {
                    Ok((p, _)) if all_finite(&p) => flat.extend(p),
                    _ => return None,
                }
            }
            Some(flat)
        })
        .collect();

    let excluded: Vec<usize> = predictions.iter().enumerate().filter(|(_, p)| p.is_none()).map(|(i, _)| i).collect();
    for &i in &excluded {
        log::warn!("memory {i} produced non-finite predictions and is excluded");
    }
    let kept: Vec<(&MemoryState<T>, Vec<T>)> = memories
        .iter()
        .zip(predictions)
        .filter_map(|(m, p)| p.map(|p| (m, p)))
        .collect();
    let n = kept.len();
    let inv_p = T::one() / T::from_usize(anchors.len()).unwrap();

    let upper: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| l1_distance(&kept[i].1, &kept[j].1) * inv_p).collect())
        .collect();
    let mut distances = vec![T::zero(); n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &d) in row.iter().enumerate() {
            let j = i + 1 + off;
            distances[i * n + j] = d;
            distances[j * n + i] = d;
        }
    }
    Ok(DistanceDataset {
        memories: kept.into_iter().map(|(m, _)| m.clone()).collect(),
        distances,
        excluded,
    })
}
