use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::csv::write_rows;
use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Projection of samples onto the leading principal components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// One row per sample, one column per available component.
    pub coords: Vec<Vec<f64>>,
    /// Variance along each returned component.
    pub variances: Vec<f64>,
    /// Set when fewer than two components carry variance.
    pub rank_deficient: bool,
}

/// Projects samples onto the top two eigenvectors of their covariance.
///
/// Each component's sign is chosen so its largest-magnitude loading is
/// positive. Components with no variance are dropped and the result flagged.
pub fn pca_project<T: Scalar>(samples: &[Vec<T>]) -> Result<Projection> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("PCA needs at least 2 samples, got {n}")));
    }
    let dim = samples[0].len();
    for s in samples {
        check_dim("pca sample", dim, s.len())?;
    }
    let data = DMatrix::from_fn(n, dim, |i, j| samples[i][j].to_f64_lossy());
    let mean = data.row_mean();
    let centered = DMatrix::from_fn(n, dim, |i, j| data[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / n as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let tol = 1e-12 * top.max(1e-300) * dim as f64;
    let kept: Vec<usize> = order.into_iter().take(2).filter(|&c| top > 0.0 && eig.eigenvalues[c] > tol).collect();

    let mut axes = Vec::with_capacity(kept.len());
    for &c in &kept {
        let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().cloned().collect();
        let lead = v.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        axes.push(v);
    }
    let coords = (0..n)
        .map(|i| axes.iter().map(|v| (0..dim).map(|j| centered[(i, j)] * v[j]).sum()).collect())
        .collect();
    Ok(Projection {
        coords,
        variances: kept.iter().map(|&c| eig.eigenvalues[c]).collect(),
        rank_deficient: kept.len() < 2,
    })
}

/// Smallest distance between class centroids and mean distance of points to
/// their own centroid, both Euclidean in projected coordinates.
pub fn class_separation(coords: &[Vec<f64>], labels: &[f64]) -> Result<(f64, f64)> {
    check_dim("separation labels", coords.len(), labels.len())?;
    let mut classes: Vec<f64> = labels.to_vec();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InsufficientData("need two classes".into()));
    }
    let dim = coords.first().map_or(0, |c| c.len());
    let centroids: Vec<Vec<f64>> = classes
        .iter()
        .map(|c| {
            let members: Vec<&Vec<f64>> = coords.iter().zip(labels).filter(|(_, l)| *l == c).map(|(x, _)| x).collect();
            (0..dim).map(|j| members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64).collect()
        })
        .collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut between = f64::INFINITY;
    for i in 0..centroids.len() {
        for j in (i + 1)..centroids.len() {
            between = between.min(dist(&centroids[i], &centroids[j]));
        }
    }
    let within = coords
        .iter()
        .zip(labels)
        .map(|(x, l)| dist(x, &centroids[classes.iter().position(|c| c == l).unwrap()]))
        .sum::<f64>()
        / coords.len() as f64;
    Ok((between, within))
}

/// `label,pc1,pc2` rows; missing components are written as empty cells.
pub fn write_projection_csv(path: &Path, projection: &Projection, labels: &[f64]) -> Result<()> {
    check_dim("projection labels", projection.coords.len(), labels.len())?;
    let header: Vec<String> = ["label", "pc1", "pc2"].iter().map(|s| s.to_string()).collect();
    let rows = projection.coords.iter().zip(labels).map(|(c, l)| {
        let mut row = vec![l.to_string()];
        row.extend((0..2).map(|i| c.get(i).map(|x| x.to_string()).unwrap_or_default()));
        row
    });
    write_rows(path, &header, rows)
}
