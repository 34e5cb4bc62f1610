//! Evaluation on top of trained models: kNN estimation of hidden parameters
//! over time, per-feature error ratios, feature export with PCA, and imagined
//! rollouts conditioned on different hidden values.
//!
//! This is the only module that reads the hidden-parameter labels of
//! trajectories.

mod csv;
mod curve;
mod features;
mod knn;
mod pca;
mod ratio;
mod sweep;

pub use curve::{estimation_curve, estimation_curves, write_curve_csv, CurveModels, EstimationCurve, Metric};
pub use features::{embedded_features, memory_features, write_features_csv, FeatureKind, FeatureSet};
pub use knn::{knn_estimate, Task};
pub use pca::{class_separation, pca_project, write_projection_csv, Projection};
pub use ratio::{error_ratio_table, write_error_ratio_csv, ErrorRatioRow, ErrorRatioTable, RatioStatus};
pub use sweep::{imagine_sweep, write_sweep_csv, SweepSeries};
