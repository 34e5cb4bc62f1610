pub mod analysis;
pub mod bisim;
pub mod envs;
pub mod error;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod worldmodel;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type TrajectoryF64 = envs::Trajectory<f64>;
pub type WorldModelF64 = worldmodel::WorldModel<f64>;
pub type StatelessModelF64 = worldmodel::StatelessModel<f64>;
pub type EmbeddingModelF64 = bisim::EmbeddingModel<f64>;
pub type DistanceDatasetF64 = bisim::DistanceDataset<f64>;

pub type TrajectoryF32 = envs::Trajectory<f32>;
pub type WorldModelF32 = worldmodel::WorldModel<f32>;
pub type StatelessModelF32 = worldmodel::StatelessModel<f32>;
pub type EmbeddingModelF32 = bisim::EmbeddingModel<f32>;
pub type DistanceDatasetF32 = bisim::DistanceDataset<f32>;
