//! Latent bisimulation distances between recurrent memories, measured through
//! the world model's predictions on a fixed anchor set, and the learned
//! embedding whose L1 geometry reproduces them.

mod anchors;
mod distance;
mod embedding;
mod format;

pub use anchors::{build_anchor_set, sample_memories, AnchorSet};
pub use distance::{pairwise_distance, DistanceDataset};
pub use embedding::{embed, stress_loss_grad, train_embedding, EmbeddingConfig, EmbeddingModel, EmbeddingOutcome};
pub use format::{read_distance_matrix, write_distance_matrix, DISTANCE_MAGIC};
