//! Self-enhancing graph neural networks for semi-supervised node classification.
//!
//! A trained GNN is used to improve its own inputs in two ways:
//!
//! * [`topology`] deletes edges between nodes predicted to be in different
//!   classes and adds edges between confidently similar nodes, lowering the
//!   graph's [noise ratio](graph::noise_ratio);
//! * [`augment`] grows the labelled set with pseudo-labels on which several
//!   models trained on re-partitioned data agree.
//!
//! Both are tuned on the validation set with a setting that leaves the input
//! unchanged always in the grid. [`model`] holds the SGC and GCN classifiers,
//! [`theory`] the closed-form expectations and their simulators, and
//! [`harness`] the split protocol and reporting.
//!
//! ```
//! use seg_core::graph::{generate_planted_partition, noise_ratio, PlantedPartitionSpec};
//!
//! let g = generate_planted_partition(&PlantedPartitionSpec {
//!     n: 120, c: 3, p_intra: 0.1, p_inter: 0.01,
//!     feature_dim: 8, feature_signal: 1.0, seed: 7,
//! }).unwrap();
//! assert!(noise_ratio(&g).noise_ratio < 0.5);
//! ```

pub mod augment;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod model;
pub mod seeds;
pub mod split;
pub mod theory;
pub mod topology;

pub use error::{Error, Result};
pub use graph::{noise_ratio, Graph, NoiseReport};
pub use model::{predict, train, train_on, ModelConfig, ModelKind, PredictionMatrix, TrainedModel};
pub use split::Split;
