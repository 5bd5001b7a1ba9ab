//! Missing node-feature estimation on partially observed graphs with a
//! structured variational graph autoencoder.
//!
//! A two-layer GCN on identity inputs embeds every node, linear decoders
//! predict features and labels, and a Gaussian Markov random field prior
//! over the graph regularizes the embeddings.

pub mod baselines;
pub mod checkpoint;
pub mod classify;
pub mod config;
pub mod data;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod optim;
pub mod rng;
pub mod scaling;
pub mod synth;
pub mod train;

pub use config::{Reduction, TrainConfig, ValMetric, Variant};
pub use data::{Dataset, FeatureKind, FeatureTable, SplitMasks};
pub use error::{Error, Result};
pub use graph::{gmrf_information_matrix, normalized_adjacency, GmrfPrior, Graph};
pub use model::{Dims, ModelParams};
pub use metrics::MetricsReport;
pub use train::{train, TrainLog, TrainOutcome};
