//! Pool-based active few-shot learning on frozen feature embeddings.
//!
//! The crate selects which unlabelled samples to send for annotation when
//! only a handful of labels per class can be afforded. A one-layer softmax
//! head is refit on the labelled set every cycle; its argmax predictions
//! act as pseudo-labels that keep each query spread across classes, while
//! a combined margin-entropy score ranks the pool and is split into `K`
//! sub-arrays so that one sample is drawn from each uncertainty band.
//!
//! Modules, bottom-up:
//!
//! - [`data`] and [`format`]: datasets, splits, synthetic clusters and the
//!   `MALE` binary embedding file.
//! - [`head`]: the softmax classifier and its ADAM training loop.
//! - [`kmeans`]: k-means++ / Lloyd clustering and the cold-start query.
//! - [`uncertainty`]: margin, entropy, variation ratio, margin-entropy.
//! - [`strategy`]: the sub-array selector and baseline strategies.
//! - [`engine`]: the active-learning loop and evaluation.
//! - [`harness`]: multi-seed sweeps, CSV/JSON output, run configuration.

pub mod data;
pub mod engine;
pub mod error;
pub mod format;
pub mod harness;
pub mod head;
pub mod kmeans;
pub mod metrics;
pub mod rng;
pub mod strategy;
pub mod uncertainty;

pub use data::{generate_synthetic, split, EmbeddingDataset, Split, SplitSpec, SyntheticSpec};
pub use engine::{evaluate, run_al, ActiveLearner, EngineConfig, Evaluation, PoolState, RunRecord};
pub use error::{Error, Result};
pub use format::{read_embedding_file, write_embedding_file};
pub use head::{LinearHead, TrainConfig};
pub use rng::Rng;
pub use strategy::{MalOptions, QueryPlan, Strategy, StrategyKind};
