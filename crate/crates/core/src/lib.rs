//! Sample selection for continual learning.
//!
//! The central piece is a replay memory that keeps the samples covering the
//! most of sample space: batches of samples are compared through the
//! Jensen-Shannon distance of their prediction and output distributions,
//! densities come from a Gaussian kernel estimate, and high-density batches
//! are discarded first. The same density estimate drives a retraining
//! trigger based on how much coverage grew since the last training.
//!
//! Baseline strategies (random, FIFO, scalar priorities, LARS-style reservoir
//! and query-by-committee) share the [`SelectionStrategy`] interface.

pub mod baselines;
pub mod batching;
pub mod density;
pub mod distance;
pub mod error;
pub mod memory;
pub mod predictor;
pub mod record;
pub mod sample;
pub mod selection;

pub use baselines::{SelectionStrategy, StrategyKind, StrategyParams};
pub use error::{Error, Result};
pub use memory::{ReplayMemory, StrategyConfig, Task};
pub use predictor::{Predictor, PredictorKind};
pub use sample::{Batch, BinEdges, CategoricalDistribution, Sample, SampleId};
pub use selection::{select, SelectionOutcome};
