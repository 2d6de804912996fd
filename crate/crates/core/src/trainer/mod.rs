//! Momentum SGD with coupled weight decay, a staircase learning-rate
//! schedule, shuffled mini-batches with flip augmentation, and the loop that
//! ties them to a [`Model`](crate::architectures::Model).

mod config;
mod optimizer;
mod sampler;
mod schedule;
mod train;

pub use config::{parse_key_values, KeyValue, TrainConfig};
pub use optimizer::{OptimizerConfig, Sgd};
pub use sampler::{augment_flip, split_train_monitor, BatchSampler, TrainMonitorSplit, STRATIFY_MIN_SAMPLES};
pub use schedule::LrSchedule;
pub use train::{accuracy, format_metrics_log, train, EpochMetrics, TrainOutcome};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for one component, derived from the run seed.
pub fn derive_rng(seed: u64, component: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(component);
    rng
}
