use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::derive_rng;
use crate::error::{Error, Result};
use crate::tensor_core::{Real, Tensor};

/// Identities with at least this many samples are split individually.
pub const STRATIFY_MIN_SAMPLES: usize = 20;

const SHUFFLE_STREAM: u64 = 0x5348_5546;

/// Shuffled mini-batches over `0..len`, reshuffled every epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSampler {
    pub batch_size: usize,
    pub seed: u64,
    /// Per-image horizontal flip probability; `0` disables augmentation.
    pub flip_prob: f64,
}

impl Default for BatchSampler {
    fn default() -> Self {
        Self { batch_size: 120, seed: 0, flip_prob: 0.5 }
    }
}

impl BatchSampler {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Invalid(format!("batch size must be at least 2, got {}", self.batch_size)));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::Invalid(format!("flip probability {} outside [0, 1]", self.flip_prob)));
        }
        Ok(())
    }

    /// Batches for 1-based `epoch`. Every index appears exactly once; the last
    /// batch may be short, and a trailing singleton joins the batch before it
    /// so batch statistics stay defined.
    pub fn epoch_batches(&self, len: usize, epoch: usize) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..len).collect();
        let mut rng = derive_rng(self.seed, SHUFFLE_STREAM ^ ((epoch as u64) << 32));
        order.shuffle(&mut rng);
        let mut batches: Vec<Vec<usize>> = order.chunks(self.batch_size.max(1)).map(<[usize]>::to_vec).collect();
        if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
            let last = batches.pop().unwrap_or_default();
            if let Some(prev) = batches.last_mut() {
                prev.extend(last);
            }
        }
        batches
    }
}

/// Mirror each image of a `[N, C, H, W]` batch independently with probability `prob`.
pub fn augment_flip<T: Real>(batch: &mut Tensor<T>, prob: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    let shape = batch.shape().to_vec();
    if shape.len() != 4 {
        return Err(Error::shape("augment_flip", format!("expected [N, C, H, W], got {shape:?}")));
    }
    let (n, plane_rows, w) = (shape[0], shape[1] * shape[2], shape[3]);
    let per_image = plane_rows * w;
    let data = batch.data_mut();
    for i in 0..n {
        if prob > 0.0 && rng.random_bool(prob.min(1.0)) {
            for row in data[i * per_image..(i + 1) * per_image].chunks_exact_mut(w) {
                row.reverse();
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainMonitorSplit {
    pub train: Vec<usize>,
    pub monitor: Vec<usize>,
}

/// Hold out `1 − fraction` of the samples, stratified within each identity that
/// has at least [`STRATIFY_MIN_SAMPLES`] samples and drawn from a shared pool
/// for the rest. Both index lists come back sorted.
pub fn split_train_monitor(labels: &[usize], fraction: f64, seed: u64) -> Result<TrainMonitorSplit> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Invalid(format!("train fraction {fraction} outside [0, 1]")));
    }
    let held_out = |n: usize| ((n as f64) * (1.0 - fraction)).round() as usize;
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = derive_rng(seed, 0x5350_4c54);
    let mut train = Vec::with_capacity(labels.len());
    let mut monitor = Vec::new();
    let mut pool = Vec::new();
    for members in by_class.iter_mut() {
        if members.len() >= STRATIFY_MIN_SAMPLES {
            members.shuffle(&mut rng);
            let k = held_out(members.len());
            monitor.extend_from_slice(&members[..k]);
            train.extend_from_slice(&members[k..]);
        } else {
            pool.extend_from_slice(members);
        }
    }
    pool.shuffle(&mut rng);
    let k = held_out(pool.len());
    monitor.extend_from_slice(&pool[..k]);
    train.extend_from_slice(&pool[k..]);
    train.sort_unstable();
    monitor.sort_unstable();
    Ok(TrainMonitorSplit { train, monitor })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;

    use super::*;

    #[test]
    fn hundred_samples_split_95_5() {
        for labels in [vec![0; 100], (0..100).map(|i| i % 10).collect::<Vec<_>>()] {
            let s = split_train_monitor(&labels, 0.95, 1).unwrap();
            assert_eq!((s.train.len(), s.monitor.len()), (95, 5));
            let mut all: Vec<usize> = s.train.iter().chain(&s.monitor).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..100).collect::<Vec<_>>());
            assert_eq!(s, split_train_monitor(&labels, 0.95, 1).unwrap());
        }
    }

    #[test]
    fn large_identities_are_stratified() {
        let labels: Vec<usize> = (0..400).map(|i| i % 4).collect();
        let s = split_train_monitor(&labels, 0.9, 3).unwrap();
        for c in 0..4 {
            assert_eq!(s.monitor.iter().filter(|&&i| labels[i] == c).count(), 10);
        }
    }

    #[test]
    fn flip_probabilities() {
        let orig = Tensor::<f32>::from_fn(&[3, 2, 2, 4], |i| i as f32);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut same = orig.clone();
        augment_flip(&mut same, 0.0, &mut rng).unwrap();
        assert_eq!(same, orig);
        let mut flipped = orig.clone();
        augment_flip(&mut flipped, 1.0, &mut rng).unwrap();
        for (a, b) in flipped.data().chunks(4).zip(orig.data().chunks(4)) {
            let rev: Vec<f32> = b.iter().rev().copied().collect();
            assert_eq!(a, rev.as_slice());
        }
        augment_flip(&mut flipped, 1.0, &mut rng).unwrap();
        assert_eq!(flipped, orig);
    }

    #[test]
    fn singleton_tail_is_merged() {
        let s = BatchSampler { batch_size: 4, seed: 0, flip_prob: 0.0 };
        let sizes: Vec<usize> = s.epoch_batches(9, 1).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 5]);
        let sizes: Vec<usize> = s.epoch_batches(10, 1).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        assert_ne!(s.epoch_batches(50, 1), s.epoch_batches(50, 2));
    }

    proptest! {
        #[test]
        fn each_index_once_per_epoch(len in 1usize..500, batch in 2usize..130, seed: u64, epoch in 1usize..6) {
            let s = BatchSampler { batch_size: batch, seed, flip_prob: 0.5 };
            let mut counts = vec![0u32; len];
            for b in s.epoch_batches(len, epoch) {
                prop_assert!(!b.is_empty() && b.len() <= batch + 1);
                for i in b {
                    counts[i] += 1;
                }
            }
            prop_assert!(counts.iter().all(|&c| c == 1));
        }

        #[test]
        fn split_is_a_partition(labels in proptest::collection::vec(0usize..6, 1..300), seed: u64, fraction in 0.0f64..=1.0) {
            let s = split_train_monitor(&labels, fraction, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.monitor).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        }
    }
}
