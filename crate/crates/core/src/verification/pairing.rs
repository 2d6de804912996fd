use std::sync::atomic::{AtomicUsize, Ordering};

use super::metrics::{RocCurve, RocPoint, ScoreSet, ScoredPair};
use crate::error::{Error, Result};
use crate::tensor_core::Real;

/// Uniform score bins over `[-1, 1]`.
pub const HISTOGRAM_BINS: usize = 10_000;

const BLOCK: usize = 256;

/// Worker cap: `DV_THREADS` when set to a positive integer, else the
/// available parallelism.
pub fn worker_count() -> usize {
    std::env::var("DV_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from))
}

/// All `i < j` pairs in lexicographic order, scored by cosine similarity.
pub fn exhaustive_pairs(embeddings: &[Vec<f32>], labels: &[usize]) -> Result<(ScoreSet, Vec<(usize, usize)>)> {
    if embeddings.len() != labels.len() {
        return Err(Error::shape("exhaustive_pairs", format!("{} embeddings, {} labels", embeddings.len(), labels.len())));
    }
    if embeddings.len() < 2 {
        return Err(Error::Invalid("exhaustive pairing needs at least two embeddings".into()));
    }
    let mut pairs = Vec::new();
    let mut index = Vec::new();
    for i in 0..embeddings.len() {
        for j in i + 1..embeddings.len() {
            let score = super::cosine_similarity(&embeddings[i], &embeddings[j])?;
            pairs.push(ScoredPair { score, genuine: labels[i] == labels[j] });
            index.push((i, j));
        }
    }
    Ok((ScoreSet::new(pairs)?, index))
}

trait Accumulator: Send {
    fn visit(&mut self, score: f32, genuine: bool);
    fn merge(&mut self, other: Self);
}

/// Genuine and impostor score counts per bin over every pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairHistogram {
    pub genuine: Vec<u64>,
    pub impostor: Vec<u64>,
}

impl Default for PairHistogram {
    fn default() -> Self {
        Self { genuine: vec![0; HISTOGRAM_BINS], impostor: vec![0; HISTOGRAM_BINS] }
    }
}

impl PairHistogram {
    pub fn bin_of(score: f64) -> usize {
        let b = ((score + 1.0) * 0.5 * HISTOGRAM_BINS as f64).floor();
        (b.max(0.0) as usize).min(HISTOGRAM_BINS - 1)
    }

    pub fn bin_lower_edge(bin: usize) -> f64 {
        bin as f64 * 2.0 / HISTOGRAM_BINS as f64 - 1.0
    }

    pub fn genuine_total(&self) -> u64 {
        self.genuine.iter().sum()
    }

    pub fn impostor_total(&self) -> u64 {
        self.impostor.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.genuine_total() + self.impostor_total()
    }

    /// Curve with one point per bin lower edge, rates resolved to bin width.
    pub fn roc(&self) -> Result<RocCurve> {
        let (gt, it) = (self.genuine_total(), self.impostor_total());
        if gt == 0 || it == 0 {
            return Err(Error::Invalid(format!("ROC needs both classes, got {gt} genuine and {it} impostor")));
        }
        let mut points = vec![RocPoint { far: 0.0, tar: 0.0, threshold: f64::INFINITY }];
        let (mut ga, mut ia) = (0u64, 0u64);
        for bin in (0..HISTOGRAM_BINS).rev() {
            if self.genuine[bin] == 0 && self.impostor[bin] == 0 {
                continue;
            }
            ga += self.genuine[bin];
            ia += self.impostor[bin];
            let threshold = if bin == 0 { f64::NEG_INFINITY } else { Self::bin_lower_edge(bin) };
            points.push(RocPoint { far: ia as f64 / it as f64, tar: ga as f64 / gt as f64, threshold });
        }
        if points.last().is_some_and(|p| p.threshold != f64::NEG_INFINITY) {
            points.push(RocPoint { far: 1.0, tar: 1.0, threshold: f64::NEG_INFINITY });
        }
        Ok(RocCurve { points })
    }
}

impl Accumulator for PairHistogram {
    fn visit(&mut self, score: f32, genuine: bool) {
        let b = Self::bin_of(score as f64);
        if genuine {
            self.genuine[b] += 1;
        } else {
            self.impostor[b] += 1;
        }
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.genuine.iter_mut().zip(other.genuine) {
            *a += b;
        }
        for (a, b) in self.impostor.iter_mut().zip(other.impostor) {
            *a += b;
        }
    }
}

/// Pairs with score ≥ each threshold; `thresholds` sorted ascending.
#[derive(Debug, Clone)]
struct ThresholdCounts {
    thresholds: Vec<f32>,
    genuine: Vec<u64>,
    impostor: Vec<u64>,
}

impl Accumulator for ThresholdCounts {
    fn visit(&mut self, score: f32, genuine: bool) {
        // number of thresholds ≤ score: the pair counts toward each of them
        let k = self.thresholds.partition_point(|&t| t <= score);
        if k > 0 {
            if genuine {
                self.genuine[k - 1] += 1;
            } else {
                self.impostor[k - 1] += 1;
            }
        }
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.genuine.iter_mut().zip(other.genuine) {
            *a += b;
        }
        for (a, b) in self.impostor.iter_mut().zip(other.impostor) {
            *a += b;
        }
    }
}

fn unit_rows(data: &[f32], dim: usize) -> Result<Vec<f32>> {
    if dim == 0 || data.len() % dim != 0 {
        return Err(Error::shape("exhaustive pairing", format!("{} values are not rows of {dim}", data.len())));
    }
    let mut out = data.to_vec();
    for (i, row) in out.chunks_exact_mut(dim).enumerate() {
        let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Invalid(format!("embedding row {i} is zero or non-finite")));
        }
        let inv = (1.0 / norm) as f32;
        row.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(out)
}

/// Scores every unordered pair through `BLOCK × BLOCK` products, spreading row
/// blocks over `threads` workers and merging their accumulators.
fn stream_pairs<A: Accumulator>(data: &[f32], dim: usize, labels: &[usize], threads: usize, init: impl Fn() -> A + Sync) -> Result<A> {
    let rows = unit_rows(data, dim)?;
    let n = rows.len() / dim;
    if labels.len() != n {
        return Err(Error::shape("exhaustive pairing", format!("{n} rows, {} labels", labels.len())));
    }
    if n < 2 {
        return Err(Error::Invalid("exhaustive pairing needs at least two embeddings".into()));
    }
    let blocks = n.div_ceil(BLOCK);
    let next = AtomicUsize::new(0);
    let work = || {
        let mut acc = init();
        let mut scores = vec![0f32; BLOCK * BLOCK];
        loop {
            let bi = next.fetch_add(1, Ordering::Relaxed);
            if bi >= blocks {
                break;
            }
            let (r0, r1) = (bi * BLOCK, ((bi + 1) * BLOCK).min(n));
            for bj in bi..blocks {
                let (c0, c1) = (bj * BLOCK, ((bj + 1) * BLOCK).min(n));
                let (m, k) = (r1 - r0, c1 - c0);
                f32::gemm(
                    m,
                    dim,
                    k,
                    1.0,
                    &rows[r0 * dim..r1 * dim],
                    (dim as isize, 1),
                    &rows[c0 * dim..c1 * dim],
                    (1, dim as isize),
                    0.0,
                    &mut scores[..m * k],
                    (k as isize, 1),
                );
                for i in 0..m {
                    let start = if bi == bj { i + 1 } else { 0 };
                    for j in start..k {
                        acc.visit(scores[i * k + j], labels[r0 + i] == labels[c0 + j]);
                    }
                }
            }
        }
        acc
    };
    let threads = threads.clamp(1, blocks);
    if threads == 1 {
        return Ok(work());
    }
    let parts: Vec<A> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads).map(|_| s.spawn(&work)).collect();
        handles.into_iter().map(|h| h.join().expect("pairing worker panicked")).collect()
    });
    let mut iter = parts.into_iter();
    let mut total = iter.next().expect("at least one worker");
    for p in iter {
        total.merge(p);
    }
    Ok(total)
}

/// Score histogram over all pairs of the `n × dim` row-major `data`.
pub fn exhaustive_histogram(data: &[f32], dim: usize, labels: &[usize], threads: usize) -> Result<PairHistogram> {
    stream_pairs(data, dim, labels, threads, PairHistogram::default)
}

/// Exact `(genuine, impostor)` counts of pairs scoring at or above each threshold.
pub fn exhaustive_counts_at(data: &[f32], dim: usize, labels: &[usize], thresholds: &[f64], threads: usize) -> Result<Vec<(u64, u64)>> {
    let mut order: Vec<usize> = (0..thresholds.len()).collect();
    order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]));
    let sorted: Vec<f32> = order.iter().map(|&i| thresholds[i] as f32).collect();
    let m = sorted.len();
    let counts = stream_pairs(data, dim, labels, threads, || ThresholdCounts {
        thresholds: sorted.clone(),
        genuine: vec![0; m],
        impostor: vec![0; m],
    })?;
    // bucket k holds pairs whose largest passed threshold is k; suffix sums
    // turn that into "at or above threshold k", which includes every bucket ≥ k
    let mut out = vec![(0, 0); m];
    let (mut g, mut imp) = (0, 0);
    for k in (0..m).rev() {
        g += counts.genuine[k];
        imp += counts.impostor[k];
        out[order[k]] = (g, imp);
    }
    Ok(out)
}
