//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Every threshold the ROC sweep visits: `+∞`, distinct scores high to low, `−∞`.
pub fn sweep_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = scores.to_vec();
    t.sort_by(|a, b| b.total_cmp(a));
    t.dedup();
    let mut out = vec![f64::INFINITY];
    out.extend(t);
    out.push(f64::NEG_INFINITY);
    out
}

/// (accepted genuine, accepted impostor) at `threshold`, counted pair by pair.
pub fn accepted(scores: &[f64], genuine: &[bool], threshold: f64) -> (usize, usize) {
    let mut g = 0;
    let mut i = 0;
    for (&s, &is_g) in scores.iter().zip(genuine) {
        if s >= threshold {
            if is_g {
                g += 1;
            } else {
                i += 1;
            }
        }
    }
    (g, i)
}

pub fn class_totals(genuine: &[bool]) -> (usize, usize) {
    let g = genuine.iter().filter(|&&x| x).count();
    (g, genuine.len() - g)
}

pub struct RefPoint {
    pub threshold: f64,
    pub genuine_accepted: usize,
    pub impostor_accepted: usize,
}

pub fn roc(scores: &[f64], genuine: &[bool]) -> Vec<RefPoint> {
    sweep_thresholds(scores)
        .into_iter()
        .map(|t| {
            let (g, i) = accepted(scores, genuine, t);
            RefPoint { threshold: t, genuine_accepted: g, impostor_accepted: i }
        })
        .collect()
}

pub fn tar_at_far(scores: &[f64], genuine: &[bool], target: f64) -> f64 {
    let (gt, it) = class_totals(genuine);
    let mut best = 0.0f64;
    for t in sweep_thresholds(scores) {
        let (g, i) = accepted(scores, genuine, t);
        if i as f64 / it as f64 <= target {
            best = best.max(g as f64 / gt as f64);
        }
    }
    best
}

/// Training-fold threshold: the accuracy maximizer over `+∞` and the midpoints
/// below each distinct score (the lowest score itself for accept-all), ties
/// resolved toward the smaller threshold.
pub fn select_threshold(scores: &[f64], genuine: &[bool]) -> f64 {
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    let mut candidates = vec![f64::INFINITY];
    for k in 0..distinct.len() {
        candidates.push(match distinct.get(k + 1) {
            Some(&next) => distinct[k] + (next - distinct[k]) * 0.5,
            None => distinct[k],
        });
    }
    let correct = |t: f64| scores.iter().zip(genuine).filter(|(&s, &g)| (s >= t) == g).count();
    let best = candidates.iter().map(|&t| correct(t)).max().unwrap();
    candidates.into_iter().filter(|&t| correct(t) == best).fold(f64::INFINITY, f64::min)
}

/// Held-out correct counts and thresholds per fold.
pub fn kfold(scores: &[f64], genuine: &[bool], folds: &[Vec<usize>]) -> Vec<(f64, usize)> {
    folds
        .iter()
        .map(|fold| {
            let (mut ts, mut tg) = (Vec::new(), Vec::new());
            for i in 0..scores.len() {
                if !fold.contains(&i) {
                    ts.push(scores[i]);
                    tg.push(genuine[i]);
                }
            }
            let t = select_threshold(&ts, &tg);
            let correct = fold.iter().filter(|&&i| (scores[i] >= t) == genuine[i]).count();
            (t, correct)
        })
        .collect()
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// (i, j, cosine, same identity) for every unordered pair.
pub fn all_pairs(rows: &[Vec<f32>], labels: &[usize]) -> Vec<(usize, usize, f64, bool)> {
    let mut out = Vec::new();
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            if i < j {
                out.push((i, j, cosine(&rows[i], &rows[j]), labels[i] == labels[j]));
            }
        }
    }
    out
}

/// False accepts (descending) and false rejects (ascending) as index lists.
pub fn errors(scores: &[f64], genuine: &[bool], threshold: f64) -> (Vec<usize>, Vec<usize>) {
    let mut fa: Vec<usize> = (0..scores.len()).filter(|&i| !genuine[i] && scores[i] >= threshold).collect();
    let mut fr: Vec<usize> = (0..scores.len()).filter(|&i| genuine[i] && scores[i] < threshold).collect();
    // stable sorts keep input order among equal scores
    fa.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    fr.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    (fa, fr)
}

/// Random labeled scores with both classes present. Half of the instances
/// are quantized to produce ties.
pub fn random_scores(rng: &mut ChaCha8Rng, max_len: usize) -> (Vec<f64>, Vec<bool>) {
    let n = rng.random_range(2..=max_len);
    let quantize = rng.random_bool(0.5);
    let shift = rng.random_range(0.0..1.0);
    loop {
        let genuine: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if genuine.iter().all(|&g| g) || genuine.iter().all(|&g| !g) {
            continue;
        }
        let scores = genuine
            .iter()
            .map(|&g| {
                let s: f64 = rng.random_range(-1.0..1.0) + if g { shift } else { 0.0 };
                if quantize {
                    (s * 8.0).round() / 8.0
                } else {
                    s
                }
            })
            .collect();
        return (scores, genuine);
    }
}

/// Random partition of `0..n` into `k` non-empty folds.
pub fn random_folds(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    folds
}

/// Batch normalization with unit scale and zero shift, written out directly.
pub struct ReferenceBatchNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl ReferenceBatchNorm {
    pub fn new(d: usize, momentum: f64, eps: f64) -> Self {
        Self { mean: vec![0.0; d], var: vec![1.0; d], momentum, eps }
    }

    pub fn train(&mut self, x: &[f64], n: usize, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * d];
        for j in 0..d {
            let col: Vec<f64> = (0..n).map(|i| x[i * d + j]).collect();
            let mu = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64;
            for i in 0..n {
                out[i * d + j] = (col[i] - mu) / (var + self.eps).sqrt();
            }
            let unbiased = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            self.mean[j] = self.momentum * self.mean[j] + (1.0 - self.momentum) * mu;
            self.var[j] = self.momentum * self.var[j] + (1.0 - self.momentum) * unbiased;
        }
        out
    }

    pub fn eval(&self, x: &[f64], d: usize) -> Vec<f64> {
        x.iter().enumerate().map(|(k, v)| (v - self.mean[k % d]) / (self.var[k % d] + self.eps).sqrt()).collect()
    }
}

/// Angular scatter of 2D features from polar angles.
pub fn scatter_ratio_2d(features: &[[f64; 2]], labels: &[usize]) -> f64 {
    use std::f64::consts::TAU;
    let k = labels.iter().max().unwrap() + 1;
    let mut sums = vec![[0.0f64; 2]; k];
    for (f, &l) in features.iter().zip(labels) {
        let n = f[0].hypot(f[1]);
        sums[l][0] += f[0] / n;
        sums[l][1] += f[1] / n;
    }
    let dir: Vec<f64> = sums.iter().map(|s| s[1].atan2(s[0])).collect();
    let gap = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    };
    let mut between = 0.0;
    let mut count = 0;
    for a in 0..k {
        for b in a + 1..k {
            between += gap(dir[a], dir[b]);
            count += 1;
        }
    }
    let within: f64 =
        features.iter().zip(labels).map(|(f, &l)| gap(f[1].atan2(f[0]), dir[l])).sum::<f64>() / features.len() as f64;
    between / count as f64 / within
}
