use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub score: f64,
    pub genuine: bool,
}

/// Labeled similarity scores; genuine pairs share an identity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub pairs: Vec<ScoredPair>,
}

impl ScoreSet {
    pub fn new(pairs: Vec<ScoredPair>) -> Result<Self> {
        if let Some(p) = pairs.iter().find(|p| !p.score.is_finite()) {
            return Err(Error::Invalid(format!("non-finite score {}", p.score)));
        }
        Ok(Self { pairs })
    }

    pub fn from_parts(scores: &[f64], genuine: &[bool]) -> Result<Self> {
        if scores.len() != genuine.len() {
            return Err(Error::shape("score set", format!("{} scores, {} labels", scores.len(), genuine.len())));
        }
        Self::new(scores.iter().zip(genuine).map(|(&score, &genuine)| ScoredPair { score, genuine }).collect())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn genuine_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.genuine).count()
    }

    pub fn impostor_count(&self) -> usize {
        self.len() - self.genuine_count()
    }
}

/// One thresholded decision rule, `score ≥ threshold` accepts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub far: f64,
    pub tar: f64,
    pub threshold: f64,
}

/// Operating points ordered by increasing FAR (decreasing threshold).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

/// Sweeps `+∞`, every distinct score from high to low, and `−∞`.
pub fn roc_curve(scores: &ScoreSet) -> Result<RocCurve> {
    let genuine = scores.genuine_count();
    let impostor = scores.impostor_count();
    if genuine == 0 || impostor == 0 {
        return Err(Error::Invalid(format!("ROC needs both classes, got {genuine} genuine and {impostor} impostor")));
    }
    let mut sorted = scores.pairs.clone();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let rate = |accepted: usize, total: usize| accepted as f64 / total as f64;
    let mut points = vec![RocPoint { far: 0.0, tar: 0.0, threshold: f64::INFINITY }];
    let (mut ga, mut ia) = (0, 0);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].score;
        while i < sorted.len() && sorted[i].score == t {
            if sorted[i].genuine {
                ga += 1;
            } else {
                ia += 1;
            }
            i += 1;
        }
        points.push(RocPoint { far: rate(ia, impostor), tar: rate(ga, genuine), threshold: t });
    }
    points.push(RocPoint { far: 1.0, tar: 1.0, threshold: f64::NEG_INFINITY });
    Ok(RocCurve { points })
}

/// Highest TAR among operating points whose FAR does not exceed the target.
pub fn tar_at_far(curve: &RocCurve, far_target: f64) -> f64 {
    curve.points.iter().filter(|p| p.far <= far_target).map(|p| p.tar).fold(0.0, f64::max)
}

/// Accuracy-maximizing threshold over the given scores; ties go to the
/// smallest candidate. Each candidate accepts the pairs scoring at or above
/// some distinct score and sits midway to the next lower score (at the lowest
/// score for accept-all); `+∞` rejects everything.
pub fn select_threshold(train: &[ScoredPair]) -> f64 {
    let mut sorted = train.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let impostors = sorted.iter().filter(|p| !p.genuine).count();
    // correct = accepted genuine + rejected impostors
    let mut correct = impostors;
    let mut best = (correct, f64::INFINITY);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].score;
        while i < sorted.len() && sorted[i].score == t {
            if sorted[i].genuine {
                correct += 1;
            } else {
                correct -= 1;
            }
            i += 1;
        }
        if correct >= best.0 {
            let threshold = sorted.get(i).map_or(t, |next| t + (next.score - t) * 0.5);
            best = (correct, threshold);
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub thresholds: Vec<f64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub std: f64,
}

/// `k` consecutive blocks of `0..n`, sizes differing by at most one.
pub fn contiguous_folds(n: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if k == 0 || n < k {
        return Err(Error::Invalid(format!("{n} pairs cannot fill {k} folds")));
    }
    Ok((0..k).map(|i| (i * n / k..(i + 1) * n / k).collect()).collect())
}

/// For each fold, pick the threshold on the other folds and score the held-out one.
pub fn kfold_accuracy(scores: &ScoreSet, folds: &[Vec<usize>]) -> Result<FoldResult> {
    let n = scores.len();
    if folds.is_empty() || n < folds.len() {
        return Err(Error::Invalid(format!("{n} pairs cannot fill {} folds", folds.len())));
    }
    let mut owner = vec![usize::MAX; n];
    for (f, fold) in folds.iter().enumerate() {
        if fold.is_empty() {
            return Err(Error::Invalid(format!("fold {} is empty", f + 1)));
        }
        for &i in fold {
            if i >= n || owner[i] != usize::MAX {
                return Err(Error::Invalid(format!("pair index {i} is out of range or in two folds")));
            }
            owner[i] = f;
        }
    }
    if owner.contains(&usize::MAX) {
        return Err(Error::Invalid("folds do not cover every pair".into()));
    }
    let mut thresholds = Vec::with_capacity(folds.len());
    let mut accuracies = Vec::with_capacity(folds.len());
    for (f, fold) in folds.iter().enumerate() {
        let train: Vec<ScoredPair> = scores.pairs.iter().zip(&owner).filter(|(_, &o)| o != f).map(|(p, _)| *p).collect();
        let t = select_threshold(&train);
        let correct = fold.iter().filter(|&&i| (scores.pairs[i].score >= t) == scores.pairs[i].genuine).count();
        thresholds.push(t);
        accuracies.push(correct as f64 / fold.len() as f64);
    }
    let k = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / k;
    let std = if accuracies.len() > 1 {
        (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(FoldResult { thresholds, accuracies, mean, std })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedPair {
    /// Position of the pair in the score set.
    pub index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRanking {
    /// Impostor pairs accepted, highest score first.
    pub false_accepts: Vec<RankedPair>,
    /// Genuine pairs rejected, lowest score first.
    pub false_rejects: Vec<RankedPair>,
}

impl ErrorRanking {
    /// False accepts per false reject; `None` without false rejects.
    pub fn ratio(&self) -> Option<f64> {
        (!self.false_rejects.is_empty()).then(|| self.false_accepts.len() as f64 / self.false_rejects.len() as f64)
    }
}

/// Misclassified pairs at `threshold`; equal scores keep their input order.
pub fn rank_errors(scores: &ScoreSet, threshold: f64) -> Result<ErrorRanking> {
    if !threshold.is_finite() {
        return Err(Error::Invalid(format!("threshold must be finite, got {threshold}")));
    }
    let mut false_accepts = Vec::new();
    let mut false_rejects = Vec::new();
    for (index, p) in scores.pairs.iter().enumerate() {
        let accepted = p.score >= threshold;
        let r = RankedPair { index, score: p.score };
        match (accepted, p.genuine) {
            (true, false) => false_accepts.push(r),
            (false, true) => false_rejects.push(r),
            _ => {}
        }
    }
    false_accepts.sort_by(|a, b| b.score.total_cmp(&a.score));
    false_rejects.sort_by(|a, b| a.score.total_cmp(&b.score));
    Ok(ErrorRanking { false_accepts, false_rejects })
}
