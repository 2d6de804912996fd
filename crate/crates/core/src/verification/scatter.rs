use crate::error::{Error, Result};

/// Angular geometry of unit-normalized features grouped by class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterSummary {
    /// Mean angle between class-mean directions over all class pairs.
    pub between: f64,
    /// Mean angle between a sample and its class-mean direction.
    pub within: f64,
    /// `between / within`.
    pub ratio: f64,
}

fn angle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    let cross = (na * nb - dot * dot).max(0.0).sqrt();
    cross.atan2(dot)
}

/// Class-mean direction is the direction of the mean of the unit vectors.
/// Classes without samples are skipped; at least two must remain.
pub fn angular_scatter(features: &[Vec<f32>], labels: &[usize]) -> Result<ScatterSummary> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(Error::shape("angular_scatter", format!("{} features, {} labels", features.len(), labels.len())));
    }
    let dim = features[0].len();
    let units = features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if f.len() != dim {
                return Err(Error::shape("angular_scatter", format!("row {i} has {} values, expected {dim}", f.len())));
            }
            let v: Vec<f64> = f.iter().map(|&x| x as f64).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n == 0.0 || !n.is_finite() {
                return Err(Error::Invalid(format!("feature row {i} is zero or non-finite")));
            }
            Ok(v.into_iter().map(|x| x / n).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut sums = vec![vec![0f64; dim]; classes];
    let mut counts = vec![0usize; classes];
    for (u, &l) in units.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(u) {
            *s += x;
        }
    }
    let present: Vec<usize> = (0..classes).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::Invalid("angular scatter needs at least two classes".into()));
    }
    let mut between = 0.0;
    let mut pairs = 0usize;
    for (i, &a) in present.iter().enumerate() {
        for &b in &present[i + 1..] {
            between += angle(&sums[a], &sums[b]);
            pairs += 1;
        }
    }
    between /= pairs as f64;
    let within = units.iter().zip(labels).map(|(u, &l)| angle(u, &sums[l])).sum::<f64>() / units.len() as f64;
    Ok(ScatterSummary { between, within, ratio: between / within })
}
