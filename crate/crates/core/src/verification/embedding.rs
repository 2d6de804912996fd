use crate::architectures::{FeatureTap, Model};
use crate::error::{Error, Result};
use crate::tensor_core::{NormMode, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f32>,
    pub source: String,
    pub identity: Option<String>,
}

impl Embedding {
    pub fn new(values: Vec<f32>) -> Self {
        Self { values, source: String::new(), identity: None }
    }
}

/// Subject-level collection of embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub id: String,
    pub members: Vec<Embedding>,
}

pub fn flip_max(original: &[f32], flipped: &[f32]) -> Vec<f32> {
    original.iter().zip(flipped).map(|(&a, &b)| a.max(b)).collect()
}

/// Flip-max embeddings for a `[N, C, H, W]` batch, one row per image. The
/// model is switched to eval mode.
pub fn extract_embeddings(model: &mut Model<f32>, images: &Tensor<f32>) -> Result<Vec<Vec<f32>>> {
    model.set_mode(NormMode::Eval);
    let shape = images.shape().to_vec();
    if shape.len() != 4 {
        return Err(Error::shape("extract_embedding", format!("expected [N, C, H, W], got {shape:?}")));
    }
    let w = shape[3];
    let mut mirrored = images.clone();
    for row in mirrored.data_mut().chunks_exact_mut(w) {
        row.reverse();
    }
    let f = model.features(images, FeatureTap::PostNorm)?;
    let g = model.features(&mirrored, FeatureTap::PostNorm)?;
    Ok(f.rows().zip(g.rows()).map(|(a, b)| flip_max(a, b)).collect())
}

/// Flip-max embedding of a single `[C, H, W]` image.
pub fn extract_embedding(model: &mut Model<f32>, image: &Tensor<f32>) -> Result<Vec<f32>> {
    let mut shape = vec![1];
    shape.extend_from_slice(image.shape());
    let batch = image.clone().reshape(&shape)?;
    Ok(extract_embeddings(model, &batch)?.remove(0))
}

/// Element-wise mean of the members.
pub fn fuse_template(template: &Template) -> Result<Embedding> {
    let first = template
        .members
        .first()
        .ok_or_else(|| Error::Invalid(format!("template {:?} has no members", template.id)))?;
    let dim = first.values.len();
    let mut sum = vec![0f64; dim];
    for m in &template.members {
        if m.values.len() != dim {
            return Err(Error::shape("fuse_template", format!("member dims {} and {}", dim, m.values.len())));
        }
        for (s, &v) in sum.iter_mut().zip(&m.values) {
            *s += v as f64;
        }
    }
    let n = template.members.len() as f64;
    Ok(Embedding {
        values: sum.into_iter().map(|s| (s / n) as f32).collect(),
        source: template.id.clone(),
        identity: first.identity.clone(),
    })
}

pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("cosine_similarity", format!("dims {} and {}", a.len(), b.len())));
    }
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Invalid("cosine similarity of a zero vector".into()));
    }
    if !(dot.is_finite() && na.is_finite() && nb.is_finite()) {
        return Err(Error::Invalid("non-finite embedding".into()));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}
