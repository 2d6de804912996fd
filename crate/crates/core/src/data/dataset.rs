use crate::error::{Error, Result};
use crate::tensor_core::Tensor;

/// Labelled images of one fixed `[C, H, W]` shape, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    shape: [usize; 3],
    pixels: Vec<f32>,
    labels: Vec<usize>,
}

impl ImageDataset {
    pub fn new(shape: [usize; 3], pixels: Vec<f32>, labels: Vec<usize>) -> Result<Self> {
        let per = shape.iter().product::<usize>();
        if per == 0 || pixels.len() != per * labels.len() {
            return Err(Error::shape(
                "dataset",
                format!("{} values for {} images of {shape:?}", pixels.len(), labels.len()),
            ));
        }
        Ok(Self { shape, pixels, labels })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    fn image_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    /// Stacks the listed samples into `[N, C, H, W]`.
    pub fn batch(&self, indices: &[usize]) -> (Tensor<f32>, Vec<usize>) {
        let mut data = Vec::with_capacity(indices.len() * self.image_len());
        for &i in indices {
            data.extend_from_slice(self.image(i));
        }
        let [c, h, w] = self.shape;
        let tensor = Tensor::new(&[indices.len(), c, h, w], data).expect("extents match");
        (tensor, indices.iter().map(|&i| self.labels[i]).collect())
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.image_len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        Self { shape: self.shape, pixels, labels: indices.iter().map(|&i| self.labels[i]).collect() }
    }
}
