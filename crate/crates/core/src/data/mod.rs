//! Dataset containers and the IDX (MNIST) reader.

mod dataset;
mod idx;

pub use dataset::ImageDataset;
pub use idx::{load_mnist, read_idx_images, read_idx_labels, IdxImages, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
