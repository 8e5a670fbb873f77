//! Dataset ingest, deterministic stratified splitting, image loading and the
//! stochastic augmentation pipeline.

mod augment;
mod batch;
mod image_io;
mod manifest;

pub use augment::{augment, flip_horizontal, flip_vertical, AugmentationConfig};
pub use batch::{sample_rng, Batch, BatchSource, BatchStream, MemoryDataset};
pub use image_io::{load_image, ImageTensor, INPUT_SIZE};
pub use manifest::{
    scan_dataset, split_manifest, DatasetManifest, LesionLabel, ManifestEntry, ScanWarning, Split,
    SplitCounts,
};
