//! Batched streaming over a split manifest (or an in-memory dataset).
//!
//! Train streams are reshuffled every epoch from the stream seed and may be
//! augmented; validation streams are fixed-order and never augmented. All
//! per-sample randomness is derived from (seed, epoch, sample id), so the
//! degree of loader parallelism can never change the produced pixels.

use std::path::PathBuf;

use ndarray::{Array2, Array3, Array4};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::augment::{augment, AugmentationConfig};
use crate::data::image_io::{load_image, ImageTensor, INPUT_SIZE};
use crate::data::manifest::{DatasetManifest, LesionLabel, Split};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One minibatch: images as (B, H, W, 3) in [0, 1], labels one-hot (B, 2).
#[derive(Debug, Clone)]
pub struct Batch<S: Real> {
    pub images: Array4<S>,
    pub labels: Array2<S>,
    /// True class index per sample, aligned with the batch rows.
    pub class_indices: Vec<usize>,
}

impl<S: Real> Batch<S> {
    pub fn len(&self) -> usize {
        self.images.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Anything that can replay epochs of batches.
pub trait BatchSource<S: Real> {
    fn num_samples(&self) -> usize;
    fn batch_size(&self) -> usize;
    /// Batches for one epoch; ceil(n / batch_size) items, each sample once.
    fn epoch(&self, epoch: usize) -> Box<dyn Iterator<Item = Result<Batch<S>>> + '_>;

    fn num_batches(&self) -> usize {
        self.num_samples().div_ceil(self.batch_size())
    }
}

/// splitmix64-style mix for deriving independent RNG streams.
fn mix_seed(words: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &w in words {
        let mut z = h ^ w.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// RNG for one sample of one epoch; independent of loading order.
pub fn sample_rng(seed: u64, epoch: usize, sample_id: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(&[seed, epoch as u64, sample_id as u64, 1]))
}

fn shuffle_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(&[seed, epoch as u64, 2]))
}

fn stack_batch<S: Real>(
    images: Vec<Array3<S>>,
    labels: &[LesionLabel],
) -> Result<Batch<S>> {
    let b = images.len();
    let (h, w) = (images[0].shape()[0], images[0].shape()[1]);
    let mut out = Array4::zeros((b, h, w, 3));
    for (i, img) in images.into_iter().enumerate() {
        out.index_axis_mut(ndarray::Axis(0), i).assign(&img);
    }
    let mut one_hot = Array2::zeros((b, 2));
    let mut class_indices = Vec::with_capacity(b);
    for (i, &label) in labels.iter().enumerate() {
        let oh = label.one_hot::<S>();
        one_hot[[i, 0]] = oh[0];
        one_hot[[i, 1]] = oh[1];
        class_indices.push(label.class_index());
    }
    Ok(Batch {
        images: out,
        labels: one_hot,
        class_indices,
    })
}

struct StreamSample {
    /// Stable id used for RNG derivation (manifest entry index).
    id: usize,
    path: PathBuf,
    label: LesionLabel,
}

/// File-backed batch stream over one split of a manifest.
pub struct BatchStream<S: Real> {
    samples: Vec<StreamSample>,
    split: Split,
    batch_size: usize,
    augment: Option<AugmentationConfig>,
    seed: u64,
    target_size: (usize, usize),
    _marker: std::marker::PhantomData<S>,
}

impl<S: Real> BatchStream<S> {
    pub fn new(
        manifest: &DatasetManifest,
        split: Split,
        batch_size: usize,
        augment_config: Option<AugmentationConfig>,
        seed: u64,
    ) -> Result<Self> {
        if batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".to_string()));
        }
        if !manifest.is_split() {
            return Err(Error::ManifestState(
                "batch stream requires a split manifest".to_string(),
            ));
        }
        if split == Split::Validation && augment_config.is_some() {
            return Err(Error::Config(
                "the validation stream must not be augmented".to_string(),
            ));
        }
        if let Some(cfg) = &augment_config {
            cfg.validate()?;
        }
        let samples = manifest
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.split == Some(split))
            .map(|(id, e)| StreamSample {
                id,
                path: manifest.absolute_path(e),
                label: e.label,
            })
            .collect();
        Ok(BatchStream {
            samples,
            split,
            batch_size,
            augment: augment_config,
            seed,
            target_size: INPUT_SIZE,
            _marker: std::marker::PhantomData,
        })
    }

    fn epoch_order(&self, epoch: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.samples.len()).collect();
        if self.split == Split::Train {
            order.shuffle(&mut shuffle_rng(self.seed, epoch));
        }
        order
    }

    fn load_one(&self, sample: &StreamSample, epoch: usize) -> Result<Array3<S>> {
        let img: ImageTensor<S> = load_image(&sample.path, self.target_size)?;
        match &self.augment {
            Some(cfg) => {
                let mut rng = sample_rng(self.seed, epoch, sample.id);
                Ok(augment(&img, cfg, &mut rng)?.pixels)
            }
            None => Ok(img.pixels),
        }
    }
}

impl<S: Real> BatchSource<S> for BatchStream<S> {
    fn num_samples(&self) -> usize {
        self.samples.len()
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn epoch(&self, epoch: usize) -> Box<dyn Iterator<Item = Result<Batch<S>>> + '_> {
        let order = self.epoch_order(epoch);
        let chunks: Vec<Vec<usize>> = order
            .chunks(self.batch_size)
            .map(|c| c.to_vec())
            .collect();
        Box::new(chunks.into_iter().map(move |chunk| {
            let mut images = Vec::with_capacity(chunk.len());
            let mut labels = Vec::with_capacity(chunk.len());
            for idx in chunk {
                let sample = &self.samples[idx];
                images.push(self.load_one(sample, epoch)?);
                labels.push(sample.label);
            }
            stack_batch(images, &labels)
        }))
    }
}

/// In-memory dataset with the same epoch semantics as [`BatchStream`];
/// used for synthetic experiments and tests.
#[derive(Clone)]
pub struct MemoryDataset<S: Real> {
    pub images: Vec<Array3<S>>,
    pub labels: Vec<LesionLabel>,
    pub batch_size: usize,
    pub shuffle: bool,
    pub augment: Option<AugmentationConfig>,
    pub seed: u64,
}

impl<S: Real> MemoryDataset<S> {
    pub fn new(
        images: Vec<Array3<S>>,
        labels: Vec<LesionLabel>,
        batch_size: usize,
    ) -> Result<Self> {
        if batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".to_string()));
        }
        assert_eq!(images.len(), labels.len());
        Ok(MemoryDataset {
            images,
            labels,
            batch_size,
            shuffle: false,
            augment: None,
            seed: 0,
        })
    }
}

impl<S: Real> BatchSource<S> for MemoryDataset<S> {
    fn num_samples(&self) -> usize {
        self.images.len()
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn epoch(&self, epoch: usize) -> Box<dyn Iterator<Item = Result<Batch<S>>> + '_> {
        let mut order: Vec<usize> = (0..self.images.len()).collect();
        if self.shuffle {
            order.shuffle(&mut shuffle_rng(self.seed, epoch));
        }
        let chunks: Vec<Vec<usize>> = order
            .chunks(self.batch_size)
            .map(|c| c.to_vec())
            .collect();
        Box::new(chunks.into_iter().map(move |chunk| {
            let mut images = Vec::with_capacity(chunk.len());
            let mut labels = Vec::with_capacity(chunk.len());
            for idx in chunk {
                let img = match &self.augment {
                    Some(cfg) => {
                        let tensor = ImageTensor::from_pixels(self.images[idx].clone(), "mem");
                        let mut rng = sample_rng(self.seed, epoch, idx);
                        augment(&tensor, cfg, &mut rng)?.pixels
                    }
                    None => self.images[idx].clone(),
                };
                images.push(img);
                labels.push(self.labels[idx]);
            }
            stack_batch(images, &labels)
        }))
    }
}
