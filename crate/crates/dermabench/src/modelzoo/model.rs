//! Classifier assembly: backbone graph + global-average-pooled linear head,
//! per-backbone input preprocessing, and seeded / cached weight sourcing.

use std::path::PathBuf;

use ndarray::{Array2, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modelzoo::backbones::{build_backbone, BackboneId, ScalePreset};
use crate::modelzoo::checkpoint;
use crate::nn::{softmax, Graph, Initializer, Linear, Param, Tape, Trainable};
use crate::scalar::Real;

pub const NUM_CLASSES: usize = 2;

/// Whether the backbone is updated during fine-tuning or only the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FreezePolicy {
    /// Backbone weights stay fixed; only the classification head trains.
    FrozenBackbone,
    /// Every weight trains.
    #[default]
    FullFineTune,
}

/// Where backbone weights come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightSource {
    /// Look for `<cache>/<backbone>-<preset>.dmbc`; fall back to seeded
    /// initialization (with a warning) only if `allow_fallback` is set.
    Pretrained {
        cache_dir: Option<PathBuf>,
        allow_fallback: bool,
    },
    /// Seeded random initialization, no lookup.
    Seeded,
}

impl Default for WeightSource {
    fn default() -> Self {
        WeightSource::Pretrained {
            cache_dir: None,
            allow_fallback: true,
        }
    }
}

/// Environment variable naming the pretrained weight cache directory.
pub const CACHE_ENV_VAR: &str = "DERMABENCH_CACHE";

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    pub preset: ScalePreset,
    pub freeze: FreezePolicy,
    pub weights: WeightSource,
    /// Seeds the head always, and the backbone when weights are seeded.
    pub seed: u64,
}

/// Per-backbone input normalization applied after the 1/255 scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preprocessing {
    /// Per-channel standardization with the ImageNet statistics.
    ImageNet,
    /// Symmetric scaling to [-1, 1].
    PlusMinusOne,
}

impl Preprocessing {
    pub fn for_backbone(id: BackboneId) -> Self {
        match id {
            BackboneId::InceptionV3 => Preprocessing::PlusMinusOne,
            _ => Preprocessing::ImageNet,
        }
    }

    /// Normalize a (B, H, W, 3) batch of [0, 1] pixels in place.
    pub fn apply<S: Real>(self, images: &mut Array4<S>) {
        match self {
            Preprocessing::ImageNet => {
                const MEAN: [f64; 3] = [0.485, 0.456, 0.406];
                const STD: [f64; 3] = [0.229, 0.224, 0.225];
                for ch in 0..3 {
                    let mean = S::from_f64_c(MEAN[ch]);
                    let inv_std = S::from_f64_c(1.0 / STD[ch]);
                    images
                        .index_axis_mut(ndarray::Axis(3), ch)
                        .mapv_inplace(|v| (v - mean) * inv_std);
                }
            }
            Preprocessing::PlusMinusOne => {
                let half = S::from_f64_c(0.5);
                images.mapv_inplace(|v| (v - half) / half);
            }
        }
    }
}

/// Everything recorded during a training forward pass that the backward
/// pass needs.
pub struct ModelTape<S: Real> {
    graph_tape: Tape<S>,
    /// Pooled features (B, C) fed to the head.
    features: Array2<S>,
}

pub struct ClassifierModel<S: Real> {
    pub backbone_id: BackboneId,
    pub preset: ScalePreset,
    pub freeze: FreezePolicy,
    pub preprocessing: Preprocessing,
    /// Seed used for head (and possibly backbone) initialization.
    pub seed: u64,
    pub(crate) graph: Graph<S>,
    pub(crate) head: Linear<S>,
    feature_dim: usize,
}

impl<S: Real> ClassifierModel<S> {
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Count of all weights (backbone + head), trainable or not.
    pub fn total_params(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.value.len());
        n
    }

    fn to_nchw(images: &Array4<S>) -> Array4<S> {
        images
            .view()
            .permuted_axes([0, 3, 1, 2])
            .as_standard_layout()
            .to_owned()
    }

    fn pool_features(tape: &Tape<S>) -> Array2<S> {
        let pooled = tape.output(); // (B, C, 1, 1)
        let (b, c) = (pooled.shape()[0], pooled.shape()[1]);
        pooled
            .view()
            .into_shape_with_order((b, c))
            .expect("pooled output is (B, C, 1, 1)")
            .to_owned()
    }

    /// Forward pass on a (B, H, W, 3) already-preprocessed batch.
    /// Returns logits (B, 2) and the tape needed for `backward`.
    pub fn forward(&mut self, images: &Array4<S>, train: bool) -> (Array2<S>, ModelTape<S>) {
        let tape = self.graph.forward(Self::to_nchw(images), train);
        let features = Self::pool_features(&tape);
        let logits = self.head.forward(&features);
        (logits, ModelTape {
            graph_tape: tape,
            features,
        })
    }

    /// Accumulate parameter gradients from the gradient at the logits.
    /// With a frozen backbone only the head receives gradients.
    pub fn backward(&mut self, tape: &ModelTape<S>, grad_logits: &Array2<S>) {
        let grad_features = self.head.backward(&tape.features, grad_logits);
        if self.freeze == FreezePolicy::FrozenBackbone {
            return;
        }
        let (b, c) = grad_features.dim();
        let grad_pooled = grad_features
            .into_shape_with_order((b, c, 1, 1))
            .expect("reshape (B, C) to (B, C, 1, 1)");
        self.graph.backward(&tape.graph_tape, grad_pooled);
    }

    /// Class probabilities (B, 2) in inference mode.
    pub fn predict(&mut self, images: &Array4<S>) -> Array2<S> {
        let (logits, _) = self.forward(images, false);
        softmax(&logits)
    }
}

impl<S: Real> Trainable<S> for ClassifierModel<S> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        self.graph.visit_params(f);
        self.head.visit_params(f);
    }
}

/// Build a classifier for `id` according to `opts`.
pub fn build_model<S: Real>(id: BackboneId, opts: &BuildOptions) -> Result<ClassifierModel<S>> {
    // Backbone and head draw from one seeded stream; construction order is
    // fixed, so a (backbone, preset, seed) triple fully determines the weights.
    let mut init = Initializer::new(opts.seed);
    let backbone = build_backbone::<S>(id, opts.preset, &mut init);
    let head = Linear::new(backbone.feature_dim, NUM_CLASSES, &mut init);
    let mut model = ClassifierModel {
        backbone_id: id,
        preset: opts.preset,
        freeze: opts.freeze,
        preprocessing: Preprocessing::for_backbone(id),
        seed: opts.seed,
        graph: backbone.graph,
        head,
        feature_dim: backbone.feature_dim,
    };

    if let WeightSource::Pretrained {
        cache_dir,
        allow_fallback,
    } = &opts.weights
    {
        let dir = cache_dir
            .clone()
            .or_else(|| std::env::var_os(CACHE_ENV_VAR).map(PathBuf::from));
        let candidate =
            dir.map(|d| d.join(format!("{}-{}.dmbc", id.slug(), opts.preset.slug())));
        match &candidate {
            Some(path) if path.is_file() => {
                checkpoint::load_weights_into(&mut model, path)?;
                log::info!("loaded pretrained weights for {id} from {}", path.display());
            }
            _ => {
                let searched = candidate
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| format!("${CACHE_ENV_VAR} (unset)"));
                if !allow_fallback {
                    return Err(Error::WeightsUnavailable {
                        backbone: id.display_name().to_string(),
                        searched,
                    });
                }
                log::warn!(
                    "no pretrained weights for {id} (looked in {searched}); \
                     using seeded initialization"
                );
            }
        }
    }

    if opts.freeze == FreezePolicy::FrozenBackbone {
        model.graph.visit_params(&mut |p| p.trainable = false);
    }
    Ok(model)
}
