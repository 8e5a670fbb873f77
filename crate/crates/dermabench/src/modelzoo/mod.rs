//! The four convolutional backbones, classifier assembly, preprocessing and
//! checkpointing.

mod backbones;
mod checkpoint;
mod model;

pub use backbones::{BackboneId, ScalePreset};
pub use checkpoint::{
    load_checkpoint, load_weights_into, read_header, save_checkpoint, CheckpointHeader,
    FORMAT_VERSION,
};
pub use model::{
    build_model, BuildOptions, ClassifierModel, FreezePolicy, ModelTape, Preprocessing,
    WeightSource, CACHE_ENV_VAR, NUM_CLASSES,
};
