//! The fine-tuning loop: Adam over categorical cross-entropy, per-epoch
//! validation, run records and artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{AugmentationConfig, BatchSource, BatchStream, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::metrics::{classification_report, render_confusion, render_curves, MetricsReport, RunSummary};
use crate::modelzoo::{
    build_model, save_checkpoint, BackboneId, BuildOptions, ClassifierModel, FreezePolicy,
    ScalePreset, WeightSource,
};
use crate::nn::{cross_entropy_with_softmax, softmax, Adam, Trainable};
use crate::scalar::Real;

/// Optimization hyperparameters. Defaults are the benchmark settings:
/// Adam at 1e-4, 20 epochs, batches of 64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 20,
            batch_size: 64,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// One epoch of the training history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub wall_clock_secs: f64,
}

/// History as CSV (the format consumed by the curve renderer).
pub fn history_csv(rows: &[HistoryRow]) -> Result<String> {
    let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
        ));
    }
    Ok(out)
}

/// Index of the winning class; ties break toward the lower index.
pub fn argmax<S: Real>(row: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Everything measured during one evaluation pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    /// (true class, predicted class) per sample, in stream order.
    pub pairs: Vec<(usize, usize)>,
    /// Class probabilities per sample, in stream order.
    pub probabilities: Vec<[f64; 2]>,
}

impl Evaluation {
    pub fn report(&self) -> Result<MetricsReport> {
        classification_report(&self.pairs)
    }
}

/// Run the model over `source` in inference mode.
pub fn evaluate<S: Real>(
    model: &mut ClassifierModel<S>,
    source: &dyn BatchSource<S>,
) -> Result<Evaluation> {
    if source.num_samples() == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut pairs = Vec::with_capacity(source.num_samples());
    let mut probabilities = Vec::with_capacity(source.num_samples());
    for batch in source.epoch(0) {
        let batch = batch?;
        let mut images = batch.images;
        model.preprocessing.apply(&mut images);
        let (logits, _) = model.forward(&images, false);
        let (loss, _) = cross_entropy_with_softmax(&logits, &batch.labels);
        loss_sum += loss.to_f64_c() * batch.class_indices.len() as f64;
        let probs = softmax(&logits);
        for (i, &truth) in batch.class_indices.iter().enumerate() {
            let row: Vec<S> = probs.row(i).to_vec();
            let pred = argmax(&row);
            if pred == truth {
                correct += 1;
            }
            pairs.push((truth, pred));
            probabilities.push([row[0].to_f64_c(), row[1].to_f64_c()]);
        }
    }
    let n = pairs.len() as f64;
    Ok(Evaluation {
        loss: loss_sum / n,
        accuracy: correct as f64 / n,
        pairs,
        probabilities,
    })
}

/// Fine-tune `model` on `train_source`, validating after every epoch.
/// Returns one history row per epoch (empty when `epochs` is 0).
pub fn train<S: Real>(
    model: &mut ClassifierModel<S>,
    train_source: &dyn BatchSource<S>,
    val_source: &dyn BatchSource<S>,
    config: &TrainConfig,
) -> Result<Vec<HistoryRow>> {
    config.validate()?;
    if train_source.num_samples() == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let mut optimizer: Adam<S> = Adam::new(config.learning_rate);
    let mut history = Vec::with_capacity(config.epochs);
    let started = Instant::now();
    for epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut seen = 0usize;
        for (batch_index, batch) in train_source.epoch(epoch).enumerate() {
            let batch = batch?;
            let mut images = batch.images;
            model.preprocessing.apply(&mut images);
            let (logits, tape) = model.forward(&images, true);
            let (loss, grad) = cross_entropy_with_softmax(&logits, &batch.labels);
            let loss = loss.to_f64_c();
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_index,
                });
            }
            model.backward(&tape, &grad);
            optimizer.step(model);
            model.zero_grads();

            let b = batch.class_indices.len();
            loss_sum += loss * b as f64;
            seen += b;
            for (i, &truth) in batch.class_indices.iter().enumerate() {
                let row: Vec<S> = logits.row(i).to_vec();
                if argmax(&row) == truth {
                    correct += 1;
                }
            }
        }
        let val = evaluate(model, val_source)?;
        let row = HistoryRow {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_accuracy: correct as f64 / seen as f64,
            val_loss: val.loss,
            val_accuracy: val.accuracy,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {:>2}: train loss {:.4} acc {:.4} | val loss {:.4} acc {:.4}",
            epoch + 1,
            row.train_loss,
            row.train_accuracy,
            row.val_loss,
            row.val_accuracy
        );
        history.push(row);
    }
    Ok(history)
}

/// Full description of one benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub backbone: BackboneId,
    #[serde(default)]
    pub preset: ScalePreset,
    #[serde(default)]
    pub freeze: FreezePolicy,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub augmentation: AugmentationConfig,
    /// Pretrained weight cache directory; falls back to seeded initialization
    /// when the cache has no entry.
    #[serde(default)]
    pub weight_cache: Option<PathBuf>,
}

/// Persisted record of one completed run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub backbone: String,
    pub preset: ScalePreset,
    pub config: TrainConfig,
    pub augmentation: AugmentationConfig,
    pub manifest_fingerprint: String,
    pub history: Vec<HistoryRow>,
    pub validation: MetricsReport,
    pub val_loss: f64,
    pub checkpoint: PathBuf,
    pub created_at: String,
}

impl RunRecord {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            model: self.backbone.clone(),
            seed: self.config.seed,
            val_accuracy: self.validation.accuracy,
            val_loss: self.val_loss,
            test_accuracy: self.validation.accuracy,
        }
    }
}

/// Standard output layout under one output directory.
pub struct OutputLayout {
    pub runs: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
}

impl OutputLayout {
    pub fn create(root: &Path) -> Result<Self> {
        let layout = OutputLayout {
            runs: root.join("runs"),
            checkpoints: root.join("checkpoints"),
            reports: root.join("reports"),
        };
        for dir in [&layout.runs, &layout.checkpoints, &layout.reports] {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(layout)
    }
}

/// Build, fine-tune, evaluate and persist one backbone run.
///
/// Artifacts: `checkpoints/<backbone>-<seed>.dmbc`, training curves under
/// `reports/`, and `runs/run-<backbone>-<seed>-<timestamp>.json`.
pub fn run_experiment<S: Real>(
    manifest: &DatasetManifest,
    experiment: &ExperimentConfig,
    output_dir: &Path,
) -> Result<RunRecord> {
    experiment.train.validate()?;
    experiment.augmentation.validate()?;
    let layout = OutputLayout::create(output_dir)?;

    let train_source: BatchStream<S> = BatchStream::new(
        manifest,
        Split::Train,
        experiment.train.batch_size,
        Some(experiment.augmentation),
        experiment.train.seed,
    )?;
    let val_source: BatchStream<S> = BatchStream::new(
        manifest,
        Split::Validation,
        experiment.train.batch_size,
        None,
        experiment.train.seed,
    )?;

    let mut model: ClassifierModel<S> = build_model(
        experiment.backbone,
        &BuildOptions {
            preset: experiment.preset,
            freeze: experiment.freeze,
            weights: WeightSource::Pretrained {
                cache_dir: experiment.weight_cache.clone(),
                allow_fallback: true,
            },
            seed: experiment.train.seed,
        },
    )?;

    let history = train(&mut model, &train_source, &val_source, &experiment.train)?;
    let val = evaluate(&mut model, &val_source)?;
    let report = val.report()?;

    let slug = experiment.backbone.slug();
    let seed = experiment.train.seed;
    let checkpoint = layout.checkpoints.join(format!("{slug}-{seed}.dmbc"));
    save_checkpoint(&mut model, &checkpoint)?;
    if !history.is_empty() {
        render_curves(&history, slug, &layout.reports)?;
    }
    render_confusion(
        &report.confusion,
        &layout.reports.join(format!("{slug}-confusion.svg")),
    )?;

    let created_at = chrono::Utc::now().to_rfc3339();
    let record = RunRecord {
        backbone: experiment.backbone.display_name().to_string(),
        preset: experiment.preset,
        config: experiment.train.clone(),
        augmentation: experiment.augmentation,
        manifest_fingerprint: manifest.fingerprint()?,
        history,
        validation: report,
        val_loss: val.loss,
        checkpoint: checkpoint.clone(),
        created_at,
    };
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let run_path = layout.runs.join(format!("run-{slug}-{seed}-{stamp}.json"));
    let mut body = serde_json::to_string_pretty(&record)?;
    body.push('\n');
    std::fs::write(&run_path, body).map_err(|e| Error::io(&run_path, e))?;
    Ok(record)
}
