//! Command-line interface: dataset splitting, training, evaluation,
//! comparison tables, single-image prediction and augmentation previews.
//!
//! Exit codes: 0 on success, 2 for configuration/usage problems, 1 for
//! runtime failures. Every command echoes its fully resolved configuration
//! before doing work, so no default is hidden.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::Array4;
use serde::{Deserialize, Serialize};

use crate::data::{
    augment, load_image, scan_dataset, split_manifest, AugmentationConfig, BatchStream,
    DatasetManifest, Split, INPUT_SIZE,
};
use crate::error::{Error, Result};
use crate::metrics::{comparison_table, render_confusion, render_curves, RunSummary};
use crate::modelzoo::{load_checkpoint, BackboneId, FreezePolicy, ScalePreset};
use crate::training::{evaluate, run_experiment, ExperimentConfig, RunRecord, TrainConfig};
use crate::DefaultScalar;

#[derive(Debug, Parser)]
#[command(
    name = "dermabench",
    version,
    about = "Reproducible benchmark harness for benign/malignant skin-lesion \
             classification with four convolutional backbones"
)]
pub struct Cli {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for splitting, initialization, shuffling and augmentation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Root for all outputs (manifest.json, runs/, checkpoints/, reports/).
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Upper bound on data-loading workers. Per-sample randomness is derived
    /// from stable sample ids, so the worker count never changes results.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan a benign/ + malignant/ dataset tree and write a split manifest.
    Split(SplitArgs),
    /// Fine-tune one backbone on a split manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the held-out split of a manifest.
    Evaluate(EvaluateArgs),
    /// Tabulate finished runs side by side (optionally with published results).
    Compare(CompareArgs),
    /// Classify individual images with a trained checkpoint.
    Predict(PredictArgs),
    /// Write augmented variants of one image for visual inspection.
    AugmentPreview(AugmentPreviewArgs),
}

/// Optional TOML configuration file mirroring the benchmark settings.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub training: TrainConfig,
    pub augmentation: AugmentationConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(toml::from_str(&text)?)
    }

    fn resolve(path: Option<&PathBuf>) -> Result<Self> {
        match path {
            Some(p) => FileConfig::load(p),
            None => Ok(FileConfig::default()),
        }
    }
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Dataset root containing benign/ and malignant/ subdirectories.
    #[arg(long)]
    data_root: PathBuf,
    /// Fraction of each class assigned to training.
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Split manifest produced by `dermabench split`.
    #[arg(long)]
    manifest: PathBuf,
    /// Backbone: resnet101, densenet169, efficientnet or inceptionv3.
    #[arg(long)]
    backbone: String,
    /// Model size preset: desk (single-core scale) or full (published scale).
    #[arg(long, default_value = "desk")]
    preset: String,
    /// Train only the classification head, keeping the backbone fixed.
    #[arg(long)]
    freeze_backbone: bool,
    /// Pretrained weight cache directory (default: $DERMABENCH_CACHE).
    #[arg(long)]
    weight_cache: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Split manifest whose held-out split is evaluated.
    #[arg(long)]
    manifest: PathBuf,
    /// Checkpoint produced by `dermabench train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Evaluation batch size.
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Run record files (runs/run-*.json) or directories containing them.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Append the published literature results to the table.
    #[arg(long)]
    with_literature: bool,
    /// Also write the table as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Checkpoint produced by `dermabench train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Images to classify.
    #[arg(required = true)]
    images: Vec<PathBuf>,
    /// Forward-pass batch size.
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// Emit a JSON array instead of human-readable lines.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct AugmentPreviewArgs {
    /// Source image.
    #[arg(long)]
    image: PathBuf,
    /// Number of augmented variants.
    #[arg(long, default_value_t = 8)]
    count: usize,
}

/// One prediction, as serialized by `predict --json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionResult {
    pub path: String,
    pub checkpoint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// [benign, malignant]; absent when the image could not be processed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Parse `argv` and run; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::parse_from(argv);
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.workers < 1 {
        return Err(Error::Config("--workers must be >= 1".to_string()));
    }
    let ctx = Context {
        config: cli.config,
        seed: cli.seed,
        output_dir: cli.output_dir,
    };
    match cli.command {
        Command::Split(args) => cmd_split(&ctx, args),
        Command::Train(args) => cmd_train(&ctx, args),
        Command::Evaluate(args) => cmd_evaluate(&ctx, args),
        Command::Compare(args) => cmd_compare(&ctx, args),
        Command::Predict(args) => cmd_predict(&ctx, args),
        Command::AugmentPreview(args) => cmd_augment_preview(&ctx, args),
    }
}

struct Context {
    config: Option<PathBuf>,
    seed: Option<u64>,
    output_dir: PathBuf,
}

fn cmd_split(ctx: &Context, args: SplitArgs) -> Result<()> {
    let seed = ctx.seed.unwrap_or(42);
    println!(
        "split: root {}, train_fraction {}, seed {seed}",
        args.data_root.display(),
        args.train_fraction
    );
    let (manifest, warnings) = scan_dataset(&args.data_root)?;
    let (manifest, split_warnings) = split_manifest(&manifest, args.train_fraction, seed)?;
    for w in warnings.iter().chain(&split_warnings) {
        match &w.path {
            Some(p) => eprintln!("warning: {} ({p})", w.message),
            None => eprintln!("warning: {}", w.message),
        }
    }
    std::fs::create_dir_all(&ctx.output_dir).map_err(|e| Error::io(&ctx.output_dir, e))?;
    let path = ctx.output_dir.join("manifest.json");
    manifest.save(&path)?;
    let c = &manifest.counts;
    println!("manifest written to {}", path.display());
    println!(
        "benign {}/{}, malignant {}/{} (train/validation)",
        c.benign_train, c.benign_validation, c.malignant_train, c.malignant_validation
    );
    println!("fingerprint: {}", manifest.fingerprint()?);
    Ok(())
}

fn parse_preset(name: &str) -> Result<ScalePreset> {
    match name.to_lowercase().as_str() {
        "desk" => Ok(ScalePreset::Desk),
        "full" => Ok(ScalePreset::Full),
        other => Err(Error::Config(format!(
            "unknown preset `{other}` (expected desk or full)"
        ))),
    }
}

fn cmd_train(ctx: &Context, args: TrainArgs) -> Result<()> {
    let backbone = BackboneId::parse(&args.backbone)?;
    let preset = parse_preset(&args.preset)?;
    let mut config = FileConfig::resolve(ctx.config.as_ref())?;
    // flags take precedence over the file, which overrides the defaults
    if let Some(seed) = ctx.seed {
        config.training.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        config.training.epochs = epochs;
    }
    if let Some(batch_size) = args.batch_size {
        config.training.batch_size = batch_size;
    }
    if let Some(lr) = args.learning_rate {
        config.training.learning_rate = lr;
    }
    config.training.validate()?;
    config.augmentation.validate()?;

    let manifest = DatasetManifest::load(&args.manifest)?;
    let experiment = ExperimentConfig {
        backbone,
        preset,
        freeze: if args.freeze_backbone {
            FreezePolicy::FrozenBackbone
        } else {
            FreezePolicy::FullFineTune
        },
        train: config.training.clone(),
        augmentation: config.augmentation,
        weight_cache: args.weight_cache.clone(),
    };

    println!("backbone: {backbone} ({} preset)", preset.slug());
    let resolved =
        toml::to_string(&config).map_err(|e| Error::Config(format!("config render: {e}")))?;
    println!("resolved configuration:\n{resolved}");

    let record = run_experiment::<DefaultScalar>(&manifest, &experiment, &ctx.output_dir)?;
    if let Some(last) = record.history.last() {
        println!(
            "final epoch: train acc {:.4}, val acc {:.4}, val loss {:.4}",
            last.train_accuracy, last.val_accuracy, last.val_loss
        );
    }
    println!("{}", record.validation.render_text(backbone.display_name()));
    println!("checkpoint: {}", record.checkpoint.display());
    Ok(())
}

fn cmd_evaluate(ctx: &Context, args: EvaluateArgs) -> Result<()> {
    println!(
        "evaluate: checkpoint {}, manifest {}, batch_size {}",
        args.checkpoint.display(),
        args.manifest.display(),
        args.batch_size
    );
    let manifest = DatasetManifest::load(&args.manifest)?;
    let mut model = load_checkpoint::<DefaultScalar>(&args.checkpoint)?;
    let stream: BatchStream<DefaultScalar> =
        BatchStream::new(&manifest, Split::Validation, args.batch_size, None, 0)?;
    let eval = evaluate(&mut model, &stream)?;
    let report = eval.report()?;
    let name = model.backbone_id.display_name();

    println!("{}", report.render_text(name));
    println!("loss: {:.4}  accuracy: {:.4}", eval.loss, eval.accuracy);

    let reports = ctx.output_dir.join("reports");
    std::fs::create_dir_all(&reports).map_err(|e| Error::io(&reports, e))?;
    let slug = model.backbone_id.slug();
    let json_path = reports.join(format!("{slug}-metrics.json"));
    std::fs::write(&json_path, report.to_json(name)?).map_err(|e| Error::io(&json_path, e))?;
    render_confusion(
        &report.confusion,
        &reports.join(format!("{slug}-confusion.svg")),
    )?;
    println!("report: {}", json_path.display());
    Ok(())
}

fn collect_run_records(paths: &[PathBuf]) -> Result<Vec<RunRecord>> {
    let mut files: Vec<PathBuf> = Vec::new();
    for path in paths {
        if path.is_dir() {
            // accept either the output root or the runs/ directory itself
            for dir in [path.clone(), path.join("runs")] {
                let Ok(entries) = std::fs::read_dir(&dir) else {
                    continue;
                };
                for entry in entries.flatten() {
                    let p = entry.path();
                    let name = entry.file_name().to_string_lossy().to_string();
                    if name.starts_with("run-") && name.ends_with(".json") {
                        files.push(p);
                    }
                }
            }
        } else {
            files.push(path.clone());
        }
    }
    files.sort();
    files.dedup();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no run records (run-*.json) found under: {}",
            paths
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    let mut records = Vec::with_capacity(files.len());
    for path in &files {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        records.push(serde_json::from_str(&text)?);
    }
    Ok(records)
}

fn cmd_compare(ctx: &Context, args: CompareArgs) -> Result<()> {
    let records = collect_run_records(&args.runs)?;
    println!("comparing {} runs", records.len());
    let summaries: Vec<RunSummary> = records.iter().map(|r| r.summary()).collect();
    let table = comparison_table(&summaries, args.with_literature)?;
    print!("{}", table.render_text());

    let reports = ctx.output_dir.join("reports");
    std::fs::create_dir_all(&reports).map_err(|e| Error::io(&reports, e))?;
    for record in &records {
        let slug = BackboneId::parse(&record.backbone)?.slug();
        if !record.history.is_empty() {
            render_curves(&record.history, slug, &reports)?;
        }
        render_confusion(
            &record.validation.confusion,
            &reports.join(format!("{slug}-confusion.svg")),
        )?;
    }
    if let Some(csv_path) = &args.csv {
        std::fs::write(csv_path, table.render_csv()?).map_err(|e| Error::io(csv_path, e))?;
        println!("csv: {}", csv_path.display());
    }
    println!("plots: {}", reports.display());
    Ok(())
}

fn cmd_predict(_ctx: &Context, args: PredictArgs) -> Result<()> {
    if args.batch_size < 1 {
        return Err(Error::Config("--batch-size must be >= 1".to_string()));
    }
    let mut model = load_checkpoint::<DefaultScalar>(&args.checkpoint)?;
    let checkpoint = args.checkpoint.display().to_string();
    let mut results: Vec<PredictionResult> = Vec::with_capacity(args.images.len());
    let mut loaded: Vec<(usize, ndarray::Array3<DefaultScalar>)> = Vec::new();
    for (i, path) in args.images.iter().enumerate() {
        results.push(PredictionResult {
            path: path.display().to_string(),
            checkpoint: checkpoint.clone(),
            label: None,
            probabilities: None,
            error: None,
        });
        match load_image::<DefaultScalar>(path, INPUT_SIZE) {
            Ok(img) => loaded.push((i, img.pixels)),
            Err(e) => results[i].error = Some(e.to_string()),
        }
    }
    for chunk in loaded.chunks(args.batch_size) {
        let mut batch: Array4<DefaultScalar> =
            Array4::zeros((chunk.len(), INPUT_SIZE.0, INPUT_SIZE.1, 3));
        for (row, (_, pixels)) in chunk.iter().enumerate() {
            batch.index_axis_mut(ndarray::Axis(0), row).assign(pixels);
        }
        model.preprocessing.apply(&mut batch);
        let probs = model.predict(&batch);
        for (row, &(i, _)) in chunk.iter().enumerate() {
            let (benign, malignant) = (probs[[row, 0]] as f64, probs[[row, 1]] as f64);
            results[i].probabilities = Some([benign, malignant]);
            results[i].label = Some(if malignant > benign {
                "malignant".to_string()
            } else {
                "benign".to_string()
            });
        }
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&results)?);
    } else {
        for r in &results {
            match (&r.label, &r.probabilities, &r.error) {
                (Some(label), Some(p), _) => println!(
                    "{}: {} (benign {:.4}, malignant {:.4})",
                    r.path, label, p[0], p[1]
                ),
                (_, _, Some(e)) => println!("{}: error: {e}", r.path),
                _ => unreachable!("every result has a prediction or an error"),
            }
        }
    }
    if loaded.is_empty() {
        // runtime/data failure, not a usage error: exit code 1
        return Err(Error::Decode {
            path: args.images[0].clone(),
            reason: format!("none of the {} images could be processed", args.images.len()),
        });
    }
    Ok(())
}

fn cmd_augment_preview(ctx: &Context, args: AugmentPreviewArgs) -> Result<()> {
    if args.count < 1 {
        return Err(Error::Config("--count must be >= 1".to_string()));
    }
    let config = FileConfig::resolve(ctx.config.as_ref())?.augmentation;
    config.validate()?;
    let seed = ctx.seed.unwrap_or(42);
    println!(
        "augment-preview: image {}, count {}, seed {seed}, \
         zoom_range {}, rotation_range {}, horizontal_flip {}, vertical_flip {}",
        args.image.display(),
        args.count,
        config.zoom_range,
        config.rotation_range,
        config.horizontal_flip,
        config.vertical_flip
    );
    let img = load_image::<DefaultScalar>(&args.image, INPUT_SIZE)?;
    std::fs::create_dir_all(&ctx.output_dir).map_err(|e| Error::io(&ctx.output_dir, e))?;
    let stem = args
        .image
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "image".to_string());
    for i in 0..args.count {
        let mut rng = crate::data::sample_rng(seed, 0, i);
        let variant = augment(&img, &config, &mut rng)?;
        let out = ctx.output_dir.join(format!("{stem}-augmented-{i:02}.png"));
        variant
            .to_rgb8()
            .save(&out)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", out.display())))?;
        println!("{}", out.display());
    }
    Ok(())
}
