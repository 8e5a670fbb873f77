//! End-to-end tests of the `dermabench` binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dermabench"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout(out),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Tiny two-class dataset: solid-colour PNGs, red = benign, blue = malignant.
fn write_dataset(root: &Path, per_class: u32) {
    for (class, colour) in [("benign", [200u8, 40, 40]), ("malignant", [40, 40, 200])] {
        let dir = root.join(class);
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..per_class {
            let shade = 150 + (i % 60) as u8;
            let px = image::Rgb([
                colour[0].saturating_add(shade / 4),
                colour[1],
                colour[2].saturating_add(shade / 4),
            ]);
            image::RgbImage::from_pixel(48, 48, px)
                .save(dir.join(format!("{class}-{i:03}.png")))
                .unwrap();
        }
    }
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn split_writes_a_reproducible_manifest() {
    let data = tempfile::tempdir().unwrap();
    write_dataset(data.path(), 10);
    let out_a = tempfile::tempdir().unwrap();

    let out = run(&[
        "--output-dir", &s(out_a.path()), "--seed", "7",
        "split", "--data-root", &s(data.path()), "--train-fraction", "0.7",
    ]);
    assert_code(&out, 0);
    let manifest_a = out_a.path().join("manifest.json");
    assert!(manifest_a.exists());
    assert!(stdout(&out).contains("7/3"), "expected 7/3 split: {}", stdout(&out));

    // same seed: byte-identical manifest
    let out_b = tempfile::tempdir().unwrap();
    let out = run(&[
        "--output-dir", &s(out_b.path()), "--seed", "7",
        "split", "--data-root", &s(data.path()), "--train-fraction", "0.7",
    ]);
    assert_code(&out, 0);
    assert_eq!(
        std::fs::read(&manifest_a).unwrap(),
        std::fs::read(out_b.path().join("manifest.json")).unwrap()
    );

    // different seed: different bytes
    let out_c = tempfile::tempdir().unwrap();
    let out = run(&[
        "--output-dir", &s(out_c.path()), "--seed", "8",
        "split", "--data-root", &s(data.path()), "--train-fraction", "0.7",
    ]);
    assert_code(&out, 0);
    assert_ne!(
        std::fs::read(&manifest_a).unwrap(),
        std::fs::read(out_c.path().join("manifest.json")).unwrap()
    );
}

#[test]
fn split_rejects_a_missing_root_with_usage_exit_code() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--output-dir", &s(out_dir.path()),
        "split", "--data-root", "/nonexistent/dermoscopy",
    ]);
    assert_code(&out, 2);
}

#[test]
fn unknown_backbone_is_a_usage_error_listing_the_valid_names() {
    let data = tempfile::tempdir().unwrap();
    write_dataset(data.path(), 4);
    let out_dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--output-dir", &s(out_dir.path()),
        "split", "--data-root", &s(data.path()),
    ]);
    assert_code(&out, 0);

    let manifest = out_dir.path().join("manifest.json");
    let out = run(&[
        "--output-dir", &s(out_dir.path()),
        "train", "--manifest", &s(&manifest), "--backbone", "alexnet",
    ]);
    assert_code(&out, 2);
    let err = String::from_utf8_lossy(&out.stderr).into_owned() + &stdout(&out);
    for name in ["resnet101", "densenet169", "efficientnet", "inceptionv3"] {
        assert!(err.to_lowercase().contains(name), "{name} missing from: {err}");
    }
}

/// Full workflow: split, train (1 epoch), evaluate, compare, predict.
#[test]
fn full_workflow_smoke() {
    let data = tempfile::tempdir().unwrap();
    write_dataset(data.path(), 8);
    let out_dir = tempfile::tempdir().unwrap();
    let root = out_dir.path();

    let out = run(&[
        "--output-dir", &s(root), "--seed", "3",
        "split", "--data-root", &s(data.path()),
    ]);
    assert_code(&out, 0);
    let manifest = root.join("manifest.json");

    let out = run(&[
        "--output-dir", &s(root), "--seed", "3",
        "train", "--manifest", &s(&manifest), "--backbone", "resnet101",
        "--epochs", "1", "--batch-size", "8",
    ]);
    assert_code(&out, 0);
    let text = stdout(&out);
    // the resolved configuration is echoed before training
    assert!(text.contains("epochs = 1"), "config echo missing: {text}");
    assert!(text.contains("learning_rate"), "config echo missing: {text}");

    let checkpoint = root.join("checkpoints").join("resnet101-3.dmbc");
    assert!(checkpoint.exists());
    let runs: Vec<_> = std::fs::read_dir(root.join("runs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(runs.len(), 1);
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&runs[0]).unwrap()).unwrap();
    assert_eq!(record["backbone"], "ResNet101");
    assert_eq!(record["history"].as_array().unwrap().len(), 1);

    // evaluate against the persisted checkpoint
    let out = run(&[
        "--output-dir", &s(root),
        "evaluate", "--manifest", &s(&manifest), "--checkpoint", &s(&checkpoint),
    ]);
    assert_code(&out, 0);
    let text = stdout(&out);
    assert!(text.contains("accuracy:"), "evaluate output: {text}");
    assert!(root.join("reports").join("resnet101-metrics.json").exists());

    // compare over the run directory
    let out = run(&["--output-dir", &s(root), "compare", &s(root)]);
    assert_code(&out, 0);
    assert!(stdout(&out).contains("ResNet101"));

    let out = run(&[
        "--output-dir", &s(root),
        "compare", &s(root), "--with-literature",
    ]);
    assert_code(&out, 0);
    let text = stdout(&out);
    assert!(text.contains("Literature results"), "literature section: {text}");
    assert!(text.contains("In study [13]"));

    let csv_path = root.join("comparison.csv");
    let out = run(&[
        "--output-dir", &s(root),
        "compare", &s(root), "--csv", &s(&csv_path),
    ]);
    assert_code(&out, 0);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("model,val_accuracy,val_loss,test_accuracy,source"));

    // predict: one good image, one corrupt file -> exit 0 with an error entry
    let good = data.path().join("benign").join("benign-000.png");
    let corrupt = root.join("corrupt.png");
    std::fs::write(&corrupt, b"not a png").unwrap();
    let out = run(&[
        "--output-dir", &s(root),
        "predict", "--checkpoint", &s(&checkpoint), "--json",
        &s(&good), &s(&corrupt),
    ]);
    assert_code(&out, 0);
    let results: Vec<serde_json::Value> = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(results.len(), 2);
    assert!(results[0]["label"].is_string());
    let probs = results[0]["probabilities"].as_array().unwrap();
    let total: f64 = probs.iter().map(|p| p.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-5);
    assert!(results[1]["error"].is_string());

    // prediction is deterministic
    let rerun = run(&[
        "--output-dir", &s(root),
        "predict", "--checkpoint", &s(&checkpoint), "--json",
        &s(&good), &s(&corrupt),
    ]);
    assert_eq!(stdout(&out), stdout(&rerun));

    // all images failing is a runtime error
    let out = run(&[
        "--output-dir", &s(root),
        "predict", "--checkpoint", &s(&checkpoint), &s(&corrupt),
    ]);
    assert_code(&out, 1);
}

#[test]
fn train_with_zero_epochs_still_writes_a_checkpoint() {
    let data = tempfile::tempdir().unwrap();
    write_dataset(data.path(), 4);
    let out_dir = tempfile::tempdir().unwrap();
    let root = out_dir.path();

    let out = run(&["--output-dir", &s(root), "split", "--data-root", &s(data.path())]);
    assert_code(&out, 0);
    let out = run(&[
        "--output-dir", &s(root),
        "train", "--manifest", &s(&root.join("manifest.json")),
        "--backbone", "efficientnet", "--epochs", "0", "--batch-size", "4",
    ]);
    assert_code(&out, 0);
    assert!(root.join("checkpoints").join("efficientnet-42.dmbc").exists());
}

#[test]
fn compare_on_a_directory_without_runs_is_a_usage_error() {
    let empty = tempfile::tempdir().unwrap();
    let out = run(&[
        "--output-dir", &s(empty.path()),
        "compare", &s(empty.path()),
    ]);
    assert_code(&out, 2);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let data = tempfile::tempdir().unwrap();
    write_dataset(data.path(), 4);
    let out_dir = tempfile::tempdir().unwrap();
    let root = out_dir.path();
    let out = run(&["--output-dir", &s(root), "split", "--data-root", &s(data.path())]);
    assert_code(&out, 0);

    let config = root.join("bench.toml");
    std::fs::write(
        &config,
        "[training]\nepochs = 9\nbatch_size = 4\nlearning_rate = 0.001\n",
    )
    .unwrap();
    let out = run(&[
        "--config", &s(&config), "--output-dir", &s(root),
        "train", "--manifest", &s(&root.join("manifest.json")),
        "--backbone", "inceptionv3", "--epochs", "1",
    ]);
    assert_code(&out, 0);
    let text = stdout(&out);
    // flag beats file for epochs; file beats default for the rest
    assert!(text.contains("epochs = 1"), "{text}");
    assert!(text.contains("batch_size = 4"), "{text}");
    assert!(text.contains("learning_rate = 0.001"), "{text}");

    // unknown keys in the config file are rejected
    std::fs::write(&config, "[training]\nepoch = 9\n").unwrap();
    let out = run(&[
        "--config", &s(&config), "--output-dir", &s(root),
        "train", "--manifest", &s(&root.join("manifest.json")),
        "--backbone", "inceptionv3",
    ]);
    assert_code(&out, 2);
}

#[test]
fn augment_preview_writes_deterministic_variants() {
    let data = tempfile::tempdir().unwrap();
    write_dataset(data.path(), 1);
    let image = data.path().join("benign").join("benign-000.png");
    let out_dir = tempfile::tempdir().unwrap();

    let out = run(&[
        "--output-dir", &s(out_dir.path()), "--seed", "5",
        "augment-preview", "--image", &s(&image), "--count", "3",
    ]);
    assert_code(&out, 0);
    let mut files: Vec<_> = std::fs::read_dir(out_dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    files.sort();
    assert_eq!(files.len(), 3);
    let first = std::fs::read(&files[0]).unwrap();

    // same seed reproduces the bytes
    let again = tempfile::tempdir().unwrap();
    let out = run(&[
        "--output-dir", &s(again.path()), "--seed", "5",
        "augment-preview", "--image", &s(&image), "--count", "3",
    ]);
    assert_code(&out, 0);
    let mut again_files: Vec<_> = std::fs::read_dir(again.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    again_files.sort();
    assert_eq!(first, std::fs::read(&again_files[0]).unwrap());

    // a count below one is a usage error
    let out = run(&[
        "--output-dir", &s(out_dir.path()),
        "augment-preview", "--image", &s(&image), "--count", "0",
    ]);
    assert_code(&out, 2);
}
