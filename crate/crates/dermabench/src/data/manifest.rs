//! Dataset manifest: ingest of the `benign/` + `malignant/` folder layout and
//! the deterministic stratified train/validation split.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// The two lesion classes. Class indices are fixed: benign = 0, malignant = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LesionLabel {
    Benign,
    Malignant,
}

impl LesionLabel {
    pub const ALL: [LesionLabel; 2] = [LesionLabel::Benign, LesionLabel::Malignant];

    pub fn class_index(self) -> usize {
        match self {
            LesionLabel::Benign => 0,
            LesionLabel::Malignant => 1,
        }
    }

    pub fn from_class_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(LesionLabel::Benign),
            1 => Ok(LesionLabel::Malignant),
            _ => Err(Error::ClassIndex { index }),
        }
    }

    /// One-hot encoding over the fixed two-class ordering.
    pub fn one_hot<S: Real>(self) -> [S; 2] {
        match self {
            LesionLabel::Benign => [S::one(), S::zero()],
            LesionLabel::Malignant => [S::zero(), S::one()],
        }
    }

    /// Directory name under the dataset root.
    pub fn dir_name(self) -> &'static str {
        match self {
            LesionLabel::Benign => "benign",
            LesionLabel::Malignant => "malignant",
        }
    }
}

impl fmt::Display for LesionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the manifest root, always with `/` separators.
    pub path: String,
    pub label: LesionLabel,
    pub split: Option<Split>,
}

/// Per-(label, split) entry counts; recomputable from the entry list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub benign_train: usize,
    pub benign_validation: usize,
    pub benign_unassigned: usize,
    pub malignant_train: usize,
    pub malignant_validation: usize,
    pub malignant_unassigned: usize,
}

impl SplitCounts {
    pub fn class_total(&self, label: LesionLabel) -> usize {
        match label {
            LesionLabel::Benign => {
                self.benign_train + self.benign_validation + self.benign_unassigned
            }
            LesionLabel::Malignant => {
                self.malignant_train + self.malignant_validation + self.malignant_unassigned
            }
        }
    }

    pub fn total(&self) -> usize {
        self.class_total(LesionLabel::Benign) + self.class_total(LesionLabel::Malignant)
    }
}

/// Labeled image listing with (optionally) a train/validation assignment.
///
/// Entries are kept in lexicographic `path` order so that serialized
/// manifests from identical inputs are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub seed: Option<u64>,
    pub train_fraction: Option<f64>,
    pub entries: Vec<ManifestEntry>,
    pub counts: SplitCounts,
}

/// Non-fatal problem noticed during ingest or splitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanWarning {
    pub path: Option<String>,
    pub message: String,
}

impl DatasetManifest {
    pub fn is_split(&self) -> bool {
        self.entries.iter().all(|e| e.split.is_some()) && !self.entries.is_empty()
    }

    pub fn recompute_counts(entries: &[ManifestEntry]) -> SplitCounts {
        let mut c = SplitCounts::default();
        for e in entries {
            match (e.label, e.split) {
                (LesionLabel::Benign, Some(Split::Train)) => c.benign_train += 1,
                (LesionLabel::Benign, Some(Split::Validation)) => c.benign_validation += 1,
                (LesionLabel::Benign, None) => c.benign_unassigned += 1,
                (LesionLabel::Malignant, Some(Split::Train)) => c.malignant_train += 1,
                (LesionLabel::Malignant, Some(Split::Validation)) => c.malignant_validation += 1,
                (LesionLabel::Malignant, None) => c.malignant_unassigned += 1,
            }
        }
        c
    }

    /// Entries belonging to one split, in manifest (lexicographic) order.
    pub fn split_entries(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries
            .iter()
            .filter(|e| e.split == Some(split))
            .collect()
    }

    pub fn absolute_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Canonical serialized form: pretty JSON, stable key order, LF endings,
    /// trailing newline.
    pub fn to_canonical_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = self.to_canonical_json()?;
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&body)?;
        let expected = Self::recompute_counts(&manifest.entries);
        if expected != manifest.counts {
            return Err(Error::ManifestState(format!(
                "counts in {} disagree with the entry list",
                path.display()
            )));
        }
        Ok(manifest)
    }

    /// SHA-256 of the canonical serialization; used to fingerprint runs.
    pub fn fingerprint(&self) -> Result<String> {
        let body = self.to_canonical_json()?;
        let mut h = Sha256::new();
        h.update(body.as_bytes());
        Ok(format!("{:x}", h.finalize()))
    }
}

const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_lowercase().as_str()))
        .unwrap_or(false)
}

/// Cheap decodability probe: reads only the image header.
fn probe_image(path: &Path) -> std::result::Result<(), String> {
    image::ImageReader::open(path)
        .map_err(|e| e.to_string())?
        .with_guessed_format()
        .map_err(|e| e.to_string())?
        .into_dimensions()
        .map(|_| ())
        .map_err(|e| e.to_string())
}

/// Enumerate `<root>/benign` and `<root>/malignant` into an unsplit manifest.
///
/// Undecodable files are excluded with a warning; a class that ends up empty
/// is an error.
pub fn scan_dataset(root: &Path) -> Result<(DatasetManifest, Vec<ScanWarning>)> {
    let mut entries = Vec::new();
    let mut warnings = Vec::new();

    for label in LesionLabel::ALL {
        let class_dir = root.join(label.dir_name());
        if !class_dir.is_dir() {
            return Err(Error::MissingClassDir {
                class: label.dir_name().to_string(),
                root: root.to_path_buf(),
            });
        }
        let mut class_entries = Vec::new();
        let dir = fs::read_dir(&class_dir).map_err(|e| Error::io(&class_dir, e))?;
        for item in dir {
            let item = item.map_err(|e| Error::io(&class_dir, e))?;
            let path = item.path();
            if !path.is_file() || !has_image_extension(&path) {
                continue;
            }
            let file_name = match path.file_name().and_then(|n| n.to_str()) {
                Some(n) => n.to_string(),
                None => continue,
            };
            let rel = format!("{}/{}", label.dir_name(), file_name);
            match probe_image(&path) {
                Ok(()) => class_entries.push(ManifestEntry {
                    path: rel,
                    label,
                    split: None,
                }),
                Err(reason) => warnings.push(ScanWarning {
                    path: Some(rel),
                    message: format!("excluded undecodable file: {reason}"),
                }),
            }
        }
        if class_entries.is_empty() {
            return Err(Error::EmptyClass {
                class: label.dir_name().to_string(),
            });
        }
        entries.extend(class_entries);
    }

    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let counts = DatasetManifest::recompute_counts(&entries);
    Ok((
        DatasetManifest {
            root: root.to_path_buf(),
            seed: None,
            train_fraction: None,
            entries,
            counts,
        },
        warnings,
    ))
}

/// Per-class train share: floor(fraction * n), with a tiny bias to absorb
/// binary representation dust (0.7 * 5000 must give exactly 3500).
fn train_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Assign every entry to Train or Validation, stratified per class.
///
/// Membership is a deterministic function of (seed, lexicographic entry
/// order): per class, entry indices are shuffled with a seed-derived ChaCha
/// stream and the first floor(fraction * n) go to Train.
pub fn split_manifest(
    manifest: &DatasetManifest,
    train_fraction: f64,
    seed: u64,
) -> Result<(DatasetManifest, Vec<ScanWarning>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if manifest.entries.iter().any(|e| e.split.is_some()) {
        return Err(Error::ManifestState(
            "manifest is already split".to_string(),
        ));
    }

    let mut warnings = Vec::new();
    let mut entries = manifest.entries.clone();
    for (class_pos, label) in LesionLabel::ALL.into_iter().enumerate() {
        let class_indices: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == label)
            .map(|(i, _)| i)
            .collect();
        let n = class_indices.len();
        if n < 2 {
            warnings.push(ScanWarning {
                path: None,
                message: format!(
                    "class `{label}` has {n} entries; cannot hold out validation data"
                ),
            });
        }
        let n_train = train_count(train_fraction, n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(class_pos as u64));
        order.shuffle(&mut rng);
        for (rank, &pos) in order.iter().enumerate() {
            let idx = class_indices[pos];
            entries[idx].split = Some(if rank < n_train {
                Split::Train
            } else {
                Split::Validation
            });
        }
    }

    let counts = DatasetManifest::recompute_counts(&entries);
    Ok((
        DatasetManifest {
            root: manifest.root.clone(),
            seed: Some(seed),
            train_fraction: Some(train_fraction),
            entries,
            counts,
        },
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn synthetic_manifest(benign: usize, malignant: usize) -> DatasetManifest {
        let mut entries = Vec::new();
        for i in 0..benign {
            entries.push(ManifestEntry {
                path: format!("benign/img_{i:05}.jpg"),
                label: LesionLabel::Benign,
                split: None,
            });
        }
        for i in 0..malignant {
            entries.push(ManifestEntry {
                path: format!("malignant/img_{i:05}.jpg"),
                label: LesionLabel::Malignant,
                split: None,
            });
        }
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        let counts = DatasetManifest::recompute_counts(&entries);
        DatasetManifest {
            root: PathBuf::from("/fake"),
            seed: None,
            train_fraction: None,
            entries,
            counts,
        }
    }

    #[test]
    fn label_encoding_is_fixed() {
        assert_eq!(LesionLabel::Benign.class_index(), 0);
        assert_eq!(LesionLabel::Malignant.class_index(), 1);
        assert_eq!(LesionLabel::Benign.one_hot::<f64>(), [1.0, 0.0]);
        assert_eq!(LesionLabel::Malignant.one_hot::<f64>(), [0.0, 1.0]);
        for label in LesionLabel::ALL {
            let oh = label.one_hot::<f64>();
            assert_eq!(oh[0] + oh[1], 1.0);
        }
    }

    #[test]
    fn stratified_split_is_3500_1500_per_class() {
        let manifest = synthetic_manifest(5000, 5000);
        let (split, warnings) = split_manifest(&manifest, 0.7, 42).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(split.counts.benign_train, 3500);
        assert_eq!(split.counts.benign_validation, 1500);
        assert_eq!(split.counts.malignant_train, 3500);
        assert_eq!(split.counts.malignant_validation, 1500);
        assert_eq!(split.counts.total(), 10000);
    }

    #[test]
    fn flooring_keeps_one_validation_entry() {
        let manifest = synthetic_manifest(2, 2);
        let (split, _) = split_manifest(&manifest, 0.999, 7).unwrap();
        assert_eq!(split.counts.benign_train, 1);
        assert_eq!(split.counts.benign_validation, 1);
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let manifest = synthetic_manifest(10, 10);
        let (a, _) = split_manifest(&manifest, 0.7, 1).unwrap();
        let (b, _) = split_manifest(&manifest, 0.7, 1).unwrap();
        let (c, _) = split_manifest(&manifest, 0.7, 2).unwrap();
        assert_eq!(
            a.to_canonical_json().unwrap(),
            b.to_canonical_json().unwrap()
        );
        assert_eq!(a.counts, c.counts);
        let train_set = |m: &DatasetManifest| -> BTreeSet<String> {
            m.entries
                .iter()
                .filter(|e| e.split == Some(Split::Train))
                .map(|e| e.path.clone())
                .collect()
        };
        assert_ne!(train_set(&a), train_set(&c));
        assert_eq!(a.counts.benign_train, 7);
        assert_eq!(a.counts.benign_validation, 3);
    }

    #[test]
    fn split_rejects_bad_fraction_and_double_split() {
        let manifest = synthetic_manifest(4, 4);
        assert!(matches!(
            split_manifest(&manifest, 1.0, 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            split_manifest(&manifest, 0.0, 0),
            Err(Error::Config(_))
        ));
        let (split, _) = split_manifest(&manifest, 0.5, 0).unwrap();
        assert!(matches!(
            split_manifest(&split, 0.5, 0),
            Err(Error::ManifestState(_))
        ));
    }

    #[test]
    fn tiny_class_warns() {
        let manifest = synthetic_manifest(1, 5);
        let (_, warnings) = split_manifest(&manifest, 0.7, 0).unwrap();
        assert!(warnings.iter().any(|w| w.message.contains("benign")));
    }

    #[test]
    fn counts_recompute_matches() {
        let manifest = synthetic_manifest(3, 2);
        let (split, _) = split_manifest(&manifest, 0.7, 9).unwrap();
        assert_eq!(
            DatasetManifest::recompute_counts(&split.entries),
            split.counts
        );
        assert!(split.is_split());
        assert!(!manifest.is_split());
    }
}
