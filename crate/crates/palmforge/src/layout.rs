//! On-disk dataset layout: `images/{train,val}`, `labels/{train,val}`, a
//! `data.yaml` class list and a JSON manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use palmforge_core::label::write_label_file;
use palmforge_core::seed::Split;
use palmforge_core::{GroundTruthAnnotation, Raster};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::imageio::save_png;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATA_CONFIG_FILE: &str = "data.yaml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub class: String,
    pub object_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestImage {
    pub id: String,
    pub split: Split,
    pub width: u32,
    pub height: u32,
    /// Paths relative to the dataset root.
    pub image: String,
    pub label: String,
    pub object_counts_per_class: BTreeMap<String, usize>,
    pub tags: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkipRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub class_names: Vec<String>,
    pub images: Vec<ManifestImage>,
    pub totals_per_class: BTreeMap<String, usize>,
    pub totals_per_split: BTreeMap<String, BTreeMap<String, usize>>,
    pub image_counts: BTreeMap<String, usize>,
    pub skipped_total: usize,
}

impl Manifest {
    pub fn build(seed: u64, class_names: Vec<String>, images: Vec<ManifestImage>) -> Self {
        let mut totals_per_class: BTreeMap<String, usize> = class_names.iter().map(|c| (c.clone(), 0)).collect();
        let mut totals_per_split: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        let mut image_counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut skipped_total = 0;
        for split in Split::ALL {
            totals_per_split.insert(split.to_string(), totals_per_class.clone());
            image_counts.insert(split.to_string(), 0);
        }
        for img in &images {
            let split_totals = totals_per_split.entry(img.split.to_string()).or_default();
            for (class, &n) in &img.object_counts_per_class {
                *totals_per_class.entry(class.clone()).or_default() += n;
                *split_totals.entry(class.clone()).or_default() += n;
            }
            *image_counts.entry(img.split.to_string()).or_default() += 1;
            skipped_total += img.skipped.len();
        }
        Self {
            seed,
            class_names,
            images,
            totals_per_class,
            totals_per_split,
            image_counts,
            skipped_total,
        }
    }

    pub fn split_total(&self, split: Split, class: &str) -> usize {
        self.totals_per_split
            .get(split.as_str())
            .and_then(|m| m.get(class))
            .copied()
            .unwrap_or(0)
    }

    pub fn image_count(&self, split: Split) -> usize {
        self.image_counts.get(split.as_str()).copied().unwrap_or(0)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// A dataset root with its four split directories in place.
#[derive(Debug, Clone)]
pub struct DatasetLayout {
    root: PathBuf,
}

fn is_nonempty_dir(path: &Path) -> Result<bool> {
    match fs::read_dir(path) {
        Ok(mut it) => Ok(it.next().is_some()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
        Err(e) => Err(Error::io(path, e)),
    }
}

impl DatasetLayout {
    /// Creates the directory tree. A non-empty `root` is refused unless
    /// `overwrite` is set, in which case the managed entries are removed first.
    pub fn prepare(root: &Path, overwrite: bool) -> Result<Self> {
        if root.exists() && !root.is_dir() {
            return Err(Error::OutputExists(root.to_path_buf()));
        }
        if is_nonempty_dir(root)? {
            if !overwrite {
                return Err(Error::OutputExists(root.to_path_buf()));
            }
            for dir in ["images", "labels"] {
                let p = root.join(dir);
                if p.exists() {
                    fs::remove_dir_all(&p).at(&p)?;
                }
            }
            for file in [MANIFEST_FILE, DATA_CONFIG_FILE] {
                let p = root.join(file);
                if p.exists() {
                    fs::remove_file(&p).at(&p)?;
                }
            }
        }
        for kind in ["images", "labels"] {
            for split in Split::ALL {
                let p = root.join(kind).join(split.as_str());
                fs::create_dir_all(&p).at(&p)?;
            }
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn relative(kind: &str, split: Split, file: &str) -> String {
        format!("{kind}/{}/{file}", split.as_str())
    }

    /// Writes `<id>.png` and `<id>.txt`; safe to call from several threads for distinct ids.
    pub fn write_image(
        &self,
        split: Split,
        id: &str,
        raster: &Raster,
        annotations: &[GroundTruthAnnotation],
    ) -> Result<(String, String)> {
        let image = Self::relative("images", split, &format!("{id}.png"));
        let label = Self::relative("labels", split, &format!("{id}.txt"));
        save_png(raster, &self.root.join(&image))?;
        let label_path = self.root.join(&label);
        fs::write(&label_path, write_label_file(annotations)).at(&label_path)?;
        Ok((image, label))
    }

    /// Writes `data.yaml` and `manifest.json`.
    pub fn finish(&self, manifest: &Manifest) -> Result<()> {
        let cfg = self.root.join(DATA_CONFIG_FILE);
        fs::write(&cfg, data_config(&manifest.class_names)).at(&cfg)?;
        let path = self.root.join(MANIFEST_FILE);
        let mut json = serde_json::to_string_pretty(manifest).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        json.push('\n');
        fs::write(&path, json).at(&path)
    }
}

/// YOLO dataset config. Paths are relative to the dataset root.
pub fn data_config(class_names: &[String]) -> String {
    let names: Vec<String> = class_names
        .iter()
        .map(|n| format!("'{}'", n.replace('\'', "''")))
        .collect();
    format!(
        "train: images/train\nval: images/val\n\nnc: {}\nnames: [{}]\n",
        class_names.len(),
        names.join(", ")
    )
}

/// Reads class names from a `data.yaml` (`names: [...]` or a block list) or
/// from a plain file with one name per line.
pub fn read_class_names(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).at(path)?;
    Ok(parse_class_names(&text))
}

pub fn parse_class_names(text: &str) -> Vec<String> {
    let unquote = |s: &str| -> String {
        let s = s.trim();
        if s.len() >= 2 && s.starts_with('\'') && s.ends_with('\'') {
            s[1..s.len() - 1].replace("''", "'")
        } else if s.len() >= 2 && s.starts_with('"') && s.ends_with('"') {
            s[1..s.len() - 1].to_string()
        } else {
            s.to_string()
        }
    };
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let Some(rest) = line.trim_start().strip_prefix("names:") else {
            continue;
        };
        let rest = rest.trim();
        if let Some(inner) = rest.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            return inner.split(',').map(unquote).filter(|s| !s.is_empty()).collect();
        }
        return lines
            .map(str::trim)
            .take_while(|l| l.starts_with('-'))
            .map(|l| unquote(&l[1..]))
            .collect();
    }
    if text.lines().any(|l| l.contains(':')) {
        return Vec::new();
    }
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
}

/// An image to be written by [`emit_dataset_layout`].
#[derive(Debug, Clone)]
pub struct LayoutEntry {
    pub id: String,
    pub split: Split,
    pub raster: Raster,
    pub annotations: Vec<GroundTruthAnnotation>,
    pub tags: BTreeMap<String, String>,
}

/// Writes a complete dataset from in-memory images.
pub fn emit_dataset_layout(
    root: &Path,
    entries: &[LayoutEntry],
    class_names: &[String],
    seed: u64,
    overwrite: bool,
) -> Result<Manifest> {
    let layout = DatasetLayout::prepare(root, overwrite)?;
    let mut images = Vec::with_capacity(entries.len());
    for e in entries {
        let (image, label) = layout.write_image(e.split, &e.id, &e.raster, &e.annotations)?;
        images.push(ManifestImage {
            id: e.id.clone(),
            split: e.split,
            width: e.raster.width(),
            height: e.raster.height(),
            image,
            label,
            object_counts_per_class: count_per_class(&e.annotations, class_names),
            tags: e.tags.clone(),
            skipped: Vec::new(),
        });
    }
    let manifest = Manifest::build(seed, class_names.to_vec(), images);
    layout.finish(&manifest)?;
    Ok(manifest)
}

pub(crate) fn count_per_class(annotations: &[GroundTruthAnnotation], class_names: &[String]) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = class_names.iter().map(|c| (c.clone(), 0)).collect();
    for a in annotations {
        let name = class_names
            .get(a.class_id as usize)
            .cloned()
            .unwrap_or_else(|| format!("class{}", a.class_id));
        *counts.entry(name).or_default() += 1;
    }
    counts
}
