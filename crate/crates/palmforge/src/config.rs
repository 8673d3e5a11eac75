//! Generator configuration: a TOML file, optional flag overrides, defaults.
//!
//! Every field is optional at the patch level so that files, experiment
//! variants and CLI flags can be layered (`later.over(earlier)`), and only the
//! final merged patch is checked for completeness.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use palmforge_core::placement::{CountRange, PlacementParams};
use palmforge_core::seed::Split;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

pub const DEFAULT_OUTPUT_SIZE: (u32, u32) = (1280, 720);

/// Per-class object counts. `range` applies to both splits unless `train` or
/// `val` give their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCountSpec {
    pub range: Option<(u32, u32)>,
    pub train: Option<(u32, u32)>,
    pub val: Option<(u32, u32)>,
}

impl ClassCountSpec {
    pub fn both(min: u32, max: u32) -> Self {
        Self { range: Some((min, max)), ..Self::default() }
    }

    fn over(self, base: ClassCountSpec) -> Self {
        // an explicit shared range resets per-split values it would otherwise inherit
        if self.range.is_some() {
            return Self {
                range: self.range,
                train: self.train,
                val: self.val,
            };
        }
        Self {
            range: base.range,
            train: self.train.or(base.train),
            val: self.val.or(base.val),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorPatch {
    pub seed: Option<u64>,
    pub output_size: Option<(u32, u32)>,
    pub train_count: Option<u32>,
    pub val_count: Option<u32>,
    pub bg_pool_train: Option<PathBuf>,
    pub bg_pool_val: Option<PathBuf>,
    pub sprite_pool: Option<PathBuf>,
    /// Explicit class order; defaults to the sorted sprite sub-directories.
    pub classes: Option<Vec<String>>,
    pub counts: Option<BTreeMap<String, ClassCountSpec>>,
    pub scale_range: Option<(f64, f64)>,
    pub rotation: Option<bool>,
    pub flip_probability: Option<(f64, f64)>,
    pub max_placement_attempts: Option<u32>,
    pub strict_count: Option<bool>,
    pub margin: Option<u32>,
    pub out: Option<PathBuf>,
}

impl GeneratorPatch {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        let mut patch: GeneratorPatch = toml::from_str(&text).map_err(|source| Error::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        patch.rebase(path.parent().unwrap_or(Path::new(".")));
        Ok(patch)
    }

    /// Makes relative paths relative to `dir`.
    pub fn rebase(&mut self, dir: &Path) {
        for p in [
            &mut self.bg_pool_train,
            &mut self.bg_pool_val,
            &mut self.sprite_pool,
            &mut self.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }

    /// Fields set in `self` win over `base`.
    pub fn over(self, base: GeneratorPatch) -> GeneratorPatch {
        let counts = match (self.counts, base.counts) {
            (Some(top), Some(mut bottom)) => {
                for (class, spec) in top {
                    let merged = spec.over(bottom.get(&class).copied().unwrap_or_default());
                    bottom.insert(class, merged);
                }
                Some(bottom)
            }
            (top, bottom) => top.or(bottom),
        };
        GeneratorPatch {
            seed: self.seed.or(base.seed),
            output_size: self.output_size.or(base.output_size),
            train_count: self.train_count.or(base.train_count),
            val_count: self.val_count.or(base.val_count),
            bg_pool_train: self.bg_pool_train.or(base.bg_pool_train),
            bg_pool_val: self.bg_pool_val.or(base.bg_pool_val),
            sprite_pool: self.sprite_pool.or(base.sprite_pool),
            classes: self.classes.or(base.classes),
            counts,
            scale_range: self.scale_range.or(base.scale_range),
            rotation: self.rotation.or(base.rotation),
            flip_probability: self.flip_probability.or(base.flip_probability),
            max_placement_attempts: self.max_placement_attempts.or(base.max_placement_attempts),
            strict_count: self.strict_count.or(base.strict_count),
            margin: self.margin.or(base.margin),
            out: self.out.or(base.out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitRanges {
    pub train: CountRange,
    pub val: CountRange,
}

impl SplitRanges {
    pub fn get(&self, split: Split) -> CountRange {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
        }
    }
}

/// A complete, validated generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub output_size: (u32, u32),
    pub train_count: u32,
    pub val_count: u32,
    pub bg_pool_train: Option<PathBuf>,
    pub bg_pool_val: Option<PathBuf>,
    pub sprite_pool: PathBuf,
    pub classes: Option<Vec<String>>,
    pub counts: BTreeMap<String, SplitRanges>,
    pub placement: PlacementParams,
    pub out: Option<PathBuf>,
}

fn missing(field: &str) -> Error {
    Error::Config(format!("missing required field `{field}`"))
}

fn range(class: &str, split: &str, r: (u32, u32)) -> Result<CountRange> {
    CountRange::new(r.0, r.1).map_err(|_| {
        Error::Config(format!(
            "counts.{class}.{split}: range {}-{} has min > max",
            r.0, r.1
        ))
    })
}

impl GeneratorConfig {
    pub fn from_patch(p: GeneratorPatch) -> Result<Self> {
        let output_size = p.output_size.unwrap_or(DEFAULT_OUTPUT_SIZE);
        if output_size.0 == 0 || output_size.1 == 0 {
            return Err(Error::Config("output_size must be at least 1x1".into()));
        }
        let train_count = p.train_count.ok_or_else(|| missing("train_count"))?;
        let val_count = p.val_count.ok_or_else(|| missing("val_count"))?;
        if train_count > 0 && p.bg_pool_train.is_none() {
            return Err(missing("bg_pool_train"));
        }
        if val_count > 0 && p.bg_pool_val.is_none() {
            return Err(missing("bg_pool_val"));
        }
        let sprite_pool = p.sprite_pool.ok_or_else(|| missing("sprite_pool"))?;

        let mut counts = BTreeMap::new();
        for (class, spec) in p.counts.ok_or_else(|| missing("counts"))? {
            let train = spec.train.or(spec.range).ok_or_else(|| {
                Error::Config(format!("counts.{class}: needs `range` or `train`"))
            })?;
            let val = spec
                .val
                .or(spec.range)
                .ok_or_else(|| Error::Config(format!("counts.{class}: needs `range` or `val`")))?;
            counts.insert(
                class.clone(),
                SplitRanges {
                    train: range(&class, "train", train)?,
                    val: range(&class, "val", val)?,
                },
            );
        }

        let defaults = PlacementParams::default();
        let placement = PlacementParams {
            scale_range: p.scale_range.unwrap_or(defaults.scale_range),
            rotation: p.rotation.unwrap_or(defaults.rotation),
            flip_probability: p.flip_probability.unwrap_or(defaults.flip_probability),
            max_attempts: p.max_placement_attempts.unwrap_or(defaults.max_attempts),
            margin: p.margin.unwrap_or(defaults.margin),
            strict_count: p.strict_count.unwrap_or(defaults.strict_count),
        };
        placement.validate()?;

        if let Some(classes) = &p.classes {
            if classes.is_empty() {
                return Err(Error::Config("`classes` must not be empty".into()));
            }
            for (i, c) in classes.iter().enumerate() {
                if classes[..i].contains(c) {
                    return Err(Error::Config(format!("class `{c}` listed twice")));
                }
            }
        }

        Ok(Self {
            seed: p.seed.unwrap_or(0),
            output_size,
            train_count,
            val_count,
            bg_pool_train: p.bg_pool_train,
            bg_pool_val: p.bg_pool_val,
            sprite_pool,
            classes: p.classes,
            counts,
            placement,
            out: p.out,
        })
    }

    pub fn count(&self, split: Split) -> u32 {
        match split {
            Split::Train => self.train_count,
            Split::Val => self.val_count,
        }
    }

    pub fn bg_pool(&self, split: Split) -> Option<&Path> {
        match split {
            Split::Train => self.bg_pool_train.as_deref(),
            Split::Val => self.bg_pool_val.as_deref(),
        }
    }
}
