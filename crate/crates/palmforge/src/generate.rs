//! Dataset generation: pool loading and the per-image pipeline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use palmforge_core::placement::{choose_index, draw_targets, render, sample_placements, ClassPool, CountRange};
use palmforge_core::seed::{image_rng, Split};
use palmforge_core::{Raster, Sprite};
use rayon::prelude::*;

use crate::config::GeneratorConfig;
use crate::error::{Error, IoContext, Result};
use crate::imageio::{load_rgba, load_rgba_with_alpha, resize};
use crate::layout::{count_per_class, DatasetLayout, Manifest, ManifestImage, SkipRecord};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone)]
pub struct Background {
    pub name: String,
    pub raster: Raster,
}

/// Everything loaded from disk before generation starts.
#[derive(Debug, Clone, Default)]
pub struct Pools {
    pub class_names: Vec<String>,
    /// Sprites per class, aligned with `class_names`.
    pub sprites: Vec<Vec<Sprite>>,
    pub train_backgrounds: Vec<Background>,
    pub val_backgrounds: Vec<Background>,
}

impl Pools {
    pub fn backgrounds(&self, split: Split) -> &[Background] {
        match split {
            Split::Train => &self.train_backgrounds,
            Split::Val => &self.val_backgrounds,
        }
    }
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} directory {} does not exist", path.display())))
    }
}

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        let matches = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| extensions.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if matches && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn sprite_classes(pool: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(pool).at(pool)? {
        let path = entry.at(pool)?.path();
        if path.is_dir() {
            names.push(file_name(&path));
        }
    }
    names.sort();
    Ok(names)
}

fn load_backgrounds(dir: &Path, size: (u32, u32)) -> Result<Vec<Background>> {
    require_dir(dir, "background pool")?;
    let files = list_images(dir, &IMAGE_EXTENSIONS)?;
    if files.is_empty() {
        return Err(Error::Config(format!("background pool {} has no images", dir.display())));
    }
    files
        .par_iter()
        .map(|path| {
            let raster = load_rgba(path)?;
            Ok(Background {
                name: file_name(path),
                raster: resize(raster, size.0, size.1),
            })
        })
        .collect()
}

pub fn load_pools(cfg: &GeneratorConfig) -> Result<Pools> {
    require_dir(&cfg.sprite_pool, "sprite pool")?;
    let class_names = match &cfg.classes {
        Some(c) => c.clone(),
        None => sprite_classes(&cfg.sprite_pool)?,
    };
    if class_names.is_empty() {
        return Err(Error::Config(format!(
            "sprite pool {} has no class sub-directories",
            cfg.sprite_pool.display()
        )));
    }
    for class in cfg.counts.keys() {
        if !class_names.contains(class) {
            return Err(Error::Config(format!("counts.{class}: unknown class `{class}`")));
        }
    }

    let mut sprites = Vec::with_capacity(class_names.len());
    for class in &class_names {
        let dir = cfg.sprite_pool.join(class);
        require_dir(&dir, "sprite class")?;
        let needed = cfg.counts.get(class).is_some_and(|r| r.train.max > 0 || r.val.max > 0);
        let files = list_images(&dir, &["png"])?;
        if files.is_empty() && needed {
            return Err(Error::Config(format!("sprite pool {} has no PNG files", dir.display())));
        }
        let pool = files
            .par_iter()
            .map(|path| {
                let raster = load_rgba_with_alpha(path)?;
                Sprite::new(raster, class.clone(), format!("{class}/{}", file_name(path)))
                    .map_err(|source| Error::Parse { path: path.clone(), source })
            })
            .collect::<Result<Vec<_>>>()?;
        sprites.push(pool);
    }

    let mut pools = Pools { class_names, sprites, ..Pools::default() };
    for split in Split::ALL {
        if cfg.count(split) == 0 {
            continue;
        }
        let dir = cfg.bg_pool(split).expect("validated");
        let bgs = load_backgrounds(dir, cfg.output_size)?;
        match split {
            Split::Train => pools.train_backgrounds = bgs,
            Split::Val => pools.val_backgrounds = bgs,
        }
    }
    Ok(pools)
}

pub fn image_id(split: Split, index: u32) -> String {
    format!("{}_{index:05}", split.as_str())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    pub overwrite: bool,
}

fn generate_one(
    cfg: &GeneratorConfig,
    pools: &Pools,
    layout: &DatasetLayout,
    split: Split,
    index: u32,
) -> Result<ManifestImage> {
    let id = image_id(split, index);
    let mut rng = image_rng(cfg.seed, split, u64::from(index));
    let backgrounds = pools.backgrounds(split);
    let bg = &backgrounds[choose_index(&mut rng, backgrounds.len())];

    let ranges: Vec<_> = pools
        .class_names
        .iter()
        .map(|c| cfg.counts.get(c).map_or(CountRange::fixed(0), |r| r.get(split)))
        .collect();
    let targets = draw_targets(&mut rng, &ranges);
    let class_pools: Vec<ClassPool<'_>> = pools
        .sprites
        .iter()
        .enumerate()
        .map(|(i, s)| ClassPool { class_id: i as u32, sprites: s })
        .collect();
    let generation = |source| Error::Generation { image: id.clone(), source };
    let outcome = sample_placements(&mut rng, cfg.output_size, &class_pools, &targets, &cfg.placement)
        .map_err(generation)?;

    let mut canvas = bg.raster.clone();
    render(&mut canvas, &outcome.placed).map_err(generation)?;
    let annotations = outcome.annotations();
    let (image, label) = layout.write_image(split, &id, &canvas, &annotations)?;

    let skipped: Vec<SkipRecord> = outcome
        .skipped
        .iter()
        .map(|s| SkipRecord {
            class: pools.class_names[s.class_id as usize].clone(),
            object_index: s.object_index,
        })
        .collect();
    if !skipped.is_empty() {
        log::warn!("{id}: {} object(s) could not be placed", skipped.len());
    }
    let tags = BTreeMap::from([("background".to_string(), bg.name.clone())]);
    Ok(ManifestImage {
        id,
        split,
        width: canvas.width(),
        height: canvas.height(),
        image,
        label,
        object_counts_per_class: count_per_class(&annotations, &pools.class_names),
        tags,
        skipped,
    })
}

/// Generates a dataset from already loaded pools. Output does not depend on
/// the number of worker threads.
pub fn generate_with_pools(
    cfg: &GeneratorConfig,
    pools: &Pools,
    out: &Path,
    opts: &RunOptions,
) -> Result<Manifest> {
    let layout = DatasetLayout::prepare(out, opts.overwrite)?;
    let work: Vec<(Split, u32)> = Split::ALL
        .iter()
        .flat_map(|&s| (0..cfg.count(s)).map(move |i| (s, i)))
        .collect();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let images = pool.install(|| {
        work.par_iter()
            .map(|&(split, i)| generate_one(cfg, pools, &layout, split, i))
            .collect::<Result<Vec<_>>>()
    })?;

    let manifest = Manifest::build(cfg.seed, pools.class_names.clone(), images);
    layout.finish(&manifest)?;
    log::info!(
        "wrote {} images to {} ({} skipped objects)",
        manifest.images.len(),
        out.display(),
        manifest.skipped_total
    );
    Ok(manifest)
}

pub fn generate_dataset(cfg: &GeneratorConfig, out: &Path, opts: &RunOptions) -> Result<Manifest> {
    let pools = load_pools(cfg)?;
    generate_with_pools(cfg, &pools, out, opts)
}
