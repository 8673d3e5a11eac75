#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use palmforge::config::{ClassCountSpec, GeneratorConfig, GeneratorPatch};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// Every file under `root`, keyed by its relative path.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Generator settings over the bundled pools (green backgrounds, 5 palm sprites).
pub fn pool_patch(train: u32, val: u32, range: (u32, u32)) -> GeneratorPatch {
    let pools = fixtures().join("pools");
    GeneratorPatch {
        seed: Some(17),
        output_size: Some((1280, 720)),
        train_count: Some(train),
        val_count: Some(val),
        bg_pool_train: Some(pools.join("backgrounds/green")),
        bg_pool_val: Some(pools.join("backgrounds/green")),
        sprite_pool: Some(pools.join("sprites")),
        counts: Some(BTreeMap::from([("palm".to_string(), ClassCountSpec::both(range.0, range.1))])),
        ..GeneratorPatch::default()
    }
}

pub fn pool_config(train: u32, val: u32, range: (u32, u32)) -> GeneratorConfig {
    GeneratorConfig::from_patch(pool_patch(train, val, range)).unwrap()
}
