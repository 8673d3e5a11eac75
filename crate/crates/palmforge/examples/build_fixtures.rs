//! Regenerates the bundled fixtures under `crates/palmforge/fixtures/`.
//!
//! ```text
//! cargo run -p palmforge --example build_fixtures
//! ```
//!
//! Output is fully determined by the seeds below, so re-running it leaves the
//! checked-in files unchanged.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use palmforge::core::label::{write_detection_file, write_label_file};
use palmforge::core::{BBox, Detection, GroundTruthAnnotation, Raster};
use palmforge::imageio::save_png;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Result<T = ()> = std::result::Result<T, Box<dyn std::error::Error>>;

fn write(path: &Path, text: &str) -> Result {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn bbox(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
    BBox::new(cx, cy, w, h).expect("fixture boxes are valid")
}

/// `n` non-overlapping boxes, one per randomly chosen cell of a grid.
fn grid_boxes(rng: &mut ChaCha8Rng, n: usize, cols: usize, rows: usize, size: f64) -> (Vec<BBox>, Vec<(usize, usize)>) {
    let mut cells: Vec<(usize, usize)> = (0..rows).flat_map(|r| (0..cols).map(move |c| (c, r))).collect();
    cells.shuffle(rng);
    assert!(n <= cells.len());
    let (cw, ch) = (1.0 / cols as f64, 1.0 / rows as f64);
    let boxes = cells[..n]
        .iter()
        .map(|&(c, r)| {
            let w = size * rng.random_range(0.85..1.15);
            let h = size * 16.0 / 9.0 * rng.random_range(0.85..1.15);
            let slack_x = (cw - w).max(0.0) / 2.0;
            let slack_y = (ch - h).max(0.0) / 2.0;
            let cx = (c as f64 + 0.5) * cw + rng.random_range(-slack_x..=slack_x) * 0.8;
            let cy = (r as f64 + 0.5) * ch + rng.random_range(-slack_y..=slack_y) * 0.8;
            bbox(cx, cy, w.min(cw), h.min(ch))
        })
        .collect();
    (boxes, cells[n..].to_vec())
}

/// A detection close to `b` (IoU well above 0.5).
fn near(rng: &mut ChaCha8Rng, b: &BBox) -> BBox {
    let dx = b.w() * rng.random_range(-0.06..0.06);
    let dy = b.h() * rng.random_range(-0.06..0.06);
    let sw = rng.random_range(0.92..1.08);
    let sh = rng.random_range(0.92..1.08);
    let w = b.w() * sw;
    let h = b.h() * sh;
    let cx = (b.cx() + dx).clamp(w / 2.0, 1.0 - w / 2.0);
    let cy = (b.cy() + dy).clamp(h / 2.0, 1.0 - h / 2.0);
    bbox(cx, cy, w, h)
}

fn cell_box(cell: (usize, usize), cols: usize, rows: usize, size: f64) -> BBox {
    let (cw, ch) = (1.0 / cols as f64, 1.0 / rows as f64);
    bbox(
        (cell.0 as f64 + 0.5) * cw,
        (cell.1 as f64 + 0.5) * ch,
        size.min(cw),
        (size * 16.0 / 9.0).min(ch),
    )
}

/// Confidence in thousandths, uniform over `lo..=hi`.
fn conf(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> f64 {
    f64::from(rng.random_range(lo..=hi)) / 1000.0
}

fn det(b: BBox, c: f64) -> Detection {
    Detection::new(0, b, c).expect("fixture detections are valid")
}

fn split_counts(total: usize, images: usize) -> Vec<usize> {
    (0..images).map(|i| total / images + usize::from(i < total % images)).collect()
}

struct TestImage {
    id: String,
    truths: Vec<BBox>,
    free: Vec<(usize, usize)>,
    grid: (usize, usize),
    size: f64,
}

fn write_set(dir: &Path, images: &[TestImage], dets: &BTreeMap<String, Vec<Detection>>) -> Result {
    for img in images {
        let ann: Vec<GroundTruthAnnotation> = img.truths.iter().map(|&b| GroundTruthAnnotation::new(0, b)).collect();
        write(&dir.join("gt").join(format!("{}.txt", img.id)), &write_label_file(&ann))?;
        let d = dets.get(&img.id).map(Vec::as_slice).unwrap_or(&[]);
        write(&dir.join("det").join(format!("{}.txt", img.id)), &write_detection_file(d))?;
    }
    write(&dir.join("classes.txt"), "palm\n")
}

fn test_images(rng: &mut ChaCha8Rng, prefix: &str, images: usize, palms: usize, grid: (usize, usize), size: f64) -> Vec<TestImage> {
    split_counts(palms, images)
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let (truths, free) = grid_boxes(rng, n, grid.0, grid.1, size);
            TestImage { id: format!("{prefix}_{i:03}"), truths, free, grid, size }
        })
        .collect()
}

/// Counting fixture: 38 images, 187 palms, 199 detections at confidence >= 0.6.
///
/// 185 truths are found (175 at >= 0.71, 10 in [0.6, 0.71)), 14 false
/// positives sit in [0.6, 0.71) and 12 more detections fall below 0.6.
fn counting(root: &Path) -> Result {
    let mut rng = ChaCha8Rng::seed_from_u64(0x00c0_0187);
    let images = test_images(&mut rng, "count", 38, 187, (8, 5), 0.07);
    let mut slots: Vec<(usize, usize)> = images
        .iter()
        .enumerate()
        .flat_map(|(i, img)| (0..img.truths.len()).map(move |t| (i, t)))
        .collect();
    slots.shuffle(&mut rng);
    let mut dets: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for (k, &(i, t)) in slots.iter().enumerate() {
        let c = match k {
            0..=174 => conf(&mut rng, 720, 990),
            175..=184 => conf(&mut rng, 610, 700),
            _ => continue,
        };
        let b = near(&mut rng, &images[i].truths[t]);
        dets.entry(images[i].id.clone()).or_default().push(det(b, c));
    }
    let mut free: Vec<(usize, (usize, usize))> = images
        .iter()
        .enumerate()
        .flat_map(|(i, img)| img.free.iter().map(move |&c| (i, c)))
        .collect();
    free.shuffle(&mut rng);
    for (k, &(i, cell)) in free.iter().take(26).enumerate() {
        let c = if k < 14 { conf(&mut rng, 610, 700) } else { conf(&mut rng, 50, 550) };
        let img = &images[i];
        let b = cell_box(cell, img.grid.0, img.grid.1, img.size);
        dets.entry(img.id.clone()).or_default().push(det(b, c));
    }
    for d in dets.values_mut() {
        d.shuffle(&mut rng);
    }
    write_set(root, &images, &dets)?;
    let tags: BTreeMap<&str, BTreeMap<&str, &str>> =
        images.iter().map(|i| (i.id.as_str(), BTreeMap::from([("altitude", "25m")]))).collect();
    write(&root.join("tags.json"), &(serde_json::to_string_pretty(&tags)? + "\n"))
}

/// Altitude fixture: 25m/45m/70m test images with 38/12/3 images and
/// 187/126/66 palms; recall drops with altitude.
fn altitude(root: &Path) -> Result {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa171_7000);
    let groups = [("25m", 38, 187, (8, 5), 0.07, 0.9), ("45m", 12, 126, (12, 8), 0.045, 0.75), ("70m", 3, 66, (14, 9), 0.03, 0.5)];
    let mut all = Vec::new();
    let mut dets: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    let mut tags: BTreeMap<String, BTreeMap<&str, &str>> = BTreeMap::new();
    for (alt, n_img, palms, grid, size, recall) in groups {
        let images = test_images(&mut rng, &format!("alt{}", &alt[..2]), n_img, palms, grid, size);
        for img in &images {
            let d = dets.entry(img.id.clone()).or_default();
            for t in &img.truths {
                if rng.random_bool(recall) {
                    let c = conf(&mut rng, 450, 990);
                    d.push(det(near(&mut rng, t), c));
                }
            }
            for &cell in img.free.iter().take(2) {
                if rng.random_bool(0.5) {
                    let c = conf(&mut rng, 100, 800);
                    d.push(det(cell_box(cell, grid.0, grid.1, size), c));
                }
            }
            tags.insert(img.id.clone(), BTreeMap::from([("altitude", alt)]));
        }
        all.extend(images);
    }
    write_set(root, &all, &dets)?;
    write(&root.join("tags.json"), &(serde_json::to_string_pretty(&tags)? + "\n"))
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

/// Smooth value-noise texture blending between two colors.
fn texture(rng: &mut ChaCha8Rng, w: u32, h: u32, lo: [f64; 3], hi: [f64; 3]) -> Raster {
    let (gx, gy) = (17usize, 10usize);
    let grid: Vec<f64> = (0..gx * gy).map(|_| rng.random::<f64>()).collect();
    let mut r = Raster::transparent(w, h).expect("size");
    for y in 0..h {
        for x in 0..w {
            let fx = x as f64 / w as f64 * (gx - 1) as f64;
            let fy = y as f64 / h as f64 * (gy - 1) as f64;
            let (ix, iy) = (fx as usize, fy as usize);
            let (tx, ty) = (fx - ix as f64, fy - iy as f64);
            let at = |i: usize, j: usize| grid[j.min(gy - 1) * gx + i.min(gx - 1)];
            let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
            let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
            let v = (top * (1.0 - ty) + bottom * ty + rng.random_range(-0.08..0.08)).clamp(0.0, 1.0);
            let c = lerp(lo, hi, v);
            r.set_pixel(x, y, [c[0] as u8, c[1] as u8, c[2] as u8, 255]);
        }
    }
    r
}

fn seg_distance(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> (f64, f64) {
    let (dx, dy) = (bx - ax, by - ay);
    let t = (((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    let (qx, qy) = (ax + t * dx, ay + t * dy);
    (((px - qx).powi(2) + (py - qy).powi(2)).sqrt(), t)
}

/// A top-down palm crown: tapered fronds around a dark center.
fn palm_sprite(rng: &mut ChaCha8Rng, size: u32) -> Raster {
    let c = (size as f64 - 1.0) / 2.0;
    let fronds = rng.random_range(7..=11);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let tips: Vec<(f64, f64, f64)> = (0..fronds)
        .map(|i| {
            let a = phase + i as f64 / fronds as f64 * std::f64::consts::TAU + rng.random_range(-0.15..0.15);
            let len = c * rng.random_range(0.75..0.98);
            (c + a.cos() * len, c + a.sin() * len, c * rng.random_range(0.12..0.18))
        })
        .collect();
    let base = [rng.random_range(40.0..70.0), rng.random_range(110.0..150.0), rng.random_range(30.0..60.0)];
    let mut r = Raster::transparent(size, size).expect("size");
    for y in 0..size {
        for x in 0..size {
            let (px, py) = (x as f64, y as f64);
            let mut cover = 0.0f64;
            let mut shade = 0.0;
            for &(tx, ty, width) in &tips {
                let (d, t) = seg_distance(px, py, c, c, tx, ty);
                let half = width * (1.0 - 0.8 * t);
                let a = (half + 0.5 - d).clamp(0.0, 1.0);
                if a > cover {
                    cover = a;
                    shade = t;
                }
            }
            let center = (((px - c).powi(2) + (py - c).powi(2)).sqrt() - c * 0.12).clamp(0.0, 1.0);
            if cover > 0.0 {
                let k = 0.7 + 0.5 * shade;
                let rgb = [base[0] * k, base[1] * k, base[2] * k].map(|v| v.min(255.0) as u8);
                let rgb = if center < 1.0 { [60, 70, 30] } else { rgb };
                r.set_pixel(x, y, [rgb[0], rgb[1], rgb[2], (cover * 255.0).round() as u8]);
            }
        }
    }
    r
}

fn pools(root: &Path) -> Result {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9001_5eed);
    let sprites = root.join("sprites/palm");
    fs::create_dir_all(&sprites)?;
    for (i, size) in [44u32, 52, 58, 48, 64].into_iter().enumerate() {
        save_png(&palm_sprite(&mut rng, size), &sprites.join(format!("palm_{i}.png")))?;
    }
    let green = ([70.0, 95.0, 40.0], [150.0, 170.0, 90.0]);
    let red = ([120.0, 60.0, 40.0], [200.0, 130.0, 90.0]);
    let mixed = ([110.0, 90.0, 50.0], [150.0, 165.0, 100.0]);
    for (name, (lo, hi), n) in [("green", green, 3), ("red", red, 3), ("mixed", mixed, 3)] {
        let dir = root.join("backgrounds").join(name);
        fs::create_dir_all(&dir)?;
        for i in 0..n {
            save_png(&texture(&mut rng, 320, 180, lo, hi), &dir.join(format!("{name}_{i}.png")))?;
        }
    }
    Ok(())
}

const EXPERIMENT_SPEC: &str = r#"# Three dataset variants, three detector repetitions each.
seed = 2023
runs_dir = "runs"
repetitions = 3
group_by = "altitude"
test_gt = "test/labels"
test_tags = "test/tags.json"
class_names = ["palm"]

[generator]
train_count = 6
val_count = 2
sprite_pool = "../pools/sprites"
bg_pool_train = "../pools/backgrounds/green"
bg_pool_val = "../pools/backgrounds/green"
scale_range = [0.8, 1.2]
counts.palm = { range = [15, 25] }

[[variant]]
name = "baseline"
detections = "../detections/{variant}/rep{rep}"

[[variant]]
name = "red-bg"
detections = "../detections/{variant}/rep{rep}"

[variant.generator]
bg_pool_train = "../pools/backgrounds/red"
bg_pool_val = "../pools/backgrounds/red"

[[variant]]
name = "mixed-bg"
freeze = 10
detections = "../detections/{variant}/rep{rep}"

[variant.generator]
bg_pool_train = "../pools/backgrounds/mixed"
bg_pool_val = "../pools/backgrounds/mixed"
counts.palm = { train = [5, 15], val = [15, 25] }
"#;

/// Detections for one repetition: the first `hits` truths (in `order`) are
/// found with descending confidence, with false positives inserted at the
/// given ranks.
fn experiment_rep(
    rng: &mut ChaCha8Rng,
    images: &[TestImage],
    order: &[(usize, usize)],
    hits: usize,
    fp_ranks: &[usize],
    tail_fps: usize,
) -> BTreeMap<String, Vec<Detection>> {
    let mut free: Vec<(usize, (usize, usize))> = images
        .iter()
        .enumerate()
        .flat_map(|(i, img)| img.free.iter().map(move |&c| (i, c)))
        .collect();
    free.shuffle(rng);
    let mut free = free.into_iter();
    let mut out: BTreeMap<String, Vec<Detection>> = images.iter().map(|i| (i.id.clone(), Vec::new())).collect();
    let mut level = 950u32;
    let mut hit = 0;
    let mut rank = 0;
    while hit < hits {
        let c = f64::from(level) / 1000.0;
        level -= 10;
        if fp_ranks.contains(&rank) {
            let (i, cell) = free.next().expect("free cell");
            let img = &images[i];
            out.get_mut(&img.id).unwrap().push(det(cell_box(cell, img.grid.0, img.grid.1, img.size), c));
        } else {
            let (i, t) = order[hit];
            let b = near(rng, &images[i].truths[t]);
            out.get_mut(&images[i].id).unwrap().push(det(b, c));
            hit += 1;
        }
        rank += 1;
    }
    for k in 0..tail_fps {
        let (i, cell) = free.next().expect("free cell");
        let img = &images[i];
        let c = f64::from(400 - 20 * k as u32) / 1000.0;
        out.get_mut(&img.id).unwrap().push(det(cell_box(cell, img.grid.0, img.grid.1, img.size), c));
    }
    out
}

/// Experiment fixture: 4 test images with 20 palms. The baseline finds 13
/// truths before any false positive in every repetition, so its AP (and mAP,
/// with one class) is 13/20 = 0.65.
fn experiment(root: &Path) -> Result {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0e59_0065);
    let images = test_images(&mut rng, "test", 4, 20, (8, 5), 0.07);
    let mut tags = BTreeMap::new();
    for (k, img) in images.iter().enumerate() {
        let ann: Vec<GroundTruthAnnotation> = img.truths.iter().map(|&b| GroundTruthAnnotation::new(0, b)).collect();
        write(&root.join("test/labels").join(format!("{}.txt", img.id)), &write_label_file(&ann))?;
        tags.insert(img.id.clone(), BTreeMap::from([("altitude", if k < 2 { "25m" } else { "45m" })]));
    }
    write(&root.join("test/tags.json"), &(serde_json::to_string_pretty(&tags)? + "\n"))?;
    write(&root.join("exp.toml"), EXPERIMENT_SPEC)?;

    let mut order: Vec<(usize, usize)> = images
        .iter()
        .enumerate()
        .flat_map(|(i, img)| (0..img.truths.len()).map(move |t| (i, t)))
        .collect();
    order.shuffle(&mut rng);

    // (variant, rep) -> (hits, false-positive ranks, trailing false positives)
    let plan: [(&str, [(usize, &[usize], usize); 3]); 3] = [
        ("baseline", [(13, &[], 4), (13, &[], 4), (13, &[], 4)]),
        ("red-bg", [(11, &[3, 8], 3), (12, &[5], 2), (10, &[1, 6, 9], 4)]),
        ("mixed-bg", [(16, &[10], 2), (17, &[12, 14], 1), (15, &[7], 3)]),
    ];
    for (variant, reps) in plan {
        for (k, (hits, fps, tail)) in reps.into_iter().enumerate() {
            let mut rep_rng = ChaCha8Rng::seed_from_u64(0x5eed ^ ((k as u64) << 8) ^ variant.len() as u64);
            let dets = experiment_rep(&mut rep_rng, &images, &order, hits, fps, tail);
            let dir = root.join("detections").join(variant).join(format!("rep{}", k + 1));
            for (id, d) in dets {
                write(&dir.join(format!("{id}.txt")), &write_detection_file(&d))?;
            }
        }
    }
    Ok(())
}

/// Hand-written label files exercising the parser's accepted syntax.
fn edge_cases(root: &Path) -> Result {
    let files: [(&str, &str); 10] = [
        ("empty.txt", ""),
        ("blank_lines.txt", "\n\n0 0.5 0.5 0.2 0.2\n\n\n1 0.25 0.25 0.1 0.1\n\n"),
        ("crlf.txt", "0 0.5 0.5 0.2 0.2\r\n0 0.1 0.1 0.05 0.05\r\n"),
        ("tabs_and_spaces.txt", "0\t0.5\t0.5 \t0.2  0.2   \n  2 0.3 0.7 0.1 0.2\t\n"),
        ("touching_edges.txt", "0 0.05 0.05 0.1 0.1\n0 0.95 0.95 0.1 0.1\n0 0.5 0.5 1.0 1.0\n"),
        ("exponents.txt", "0 5e-1 5.0E-1 1e-3 2.5e-2\n"),
        ("long_decimals.txt", "0 0.123456789012 0.887654321098 0.0123456789 0.0456789123\n"),
        ("tiny_boxes.txt", "0 0.5 0.5 1e-6 1e-6\n0 0.0000005 0.999999 0.000001 0.000002\n"),
        ("no_trailing_newline.txt", "3 0.4 0.6 0.3 0.3"),
        ("many_classes.txt", "0 0.1 0.1 0.1 0.1\n7 0.3 0.3 0.1 0.1\n42 0.5 0.5 0.1 0.1\n4294967295 0.7 0.7 0.1 0.1\n"),
    ];
    for (name, text) in files {
        write(&root.join(name), text)?;
    }
    Ok(())
}

fn main() -> Result {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for sub in ["counting", "altitude", "pools", "experiment", "labels"] {
        let p = root.join(sub);
        if p.exists() {
            fs::remove_dir_all(&p)?;
        }
    }
    pools(&root.join("pools"))?;
    counting(&root.join("counting"))?;
    altitude(&root.join("altitude"))?;
    experiment(&root.join("experiment"))?;
    edge_cases(&root.join("labels/edge_cases"))?;
    println!("fixtures written to {}", root.display());
    Ok(())
}
