//! Loading label and detection directories, evaluating them and rendering
//! the results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use palmforge_core::label::{parse_detection_file, parse_label_file};
use palmforge_core::metrics::{count_report, evaluate, CountReport, EvalImage, EvalReport, EvalSettings};
use palmforge_core::{Detection, GroundTruthAnnotation};
use serde::Serialize;

use crate::error::{Error, IoContext, Result};
use crate::layout::{read_class_names, DATA_CONFIG_FILE};

pub type Tags = BTreeMap<String, BTreeMap<String, String>>;

/// `*.txt` files in `dir` keyed by file stem, in sorted order.
fn text_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        let is_txt = path.extension().is_some_and(|e| e == "txt");
        if !is_txt || !path.is_file() {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            if stem == "classes" {
                continue;
            }
            files.insert(stem.to_string(), path);
        }
    }
    Ok(files)
}

fn load_dir<T>(dir: &Path, parse: fn(&str) -> palmforge_core::Result<Vec<T>>) -> Result<BTreeMap<String, Vec<T>>> {
    text_files(dir)?
        .into_iter()
        .map(|(id, path)| {
            let text = fs::read_to_string(&path).at(&path)?;
            let items = parse(&text).map_err(|source| Error::Parse { path: path.clone(), source })?;
            Ok((id, items))
        })
        .collect()
}

pub fn load_label_dir(dir: &Path) -> Result<BTreeMap<String, Vec<GroundTruthAnnotation>>> {
    load_dir(dir, parse_label_file)
}

pub fn load_detection_dir(dir: &Path) -> Result<BTreeMap<String, Vec<Detection>>> {
    load_dir(dir, parse_detection_file)
}

fn tag_value(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Reads per-image tags: either `{"<id>": {"<key>": value}}` or a dataset
/// manifest (whose `images[].tags` are used).
pub fn load_tags(path: &Path) -> Result<Tags> {
    let text = fs::read_to_string(path).at(path)?;
    let json: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = || Error::Config(format!("{}: expected an object of per-image tag objects", path.display()));
    let mut tags = Tags::new();
    if let Some(images) = json.get("images").and_then(|v| v.as_array()) {
        for img in images {
            let id = img.get("id").and_then(|v| v.as_str()).ok_or_else(bad)?;
            let entry = tags.entry(id.to_string()).or_default();
            if let Some(t) = img.get("tags").and_then(|v| v.as_object()) {
                entry.extend(t.iter().map(|(k, v)| (k.clone(), tag_value(v))));
            }
        }
        return Ok(tags);
    }
    for (id, t) in json.as_object().ok_or_else(bad)? {
        let t = t.as_object().ok_or_else(bad)?;
        tags.insert(id.clone(), t.iter().map(|(k, v)| (k.clone(), tag_value(v))).collect());
    }
    Ok(tags)
}

/// Pairs ground truth with detections. The image set is the set of label
/// files; detection files without a label file are ignored with a warning.
pub fn assemble(
    gt: BTreeMap<String, Vec<GroundTruthAnnotation>>,
    mut det: BTreeMap<String, Vec<Detection>>,
    tags: &Tags,
) -> (Vec<EvalImage>, usize) {
    let mut overlap = 0;
    let images = gt
        .into_iter()
        .map(|(id, truths)| {
            let detections = det.remove(&id).inspect(|_| overlap += 1).unwrap_or_default();
            EvalImage {
                tags: tags.get(&id).cloned().unwrap_or_default(),
                image_id: id,
                truths,
                detections,
            }
        })
        .collect();
    for id in det.keys() {
        log::warn!("detections for {id} have no ground truth and are ignored");
    }
    (images, overlap)
}

/// Looks for `classes.txt` or `data.yaml` in `dir` and up to two parents,
/// which covers both a dataset root and its `labels/<split>` directory.
pub fn discover_class_names(dir: &Path) -> Option<Vec<String>> {
    for d in dir.ancestors().take(3) {
        for file in ["classes.txt", DATA_CONFIG_FILE] {
            let p = d.join(file);
            if p.is_file() {
                if let Ok(names) = read_class_names(&p) {
                    if !names.is_empty() {
                        return Some(names);
                    }
                }
            }
        }
    }
    None
}

pub fn class_name(names: &[String], class_id: u32) -> String {
    names
        .get(class_id as usize)
        .cloned()
        .unwrap_or_else(|| format!("class{class_id}"))
}

#[derive(Debug, Clone, Default)]
pub struct EvalRequest {
    pub gt_dir: PathBuf,
    pub det_dir: PathBuf,
    pub tags: Option<PathBuf>,
    pub group_by: Option<String>,
    pub names: Option<PathBuf>,
    pub settings: EvalSettings,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub class_names: Vec<String>,
}

pub fn resolve_names(explicit: Option<&Path>, search: &Path) -> Result<Vec<String>> {
    match explicit {
        Some(p) => read_class_names(p),
        None => Ok(discover_class_names(search).unwrap_or_default()),
    }
}

pub fn load_images(req: &EvalRequest) -> Result<Vec<EvalImage>> {
    let gt = load_label_dir(&req.gt_dir)?;
    let det = load_detection_dir(&req.det_dir)?;
    let tags = match &req.tags {
        Some(p) => load_tags(p)?,
        None => Tags::new(),
    };
    let (images, overlap) = assemble(gt, det, &tags);
    if overlap == 0 {
        return Err(Error::NoOverlap {
            gt: req.gt_dir.clone(),
            det: req.det_dir.clone(),
        });
    }
    Ok(images)
}

pub fn run_evaluation(req: &EvalRequest) -> Result<Evaluation> {
    req.settings.validate()?;
    let images = load_images(req)?;
    let mut report = evaluate(&images, &req.settings)?;
    if let Some(key) = &req.group_by {
        report = report.with_groups(&images, key, &req.settings);
    }
    let class_names = resolve_names(req.names.as_deref(), &req.gt_dir)?;
    Ok(Evaluation { report, class_names })
}

pub fn map_line(report: &EvalReport) -> String {
    format!("mAP@{} = {:.4}", report.iou_threshold, report.map)
}

fn fmt_ap(ap: Option<f64>) -> String {
    ap.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

/// Plain-text report; the last line is always the mAP line.
pub fn render_report(report: &EvalReport, names: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "images: {}  iou: {}  conf: {}  interpolation: {}",
        report.n_images,
        report.iou_threshold,
        report.conf_threshold,
        report.interpolation.as_str()
    );
    let _ = writeln!(out, "{:<16} {:>6} {:>6} {:>8} {:>6} {:>6} {:>6}", "class", "n_gt", "n_det", "AP", "tp", "fp", "fn");
    for c in &report.classes {
        let mut name = class_name(names, c.class_id);
        if c.no_ground_truth {
            name.push_str(" (no gt)");
        }
        let _ = writeln!(
            out,
            "{:<16} {:>6} {:>6} {:>8} {:>6} {:>6} {:>6}",
            name,
            c.n_gt,
            c.n_det,
            fmt_ap(c.ap),
            c.tp,
            c.fp,
            c.fn_
        );
    }
    if let Some(key) = &report.group_key {
        let _ = writeln!(out, "\ngrouped by {key}");
        let _ = writeln!(out, "{:<16} {:>6} {:>6} {:>8}", key, "images", "n_gt", "mAP");
        for (value, g) in &report.groups {
            let _ = writeln!(
                out,
                "{:<16} {:>6} {:>6} {:>8}",
                value,
                g.image_count,
                g.n_gt,
                fmt_ap(g.report.as_ref().map(|r| r.map))
            );
        }
    }
    out.push_str(&map_line(report));
    out.push('\n');
    out
}

/// Precision-recall points of one class as CSV.
pub fn pr_csv(report: &EvalReport, class_id: u32) -> Option<String> {
    let c = report.class(class_id)?;
    let mut out = String::from("rank,confidence,tp,precision,recall\n");
    for p in &c.curve.points {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6}",
            p.rank, p.confidence, p.true_positive as u8, p.precision, p.recall
        );
    }
    Some(out)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    json.push('\n');
    fs::write(path, json).at(path)
}

/// Writes `report.json`, `report.txt` and `pr/<class>.csv` into `dir`.
pub fn write_outputs(dir: &Path, eval: &Evaluation) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    write_json(&dir.join("report.json"), &eval.report)?;
    let txt = dir.join("report.txt");
    fs::write(&txt, render_report(&eval.report, &eval.class_names)).at(&txt)?;
    let pr = dir.join("pr");
    fs::create_dir_all(&pr).at(&pr)?;
    for c in &eval.report.classes {
        if let Some(csv) = pr_csv(&eval.report, c.class_id) {
            let path = pr.join(format!("{}.csv", class_name(&eval.class_names, c.class_id)));
            fs::write(&path, csv).at(&path)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct CountRequest {
    pub det_dir: PathBuf,
    pub gt_dir: Option<PathBuf>,
    pub names: Option<PathBuf>,
    pub conf_threshold: f64,
}

/// Counts thresholded detections over every detection file, paired with
/// ground truth when a label directory is given.
pub fn run_count(req: &CountRequest) -> Result<(CountReport, Vec<String>)> {
    let det = load_detection_dir(&req.det_dir)?;
    let gt = match &req.gt_dir {
        Some(d) => load_label_dir(d)?,
        None => BTreeMap::new(),
    };
    let mut ids: Vec<&String> = det.keys().chain(gt.keys()).collect();
    ids.sort();
    ids.dedup();
    let images: Vec<EvalImage> = ids
        .into_iter()
        .map(|id| EvalImage {
            image_id: id.clone(),
            truths: gt.get(id).cloned().unwrap_or_default(),
            detections: det.get(id).cloned().unwrap_or_default(),
            ..Default::default()
        })
        .collect();
    let report = count_report(&images, req.conf_threshold, req.gt_dir.is_some())?;
    let search = req.gt_dir.as_deref().unwrap_or(&req.det_dir);
    let names = resolve_names(req.names.as_deref(), search)?;
    Ok((report, names))
}

pub fn render_counts(report: &CountReport, names: &[String]) -> String {
    let mut out = format!("confidence >= {}\n", report.conf_threshold);
    for (&class_id, c) in &report.per_class {
        out.push_str(&c.summary_line(&class_name(names, class_id)));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_from_either_shape() {
        let dir = tempfile::tempdir().unwrap();
        let flat = dir.path().join("tags.json");
        fs::write(&flat, r#"{"a": {"altitude": "25m", "n": 3}}"#).unwrap();
        let tags = load_tags(&flat).unwrap();
        assert_eq!(tags["a"]["altitude"], "25m");
        assert_eq!(tags["a"]["n"], "3");

        let manifest = dir.path().join("manifest.json");
        fs::write(&manifest, r#"{"images": [{"id": "b", "tags": {"background": "x.png"}}]}"#).unwrap();
        assert_eq!(load_tags(&manifest).unwrap()["b"]["background"], "x.png");

        fs::write(&flat, "[1, 2]").unwrap();
        assert!(load_tags(&flat).is_err());
    }

    #[test]
    fn parse_errors_name_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x.txt"), "0 0.5 0.5 0.1 0.1\n0 0.5 0.5 0.1\n").unwrap();
        let err = load_label_dir(dir.path()).unwrap_err().to_string();
        assert!(err.contains("x.txt"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }
}
