//! Experiment harness: dataset variants, external detector runs, summaries.
//!
//! Run tree under `runs_dir`:
//! `<variant>/dataset/`, `<variant>/detections/rep<k>/`, `<variant>/report/`,
//! plus `summary.csv`, `summary.json` and `charts/`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Component, Path, PathBuf};

use palmforge_core::metrics::{evaluate, EvalImage, EvalSettings, Interpolation};
use palmforge_core::seed::derive_variant_seed;
use palmforge_core::summary::{RepetitionResult, SummaryRow};
use serde::{Deserialize, Serialize};

use crate::charts::write_charts;
use crate::config::{GeneratorConfig, GeneratorPatch};
use crate::error::{Error, IoContext, Result};
use crate::evaluate::{assemble, class_name, discover_class_names, load_detection_dir, load_label_dir, load_tags, write_json, Tags};
use crate::generate::{generate_dataset, RunOptions};
use crate::layout::{Manifest, DATA_CONFIG_FILE};

pub const DEFAULT_REPETITIONS: u32 = 3;
pub const DEFAULT_DETECTIONS: &str = "{variant}/detections/rep{rep}";

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub name: String,
    #[serde(default)]
    pub generator: GeneratorPatch,
    pub repetitions: Option<u32>,
    /// Frozen backbone layers used for training; carried through as metadata.
    pub freeze: Option<i64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    /// Detector output directory per repetition; `{variant}` and `{rep}` are
    /// substituted. Relative paths resolve against `runs_dir`.
    pub detections: Option<String>,
    pub iou: Option<f64>,
    pub conf: Option<f64>,
    pub group_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub seed: u64,
    pub runs_dir: Option<PathBuf>,
    pub repetitions: Option<u32>,
    pub iou: Option<f64>,
    pub conf: Option<f64>,
    #[serde(default)]
    pub interpolation: Interpolation,
    pub group_by: Option<String>,
    /// Label directory of the shared test set.
    pub test_gt: Option<PathBuf>,
    /// Per-image tags of the test set (JSON).
    pub test_tags: Option<PathBuf>,
    pub class_names: Option<Vec<String>>,
    #[serde(default)]
    pub generator: GeneratorPatch,
    #[serde(default, rename = "variant")]
    pub variants: Vec<VariantSpec>,
    /// Directory relative paths resolve against; the spec file's directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Joins `p` onto `base` and folds `..` components lexically.
fn resolve(base: &Path, p: &Path) -> PathBuf {
    let joined = if p.is_relative() { base.join(p) } else { p.to_path_buf() };
    let mut out = PathBuf::new();
    for c in joined.components() {
        match c {
            Component::ParentDir if matches!(out.components().next_back(), Some(Component::Normal(_))) => {
                out.pop();
            }
            Component::CurDir => {}
            c => out.push(c),
        }
    }
    out
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        let mut spec: ExperimentSpec = toml::from_str(&text).map_err(|source| Error::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        spec.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for v in &self.variants {
            if v.name.is_empty() || v.name.contains(['/', '\\']) || v.name == "." || v.name == ".." {
                return Err(Error::Config(format!("invalid variant name `{}`", v.name)));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Config(format!("variant `{}` defined twice", v.name)));
            }
            if v.repetitions == Some(0) {
                return Err(Error::Config(format!("variant `{}`: repetitions must be at least 1", v.name)));
            }
        }
        if self.repetitions == Some(0) {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        for v in &self.variants {
            self.settings(v).validate().map_err(|e| Error::Config(format!("variant `{}`: {e}", v.name)))?;
        }
        Ok(())
    }

    pub fn runs_dir(&self) -> PathBuf {
        resolve(&self.base_dir, self.runs_dir.as_deref().unwrap_or(Path::new("runs")))
    }

    pub fn repetitions(&self, v: &VariantSpec) -> u32 {
        v.repetitions.or(self.repetitions).unwrap_or(DEFAULT_REPETITIONS)
    }

    pub fn settings(&self, v: &VariantSpec) -> EvalSettings {
        let d = EvalSettings::default();
        EvalSettings {
            iou_threshold: v.iou.or(self.iou).unwrap_or(d.iou_threshold),
            conf_threshold: v.conf.or(self.conf).unwrap_or(d.conf_threshold),
            interpolation: self.interpolation,
        }
    }

    pub fn group_by<'a>(&'a self, v: &'a VariantSpec) -> Option<&'a str> {
        v.group_by.as_deref().or(self.group_by.as_deref())
    }

    pub fn dataset_dir(&self, v: &VariantSpec) -> PathBuf {
        self.runs_dir().join(&v.name).join("dataset")
    }

    pub fn detections_dir(&self, v: &VariantSpec, rep: u32) -> PathBuf {
        self.detections_pattern(v, &rep.to_string())
    }

    fn detections_pattern(&self, v: &VariantSpec, rep: &str) -> PathBuf {
        let template = v.detections.as_deref().unwrap_or(DEFAULT_DETECTIONS);
        let expanded = template.replace("{variant}", &v.name).replace("{rep}", rep);
        resolve(&self.runs_dir(), Path::new(&expanded))
    }

    pub fn report_dir(&self, v: &VariantSpec) -> PathBuf {
        self.runs_dir().join(&v.name).join("report")
    }

    /// Generator config of a variant: variant fields over the shared
    /// `[generator]` table, with the variant's own seed.
    pub fn generator_config(&self, v: &VariantSpec) -> Result<GeneratorConfig> {
        let mut base = self.generator.clone();
        base.rebase(&self.base_dir);
        let mut top = v.generator.clone();
        top.rebase(&self.base_dir);
        let mut patch = top.over(base);
        patch.seed = Some(derive_variant_seed(self.seed, &v.name));
        patch.out = Some(self.dataset_dir(v));
        GeneratorConfig::from_patch(patch)
    }
}

fn variant_error(v: &VariantSpec, e: Error) -> Error {
    Error::Variant {
        variant: v.name.clone(),
        source: Box::new(e),
    }
}

/// The manual step between the two phases, as printed to the user.
pub fn external_contract(spec: &ExperimentSpec, v: &VariantSpec) -> String {
    let reps = spec.repetitions(v);
    format!(
        "variant {name}: train on {cfg}, then write one `<image_id>.txt` per test image \
         (lines `class cx cy w h confidence`, normalized) into {dir} for rep = 1..{reps}",
        name = v.name,
        cfg = spec.dataset_dir(v).join(DATA_CONFIG_FILE).display(),
        dir = spec.detections_pattern(v, "<rep>").display(),
    )
}

/// Generates every variant's dataset. Datasets are overwritten, since they
/// are fully determined by the spec.
pub fn run_generation_phase(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Vec<(String, Manifest)>> {
    let mut out = Vec::with_capacity(spec.variants.len());
    for v in &spec.variants {
        let cfg = spec.generator_config(v).map_err(|e| variant_error(v, e))?;
        let dir = spec.dataset_dir(v);
        log::info!("variant {}: generating into {}", v.name, dir.display());
        let manifest = generate_dataset(&cfg, &dir, &RunOptions { jobs, overwrite: true }).map_err(|e| variant_error(v, e))?;
        out.push((v.name.clone(), manifest));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub iou_threshold: f64,
    pub conf_threshold: f64,
    pub class_names: Vec<String>,
    pub group_key: Option<String>,
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn row(&self, variant: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }
}

struct TestSet {
    gt_dir: PathBuf,
    gt: BTreeMap<String, Vec<palmforge_core::GroundTruthAnnotation>>,
    tags: Tags,
}

impl TestSet {
    fn images_with(&self, det_dir: &Path) -> Result<Vec<EvalImage>> {
        let det = load_detection_dir(det_dir)?;
        let (images, overlap) = assemble(self.gt.clone(), det, &self.tags);
        if overlap == 0 && !self.gt.is_empty() {
            return Err(Error::NoOverlap {
                gt: self.gt_dir.clone(),
                det: det_dir.to_path_buf(),
            });
        }
        Ok(images)
    }
}

fn variant_metadata(spec: &ExperimentSpec, v: &VariantSpec) -> BTreeMap<String, String> {
    let mut meta = v.metadata.clone();
    if let Some(f) = v.freeze {
        meta.insert("freeze".into(), f.to_string());
    }
    if v.iou.is_some() || v.conf.is_some() {
        let s = spec.settings(v);
        meta.insert("iou".into(), s.iou_threshold.to_string());
        meta.insert("conf".into(), s.conf_threshold.to_string());
    }
    if let Some(g) = &v.group_by {
        meta.insert("group_by".into(), g.clone());
    }
    meta
}

fn evaluate_variant(spec: &ExperimentSpec, test: &TestSet, v: &VariantSpec) -> Result<SummaryRow> {
    let reps = spec.repetitions(v);
    let settings = spec.settings(v);
    let report_dir = spec.report_dir(v);
    let mut results = Vec::new();
    let mut missing = Vec::new();
    for rep in 1..=reps {
        let dir = spec.detections_dir(v, rep);
        if !dir.is_dir() {
            log::warn!("variant {}: repetition {rep} has no detections at {}", v.name, dir.display());
            missing.push(rep);
            continue;
        }
        let images = match test.images_with(&dir) {
            Ok(images) => images,
            Err(e) => {
                log::warn!("variant {}: repetition {rep} skipped: {e}", v.name);
                missing.push(rep);
                continue;
            }
        };
        let mut report = evaluate(&images, &settings).map_err(|e| variant_error(v, e.into()))?;
        if let Some(key) = spec.group_by(v) {
            report = report.with_groups(&images, key, &settings);
        }
        fs::create_dir_all(&report_dir).at(&report_dir)?;
        write_json(&report_dir.join(format!("rep{rep}.json")), &report)?;
        results.push(RepetitionResult::from_report(rep, &report));
    }
    Ok(SummaryRow::new(v.name.clone(), reps, results, missing, variant_metadata(spec, v)))
}

fn summary_class_names(spec: &ExperimentSpec, test_gt: Option<&Path>) -> Vec<String> {
    if let Some(names) = &spec.class_names {
        return names.clone();
    }
    if let Some(names) = spec.generator.classes.clone() {
        return names;
    }
    test_gt.and_then(discover_class_names).unwrap_or_default()
}

/// Evaluates every repetition of every variant against the shared test set
/// and writes `summary.csv`, `summary.json` and `charts/`.
pub fn run_evaluation_phase(spec: &ExperimentSpec) -> Result<Summary> {
    let test_gt = spec.test_gt.as_deref().map(|p| resolve(&spec.base_dir, p));
    let class_names = summary_class_names(spec, test_gt.as_deref());
    let mut rows = Vec::with_capacity(spec.variants.len());
    if !spec.variants.is_empty() {
        let gt_dir = test_gt.ok_or_else(|| Error::Config("missing required field `test_gt`".into()))?;
        let test = TestSet {
            gt: load_label_dir(&gt_dir)?,
            gt_dir,
            tags: match &spec.test_tags {
                Some(p) => load_tags(&resolve(&spec.base_dir, p))?,
                None => Tags::new(),
            },
        };
        for v in &spec.variants {
            rows.push(evaluate_variant(spec, &test, v)?);
        }
    }
    let d = EvalSettings::default();
    let summary = Summary {
        iou_threshold: spec.iou.unwrap_or(d.iou_threshold),
        conf_threshold: spec.conf.unwrap_or(d.conf_threshold),
        class_names,
        group_key: spec.group_by.clone(),
        rows,
    };
    write_summary(&spec.runs_dir(), &summary)?;
    Ok(summary)
}

pub fn write_summary(runs_dir: &Path, summary: &Summary) -> Result<()> {
    fs::create_dir_all(runs_dir).at(runs_dir)?;
    let csv = runs_dir.join("summary.csv");
    fs::write(&csv, summary_csv(summary)).at(&csv)?;
    write_json(&runs_dir.join("summary.json"), summary)?;
    if !summary.rows.is_empty() {
        write_charts(summary, &runs_dir.join("charts"))?;
    }
    Ok(())
}

fn summary_classes(summary: &Summary) -> BTreeSet<u32> {
    summary
        .rows
        .iter()
        .flat_map(|r| r.results.iter().flat_map(|x| x.class_aps.keys().copied()))
        .collect()
}

/// One line per (variant, repetition); missing repetitions have empty cells.
pub fn summary_csv(summary: &Summary) -> String {
    let classes = summary_classes(summary);
    let mut out = String::from("variant,rep,mAP");
    for &c in &classes {
        let _ = write!(out, ",ap_{}", class_name(&summary.class_names, c));
    }
    out.push_str(",tp,fp,fn\n");
    for row in &summary.rows {
        for rep in 1..=row.repetitions {
            let _ = write!(out, "{},{rep}", row.variant);
            match row.results.iter().find(|r| r.rep == rep) {
                Some(r) => {
                    let _ = write!(out, ",{:.6}", r.map);
                    for c in &classes {
                        match r.class_aps.get(c) {
                            Some(ap) => {
                                let _ = write!(out, ",{ap:.6}");
                            }
                            None => out.push(','),
                        }
                    }
                    let _ = writeln!(out, ",{},{},{}", r.tp, r.fp, r.fn_);
                }
                None => {
                    out.push_str(&",".repeat(classes.len() + 4));
                    out.push('\n');
                }
            }
        }
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Human-readable min/mean/max table.
pub fn render_summary(summary: &Summary) -> String {
    let mut out = format!(
        "{:<20} {:>5} {:>8} {:>8} {:>8}  {}\n",
        "variant", "reps", "min", "mean", "max", "notes"
    );
    for r in &summary.rows {
        let note = if r.incomplete {
            let missing: Vec<String> = r.missing.iter().map(u32::to_string).collect();
            format!("incomplete (missing rep {})", missing.join(", "))
        } else {
            String::new()
        };
        let _ = writeln!(
            out,
            "{:<20} {:>5} {:>8} {:>8} {:>8}  {}",
            r.variant,
            format!("{}/{}", r.results.len(), r.repetitions),
            fmt_opt(r.min_map),
            fmt_opt(r.mean_map),
            fmt_opt(r.max_map),
            note
        );
    }
    out
}

pub fn load_summary(path: &Path) -> Result<Summary> {
    let text = fs::read_to_string(path).at(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
