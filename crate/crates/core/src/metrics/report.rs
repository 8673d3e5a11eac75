use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::ap::{average_precision, Interpolation, PrCurve};
use super::matching::{match_detections, ClassImage, ScoredBox};
use super::{DEFAULT_CONF_THRESHOLD, DEFAULT_IOU_THRESHOLD};
use crate::label::{Detection, GroundTruthAnnotation};
use crate::{Error, Result};

/// Tag value for images that do not carry the grouping key.
pub const UNTAGGED: &str = "untagged";

/// Everything known about one test image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalImage {
    pub image_id: String,
    pub tags: BTreeMap<String, String>,
    pub truths: Vec<GroundTruthAnnotation>,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalSettings {
    pub iou_threshold: f64,
    /// Confidence cut for the TP/FP/FN totals. AP always sweeps every detection.
    pub conf_threshold: f64,
    pub interpolation: Interpolation,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            interpolation: Interpolation::AllPoint,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        for t in [self.iou_threshold, self.conf_threshold] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidThreshold(t));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassReport {
    pub class_id: u32,
    pub n_gt: usize,
    pub n_det: usize,
    /// `None` when the class has no ground truth; such classes are left out of mAP.
    pub ap: Option<f64>,
    pub no_ground_truth: bool,
    pub tp: usize,
    pub fp: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub curve: PrCurve,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupReport {
    pub image_count: usize,
    pub n_gt: usize,
    /// `None` when no class in the group has ground truth.
    pub report: Option<EvalReport>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub conf_threshold: f64,
    pub interpolation: Interpolation,
    pub n_images: usize,
    /// Number of classes averaged into `map`.
    pub n_classes: usize,
    pub map: f64,
    pub classes: Vec<ClassReport>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub group_key: Option<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "BTreeMap::is_empty"))]
    pub groups: BTreeMap<String, GroupReport>,
}

impl EvalReport {
    pub fn class(&self, class_id: u32) -> Option<&ClassReport> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }

    /// Evaluable classes' APs in class order.
    pub fn class_aps(&self) -> BTreeMap<u32, f64> {
        self.classes.iter().filter_map(|c| c.ap.map(|ap| (c.class_id, ap))).collect()
    }

    pub fn totals(&self) -> (usize, usize, usize) {
        self.classes
            .iter()
            .fold((0, 0, 0), |(tp, fp, fn_), c| (tp + c.tp, fp + c.fp, fn_ + c.fn_))
    }

    /// Attaches per-tag sub-reports computed over `images`.
    pub fn with_groups(mut self, images: &[EvalImage], key: &str, settings: &EvalSettings) -> Self {
        self.groups = group_by_tag(images, key, settings);
        self.group_key = Some(key.into());
        self
    }
}

/// Matches, sweeps and scores a single class over all images.
pub fn evaluate_class(images: &[EvalImage], class_id: u32, settings: &EvalSettings) -> ClassReport {
    let class_images: Vec<ClassImage<'_>> = images
        .iter()
        .map(|img| ClassImage {
            image_id: &img.image_id,
            truths: img.truths.iter().filter(|t| t.class_id == class_id).map(|t| t.bbox).collect(),
            detections: img
                .detections
                .iter()
                .filter(|d| d.class_id == class_id)
                .map(|d| ScoredBox {
                    bbox: d.bbox,
                    confidence: d.confidence(),
                })
                .collect(),
        })
        .collect();
    let outcome = match_detections(&class_images, settings.iou_threshold);
    let (tp, fp, fn_) = outcome.counts_at(settings.conf_threshold);
    let (ap, curve) = match average_precision(&outcome, settings.interpolation) {
        Ok((ap, curve)) => (Some(ap), curve),
        Err(_) => (None, PrCurve::default()),
    };
    ClassReport {
        class_id,
        n_gt: outcome.n_gt,
        n_det: outcome.ranked.len(),
        ap,
        no_ground_truth: outcome.n_gt == 0,
        tp,
        fp,
        fn_,
        curve,
    }
}

/// Combines per-class results: mAP is the plain mean of AP over classes with
/// ground truth.
pub fn map_at(classes: Vec<ClassReport>, settings: &EvalSettings, n_images: usize) -> Result<EvalReport> {
    let aps: Vec<f64> = classes.iter().filter_map(|c| c.ap).collect();
    if aps.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let map = aps.iter().fold(0.0, |acc, ap| acc + ap) / aps.len() as f64;
    Ok(EvalReport {
        iou_threshold: settings.iou_threshold,
        conf_threshold: settings.conf_threshold,
        interpolation: settings.interpolation,
        n_images,
        n_classes: aps.len(),
        map,
        classes,
        group_key: None,
        groups: BTreeMap::new(),
    })
}

fn class_ids(images: &[EvalImage]) -> BTreeSet<u32> {
    images
        .iter()
        .flat_map(|i| {
            i.truths
                .iter()
                .map(|t| t.class_id)
                .chain(i.detections.iter().map(|d| d.class_id))
        })
        .collect()
}

/// Full evaluation over every class seen in truths or detections.
pub fn evaluate(images: &[EvalImage], settings: &EvalSettings) -> Result<EvalReport> {
    settings.validate()?;
    let classes = class_ids(images)
        .into_iter()
        .map(|c| evaluate_class(images, c, settings))
        .collect();
    map_at(classes, settings, images.len())
}

/// Independent evaluation per value of tag `key`; images without the tag
/// fall into [`UNTAGGED`].
pub fn group_by_tag(images: &[EvalImage], key: &str, settings: &EvalSettings) -> BTreeMap<String, GroupReport> {
    let mut groups: BTreeMap<String, Vec<EvalImage>> = BTreeMap::new();
    for img in images {
        let value = img.tags.get(key).map_or(UNTAGGED, String::as_str);
        groups.entry(value.into()).or_default().push(img.clone());
    }
    groups
        .into_iter()
        .map(|(value, imgs)| {
            let group = GroupReport {
                image_count: imgs.len(),
                n_gt: imgs.iter().map(|i| i.truths.len()).sum(),
                report: evaluate(&imgs, settings).ok(),
            };
            (value, group)
        })
        .collect()
}
