use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::report::EvalImage;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassCount {
    /// Detections at or above the confidence threshold.
    pub predicted: usize,
    /// Ground-truth objects, when truths were supplied.
    pub labeled: Option<usize>,
}

impl ClassCount {
    pub fn delta(&self) -> Option<i64> {
        self.labeled.map(|l| self.predicted as i64 - l as i64)
    }

    /// `predicted 199 / labeled 187`, or just `predicted 199` without truths.
    pub fn ratio_line(&self) -> String {
        match self.labeled {
            Some(l) => format!("predicted {} / labeled {}", self.predicted, l),
            None => format!("predicted {}", self.predicted),
        }
    }

    /// `<name>: predicted 199, labeled 187, delta +12`.
    pub fn summary_line(&self, name: &str) -> String {
        match (self.labeled, self.delta()) {
            (Some(l), Some(d)) => format!("{name}: predicted {}, labeled {l}, delta {d:+}", self.predicted),
            _ => format!("{name}: predicted {}", self.predicted),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImageCount {
    pub image_id: String,
    pub per_class: BTreeMap<u32, ClassCount>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountReport {
    pub conf_threshold: f64,
    pub per_class: BTreeMap<u32, ClassCount>,
    pub per_image: Vec<ImageCount>,
}

impl CountReport {
    pub fn predicted(&self, class_id: u32) -> usize {
        self.per_class.get(&class_id).map_or(0, |c| c.predicted)
    }
}

/// Counts detections with confidence >= `conf_threshold` per class, per image
/// and in total. With `with_truth`, ground-truth totals are paired in.
pub fn count_report(images: &[EvalImage], conf_threshold: f64, with_truth: bool) -> Result<CountReport> {
    if !(0.0..=1.0).contains(&conf_threshold) {
        return Err(Error::InvalidThreshold(conf_threshold));
    }
    let mut per_class: BTreeMap<u32, ClassCount> = BTreeMap::new();
    let mut per_image = Vec::with_capacity(images.len());
    for img in images {
        let mut counts: BTreeMap<u32, ClassCount> = BTreeMap::new();
        for d in img.detections.iter().filter(|d| d.confidence() >= conf_threshold) {
            counts.entry(d.class_id).or_default().predicted += 1;
        }
        if with_truth {
            for t in &img.truths {
                *counts.entry(t.class_id).or_default().labeled.get_or_insert(0) += 1;
            }
            for c in counts.values_mut() {
                c.labeled.get_or_insert(0);
            }
        }
        for (&class_id, c) in &counts {
            let total = per_class.entry(class_id).or_default();
            total.predicted += c.predicted;
            if let Some(l) = c.labeled {
                *total.labeled.get_or_insert(0) += l;
            }
        }
        per_image.push(ImageCount {
            image_id: img.image_id.clone(),
            per_class: counts,
        });
    }
    Ok(CountReport {
        conf_threshold,
        per_class,
        per_image,
    })
}
