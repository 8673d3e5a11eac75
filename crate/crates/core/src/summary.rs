//! Aggregation of repeated evaluations into one summary row per variant.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::metrics::EvalReport;

/// Scores of one repetition (one set of detector outputs).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RepetitionResult {
    pub rep: u32,
    pub map: f64,
    pub class_aps: BTreeMap<u32, f64>,
    pub tp: usize,
    pub fp: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
    /// mAP per tag group, for groups with ground truth.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "BTreeMap::is_empty"))]
    pub group_maps: BTreeMap<String, f64>,
}

impl RepetitionResult {
    pub fn from_report(rep: u32, report: &EvalReport) -> Self {
        let (tp, fp, fn_) = report.totals();
        Self {
            rep,
            map: report.map,
            class_aps: report.class_aps(),
            tp,
            fp,
            fn_,
            group_maps: report
                .groups
                .iter()
                .filter_map(|(k, g)| g.report.as_ref().map(|r| (k.clone(), r.map)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

/// Min, mean and max of a non-empty list. The mean is formed as an offset from
/// the minimum, so identical values give exactly that value back.
pub fn min_mean_max(values: &[f64]) -> Option<(f64, f64, f64)> {
    let first = *values.first()?;
    let (min, max) = values
        .iter()
        .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let offset: f64 = values.iter().fold(0.0, |acc, v| acc + (v - min)) / values.len() as f64;
    Some((min, (min + offset).clamp(min, max), max))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SummaryRow {
    pub variant: String,
    pub repetitions: u32,
    /// mAP of every repetition that had results, in repetition order.
    pub maps: Vec<f64>,
    pub min_map: Option<f64>,
    pub mean_map: Option<f64>,
    pub max_map: Option<f64>,
    pub class_ap_ranges: BTreeMap<u32, Range>,
    pub tp: usize,
    pub fp: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
    /// Repetitions whose detector output was missing or unreadable.
    pub missing: Vec<u32>,
    pub incomplete: bool,
    pub results: Vec<RepetitionResult>,
    /// Opaque variant metadata carried through (e.g. `freeze`).
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "BTreeMap::is_empty"))]
    pub metadata: BTreeMap<String, String>,
}

impl SummaryRow {
    pub fn new(
        variant: impl Into<String>,
        repetitions: u32,
        mut results: Vec<RepetitionResult>,
        mut missing: Vec<u32>,
        metadata: BTreeMap<String, String>,
    ) -> Self {
        results.sort_by_key(|r| r.rep);
        missing.sort_unstable();
        let maps: Vec<f64> = results.iter().map(|r| r.map).collect();
        let mmm = min_mean_max(&maps);

        let mut per_class: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for r in &results {
            for (&c, &ap) in &r.class_aps {
                per_class.entry(c).or_default().push(ap);
            }
        }
        let class_ap_ranges = per_class
            .into_iter()
            .filter_map(|(c, aps)| min_mean_max(&aps).map(|(min, _, max)| (c, Range { min, max })))
            .collect();

        let (tp, fp, fn_) = results
            .iter()
            .fold((0, 0, 0), |(a, b, c), r| (a + r.tp, b + r.fp, c + r.fn_));
        let incomplete = !missing.is_empty() || (results.len() as u32) < repetitions;
        Self {
            variant: variant.into(),
            repetitions,
            maps,
            min_map: mmm.map(|m| m.0),
            mean_map: mmm.map(|m| m.1),
            max_map: mmm.map(|m| m.2),
            class_ap_ranges,
            tp,
            fp,
            fn_,
            missing,
            incomplete,
            results,
            metadata,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rep(rep: u32, map: f64) -> RepetitionResult {
        RepetitionResult {
            rep,
            map,
            class_aps: [(0, map)].into_iter().collect(),
            tp: 1,
            fp: 2,
            fn_: 3,
            group_maps: BTreeMap::new(),
        }
    }

    #[test]
    fn identical_repetitions_collapse() {
        let row = SummaryRow::new("baseline", 3, vec![rep(1, 0.65), rep(2, 0.65), rep(3, 0.65)], vec![], BTreeMap::new());
        assert_eq!(row.min_map, Some(0.65));
        assert_eq!(row.mean_map, Some(0.65));
        assert_eq!(row.max_map, Some(0.65));
        assert!(!row.incomplete);
        assert_eq!((row.tp, row.fp, row.fn_), (3, 6, 9));
    }

    #[test]
    fn ordering_and_ranges() {
        let row = SummaryRow::new("v", 3, vec![rep(3, 0.8), rep(1, 0.7)], vec![2], BTreeMap::new());
        assert_eq!(row.maps, vec![0.7, 0.8]);
        assert!(row.incomplete);
        let (lo, mean, hi) = (row.min_map.unwrap(), row.mean_map.unwrap(), row.max_map.unwrap());
        assert!(lo <= mean && mean <= hi);
        assert!((mean - 0.75).abs() < 1e-15);
        assert_eq!(row.class_ap_ranges[&0], Range { min: 0.7, max: 0.8 });
    }

    #[test]
    fn empty_row() {
        let row = SummaryRow::new("v", 3, vec![], vec![1, 2, 3], BTreeMap::new());
        assert_eq!(row.min_map, None);
        assert!(row.incomplete);
    }
}
