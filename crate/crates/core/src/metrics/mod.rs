//! Detection metrics: IoU, greedy matching, precision-recall curves, AP,
//! mAP and thresholded counting.
//!
//! Matching is per class and per image: a detection is only ever paired with
//! ground truth from its own image.

mod ap;
mod count;
mod iou;
mod matching;
mod report;

pub use ap::{average_precision, pr_curve, Interpolation, PrCurve, PrPoint};
pub use count::{count_report, ClassCount, CountReport, ImageCount};
pub use iou::iou;
pub use matching::{match_detections, ClassImage, MatchFlag, MatchOutcome, RankedDetection, ScoredBox};
pub use report::{
    evaluate, evaluate_class, group_by_tag, map_at, ClassReport, EvalImage, EvalReport, EvalSettings, GroupReport,
    UNTAGGED,
};

/// IoU threshold used for mAP@.5.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
/// Report confidence threshold for counting and TP/FP/FN totals.
pub const DEFAULT_CONF_THRESHOLD: f64 = 0.6;
/// Stricter alternative report threshold.
pub const STRICT_CONF_THRESHOLD: f64 = 0.71;
