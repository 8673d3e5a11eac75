use alloc::vec::Vec;

use super::matching::MatchOutcome;
use crate::{Error, Result};

/// How the area under the precision-recall curve is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Interpolation {
    /// Every recall step weighted by the best precision at or beyond it.
    #[default]
    AllPoint,
    /// Legacy mean of the interpolated precision at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

impl Interpolation {
    pub fn as_str(self) -> &'static str {
        match self {
            Interpolation::AllPoint => "all-point",
            Interpolation::ElevenPoint => "eleven-point",
        }
    }
}

/// One rank of the confidence sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrPoint {
    /// 1-based rank.
    pub rank: usize,
    pub confidence: f64,
    pub true_positive: bool,
    /// True positives among the first `rank` detections.
    pub tp: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub n_gt: usize,
    pub n_det: usize,
}

/// Builds the PR curve from `(confidence, is_tp)` pairs already in rank order.
pub fn pr_curve(ranked: impl IntoIterator<Item = (f64, bool)>, n_gt: usize) -> Result<PrCurve> {
    let mut points = Vec::new();
    let mut tp = 0usize;
    for (i, (confidence, is_tp)) in ranked.into_iter().enumerate() {
        let rank = i + 1;
        tp += is_tp as usize;
        points.push(PrPoint {
            rank,
            confidence,
            true_positive: is_tp,
            tp,
            precision: tp as f64 / rank as f64,
            recall: if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 },
        });
    }
    if n_gt == 0 {
        return Err(Error::NoGroundTruth { class_id: u32::MAX });
    }
    if tp > n_gt {
        return Err(Error::InvalidConfig(alloc::format!("{tp} true positives exceed {n_gt} ground truths")));
    }
    let n_det = points.len();
    Ok(PrCurve { points, n_gt, n_det })
}

impl PrCurve {
    pub fn average_precision(&self, interpolation: Interpolation) -> f64 {
        match interpolation {
            Interpolation::AllPoint => self.all_point(),
            Interpolation::ElevenPoint => self.eleven_point(),
        }
    }

    /// Precision envelope: best precision at each rank or any later one.
    fn envelope(&self) -> Vec<f64> {
        let mut env: Vec<f64> = self.points.iter().map(|p| p.precision).collect();
        for i in (0..env.len().saturating_sub(1)).rev() {
            if env[i + 1] > env[i] {
                env[i] = env[i + 1];
            }
        }
        env
    }

    fn all_point(&self) -> f64 {
        // Recall rises by exactly 1/n_gt at every true positive, so the area
        // is the envelope summed over TP ranks divided once by n_gt.
        let env = self.envelope();
        let area: f64 = self
            .points
            .iter()
            .zip(&env)
            .filter(|(p, _)| p.true_positive)
            .map(|(_, e)| *e)
            // fold from +0.0: an empty f64 sum is -0.0
            .fold(0.0, |acc, e| acc + e);
        area / self.n_gt as f64
    }

    fn eleven_point(&self) -> f64 {
        let env = self.envelope();
        let mut total = 0.0;
        for t in 0..=10usize {
            // first rank whose recall reaches t/10, compared exactly in integers
            let p = self
                .points
                .iter()
                .position(|p| p.tp * 10 >= t * self.n_gt)
                .map_or(0.0, |i| env[i]);
            total += p;
        }
        total / 11.0
    }
}

/// AP and PR curve of one class's match outcome.
pub fn average_precision(outcome: &MatchOutcome, interpolation: Interpolation) -> Result<(f64, PrCurve)> {
    let curve = pr_curve(outcome.ranked.iter().map(|d| (d.confidence, d.is_tp())), outcome.n_gt)?;
    Ok((curve.average_precision(interpolation), curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(flags: &[bool], n_gt: usize) -> PrCurve {
        let n = flags.len();
        pr_curve(flags.iter().enumerate().map(|(i, &f)| (1.0 - i as f64 / (n + 1) as f64, f)), n_gt).unwrap()
    }

    #[test]
    fn perfect_detector_is_exactly_one() {
        for n in 1..50 {
            let c = curve(&alloc::vec![true; n], n);
            assert_eq!(c.average_precision(Interpolation::AllPoint), 1.0);
            assert_eq!(c.average_precision(Interpolation::ElevenPoint), 1.0);
        }
    }

    #[test]
    fn hand_traced_tp_fp_tp() {
        let c = curve(&[true, false, true], 2);
        let pr: Vec<(f64, f64)> = c.points.iter().map(|p| (p.recall, p.precision)).collect();
        assert_eq!(pr[0], (0.5, 1.0));
        assert_eq!(pr[1], (0.5, 0.5));
        assert_eq!(pr[2], (1.0, 2.0 / 3.0));
        let ap = c.average_precision(Interpolation::AllPoint);
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn all_false_positives_score_zero() {
        let c = curve(&[false, false, false], 4);
        assert_eq!(c.average_precision(Interpolation::AllPoint), 0.0);
        assert_eq!(c.average_precision(Interpolation::ElevenPoint), 0.0);
        let empty = curve(&[], 3);
        assert_eq!(empty.average_precision(Interpolation::AllPoint), 0.0);
    }

    #[test]
    fn eleven_point_hand_value() {
        // recall 0.5 at precision 1, then recall 1.0 at precision 2/3:
        // t = 0..=5 -> 1.0, t = 6..=10 -> 2/3
        let c = curve(&[true, false, true], 2);
        let want = (6.0 * 1.0 + 5.0 * (2.0 / 3.0)) / 11.0;
        assert!((c.average_precision(Interpolation::ElevenPoint) - want).abs() < 1e-15);
    }

    #[test]
    fn no_ground_truth_is_an_error() {
        assert!(matches!(pr_curve([(0.9, false)], 0), Err(Error::NoGroundTruth { .. })));
    }

    #[test]
    fn recall_is_monotone() {
        let c = curve(&[false, true, true, false, true, false], 5);
        for w in c.points.windows(2) {
            assert!(w[0].recall <= w[1].recall);
        }
        assert!(c.points.iter().all(|p| (0.0..=1.0).contains(&p.precision)));
    }
}
