use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::iou::iou;
use crate::bbox::BBox;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub confidence: f64,
}

/// Ground truth and detections of a single class in one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassImage<'a> {
    pub image_id: &'a str,
    pub truths: Vec<BBox>,
    pub detections: Vec<ScoredBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MatchFlag {
    TruePositive,
    FalsePositive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedDetection {
    /// Index into the input image list.
    pub image: usize,
    /// Index into that image's detections.
    pub detection: usize,
    pub confidence: f64,
    pub flag: MatchFlag,
    pub matched_truth: Option<usize>,
}

impl RankedDetection {
    #[inline]
    pub fn is_tp(&self) -> bool {
        self.flag == MatchFlag::TruePositive
    }
}

/// Result of greedy matching for one class across a set of images.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchOutcome {
    /// All detections in rank order (descending confidence).
    pub ranked: Vec<RankedDetection>,
    /// Unmatched ground truth per input image.
    pub false_negatives: Vec<usize>,
    pub n_gt: usize,
}

impl MatchOutcome {
    pub fn true_positives(&self) -> usize {
        self.ranked.iter().filter(|d| d.is_tp()).count()
    }

    pub fn false_positives(&self) -> usize {
        self.ranked.len() - self.true_positives()
    }

    pub fn false_negative_total(&self) -> usize {
        self.false_negatives.iter().sum()
    }

    /// `(tp, fp, fn)` counting only detections with confidence >= `theta`.
    ///
    /// Those detections form a prefix of the ranking, so their matches are the
    /// same as in the full run.
    pub fn counts_at(&self, theta: f64) -> (usize, usize, usize) {
        let kept = self.ranked.iter().take_while(|d| d.confidence >= theta);
        let (mut tp, mut fp) = (0, 0);
        for d in kept {
            if d.is_tp() {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        (tp, fp, self.n_gt - tp)
    }
}

/// Greedy confidence-ordered matching at IoU threshold `iou_threshold`.
///
/// Detections are visited by descending confidence; ties go to the
/// lexicographically smaller image id, then to input order. Each detection
/// claims the still-unmatched truth of its own image with the highest IoU
/// (lowest index on ties) if that IoU reaches the threshold, otherwise it is a
/// false positive.
pub fn match_detections(images: &[ClassImage<'_>], iou_threshold: f64) -> MatchOutcome {
    let mut order: Vec<(usize, usize)> = images
        .iter()
        .enumerate()
        .flat_map(|(i, img)| (0..img.detections.len()).map(move |d| (i, d)))
        .collect();
    order.sort_by(|&(ia, da), &(ib, db)| {
        let ca = images[ia].detections[da].confidence;
        let cb = images[ib].detections[db].confidence;
        cb.partial_cmp(&ca)
            .unwrap_or(Ordering::Equal)
            .then_with(|| images[ia].image_id.cmp(images[ib].image_id))
            .then_with(|| ia.cmp(&ib))
            .then_with(|| da.cmp(&db))
    });

    let mut claimed: Vec<Vec<bool>> = images.iter().map(|img| vec![false; img.truths.len()]).collect();
    let mut ranked = Vec::with_capacity(order.len());
    for (image, detection) in order {
        let det = &images[image].detections[detection];
        let mut best: Option<(usize, f64)> = None;
        for (t, truth) in images[image].truths.iter().enumerate() {
            if claimed[image][t] {
                continue;
            }
            let v = iou(&det.bbox, truth);
            if v >= iou_threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((t, v));
            }
        }
        let (flag, matched_truth) = match best {
            Some((t, _)) => {
                claimed[image][t] = true;
                (MatchFlag::TruePositive, Some(t))
            }
            None => (MatchFlag::FalsePositive, None),
        };
        ranked.push(RankedDetection {
            image,
            detection,
            confidence: det.confidence,
            flag,
            matched_truth,
        });
    }

    let false_negatives = claimed.iter().map(|c| c.iter().filter(|m| !**m).count()).collect();
    MatchOutcome {
        ranked,
        false_negatives,
        n_gt: images.iter().map(|i| i.truths.len()).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::from_corners(x0, y0, x1, y1).unwrap()
    }

    fn det(bbox: BBox, confidence: f64) -> ScoredBox {
        ScoredBox { bbox, confidence }
    }

    #[test]
    fn perfect_detector() {
        let truths = vec![b(0.1, 0.1, 0.2, 0.2), b(0.5, 0.5, 0.7, 0.6), b(0.8, 0.1, 0.9, 0.3)];
        let detections = truths.iter().map(|t| det(*t, 1.0)).collect();
        let img = ClassImage { image_id: "a", truths, detections };
        let m = match_detections(&[img], 0.5);
        assert_eq!(m.true_positives(), 3);
        assert_eq!(m.false_negative_total(), 0);
        for r in &m.ranked {
            assert_eq!(r.matched_truth, Some(r.detection));
        }
    }

    #[test]
    fn no_detections() {
        let img = ClassImage {
            image_id: "a",
            truths: vec![b(0.1, 0.1, 0.2, 0.2), b(0.3, 0.3, 0.4, 0.4), b(0.5, 0.5, 0.6, 0.6)],
            detections: vec![],
        };
        let m = match_detections(&[img], 0.5);
        assert_eq!(m.false_negatives, vec![3]);
        assert!(m.ranked.is_empty());
    }

    /// Every injective assignment of detections to truths, scored by the
    /// number of pairs reaching the threshold, visiting in confidence order.
    fn brute_force_best_tp(dets: &[ScoredBox], truths: &[BBox], tau: f64) -> usize {
        fn go(d: usize, dets: &[ScoredBox], truths: &[BBox], used: &mut Vec<bool>, tau: f64) -> usize {
            if d == dets.len() {
                return 0;
            }
            let mut best = go(d + 1, dets, truths, used, tau);
            for t in 0..truths.len() {
                if !used[t] && iou(&dets[d].bbox, &truths[t]) >= tau {
                    used[t] = true;
                    best = best.max(1 + go(d + 1, dets, truths, used, tau));
                    used[t] = false;
                }
            }
            best
        }
        go(0, dets, truths, &mut vec![false; truths.len()], tau)
    }

    #[test]
    fn duplicate_detections_of_one_object() {
        // Both detections overlap the truth at IoU 0.9.
        let truth = b(0.0, 0.0, 0.5, 0.5);
        let d1 = det(b(0.0, 0.0, 0.5, 0.45), 0.9);
        let d2 = det(b(0.0, 0.05, 0.5, 0.5), 0.8);
        assert!((iou(&d1.bbox, &truth) - 0.9).abs() < 1e-12);
        assert!((iou(&d2.bbox, &truth) - 0.9).abs() < 1e-12);
        let img = ClassImage { image_id: "a", truths: vec![truth], detections: vec![d2, d1] };
        let m = match_detections(core::slice::from_ref(&img), 0.5);
        assert_eq!(m.ranked[0].confidence, 0.9);
        assert_eq!(m.ranked[0].flag, MatchFlag::TruePositive);
        assert_eq!(m.ranked[1].flag, MatchFlag::FalsePositive);
        assert_eq!(m.true_positives(), brute_force_best_tp(&img.detections, &img.truths, 0.5));
    }

    #[test]
    fn picks_highest_iou_unmatched_truth() {
        let t0 = b(0.0, 0.0, 0.4, 0.4);
        let t1 = b(0.05, 0.0, 0.45, 0.4);
        let d = det(b(0.05, 0.0, 0.45, 0.4), 0.7);
        let img = ClassImage { image_id: "a", truths: vec![t0, t1], detections: vec![d] };
        let m = match_detections(&[img], 0.5);
        assert_eq!(m.ranked[0].matched_truth, Some(1));
        assert_eq!(m.false_negatives, vec![1]);
    }

    #[test]
    fn iou_ties_go_to_lowest_truth_index() {
        let t = b(0.2, 0.2, 0.4, 0.4);
        let img = ClassImage { image_id: "a", truths: vec![t, t], detections: vec![det(t, 0.5), det(t, 0.5)] };
        let m = match_detections(&[img], 0.5);
        assert_eq!(m.ranked[0].matched_truth, Some(0));
        assert_eq!(m.ranked[1].matched_truth, Some(1));
    }

    #[test]
    fn confidence_ties_ordered_by_image_id() {
        let t = b(0.2, 0.2, 0.4, 0.4);
        let imgs = [
            ClassImage { image_id: "b", truths: vec![t], detections: vec![det(t, 0.5)] },
            ClassImage { image_id: "a", truths: vec![t], detections: vec![det(t, 0.5)] },
        ];
        let m = match_detections(&imgs, 0.5);
        assert_eq!(m.ranked[0].image, 1);
        assert_eq!(m.ranked[1].image, 0);
    }

    #[test]
    fn never_matches_across_images() {
        let t = b(0.2, 0.2, 0.4, 0.4);
        let imgs = [
            ClassImage { image_id: "a", truths: vec![t], detections: vec![] },
            ClassImage { image_id: "b", truths: vec![], detections: vec![det(t, 0.9)] },
        ];
        let m = match_detections(&imgs, 0.5);
        assert_eq!(m.false_positives(), 1);
        assert_eq!(m.false_negatives, vec![1, 0]);
    }

    #[test]
    fn conservation_and_threshold_counts() {
        let t = b(0.2, 0.2, 0.4, 0.4);
        let far = b(0.7, 0.7, 0.8, 0.8);
        let img = ClassImage {
            image_id: "a",
            truths: vec![t, far],
            detections: vec![det(t, 0.9), det(b(0.0, 0.0, 0.1, 0.1), 0.65), det(far, 0.3)],
        };
        let m = match_detections(&[img], 0.5);
        assert_eq!(m.true_positives() + m.false_positives(), 3);
        assert_eq!(m.true_positives() + m.false_negative_total(), 2);
        assert_eq!(m.counts_at(0.6), (1, 1, 1));
        assert_eq!(m.counts_at(0.0), (2, 1, 0));
        assert_eq!(m.counts_at(1.0), (0, 0, 2));
    }
}
