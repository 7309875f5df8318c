use std::cmp::Ordering;

use crate::error::Result;
use crate::model::{proposal_order, Proposal};
use crate::nn::Interval;
use crate::synth::Segment;

/// THUMOS-style tIoU thresholds.
pub const DEFAULT_THRESHOLDS: [f64; 5] = [0.3, 0.4, 0.5, 0.6, 0.7];

/// Predictions and annotations of one video.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VideoDetections {
    pub proposals: Vec<Proposal>,
    pub gt: Vec<Segment>,
}

/// `|a ∩ b| / |a ∪ b|`; zero-length intervals are an error.
pub fn tiou(a: Interval, b: Interval) -> Result<f64> {
    a.ensure_valid("interval")?;
    b.ensure_valid("interval")?;
    Ok(a.iou(&b))
}

fn segment_interval(s: &Segment) -> Interval {
    Interval::new(s.start as f64, s.end as f64)
}

/// Average precision of `class` over a whole corpus at one tIoU threshold.
///
/// Proposals are visited by descending score; each is a true positive when an
/// unmatched same-class ground truth in its video reaches the threshold (the
/// best-overlapping one is consumed). AP is the area under the precision
/// envelope (all-points interpolation). `None` when the class has no ground
/// truth.
pub fn average_precision(videos: &[VideoDetections], class: usize, threshold: f64) -> Option<f64> {
    let gts: Vec<Vec<Interval>> = videos
        .iter()
        .map(|v| v.gt.iter().filter(|s| s.class == class).map(segment_interval).collect())
        .collect();
    let npos: usize = gts.iter().map(Vec::len).sum();
    if npos == 0 {
        return None;
    }
    let mut preds: Vec<(usize, &Proposal)> = videos
        .iter()
        .enumerate()
        .flat_map(|(i, v)| v.proposals.iter().filter(|p| p.class == class).map(move |p| (i, p)))
        .collect();
    preds.sort_by(|a, b| proposal_order(a.1, b.1).then(a.0.cmp(&b.0)));

    let mut used: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
    let mut tp = 0usize;
    let mut precision = Vec::with_capacity(preds.len());
    let mut recall = Vec::with_capacity(preds.len());
    for (k, (vid, p)) in preds.iter().enumerate() {
        let iv = p.interval();
        let best = gts[*vid]
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*vid][*j])
            .map(|(j, g)| (j, g.iou(&iv)))
            .filter(|(_, o)| *o >= threshold)
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(b.0.cmp(&a.0)));
        if let Some((j, _)) = best {
            used[*vid][j] = true;
            tp += 1;
        }
        precision.push(tp as f64 / (k + 1) as f64);
        recall.push(tp as f64 / npos as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    Some(ap)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapResult {
    pub thresholds: Vec<f64>,
    /// Mean AP over classes with ground truth, per threshold.
    pub per_threshold: Vec<f64>,
    pub average: f64,
    /// `per_class[t][c]`, `None` for classes without ground truth.
    pub per_class: Vec<Vec<Option<f64>>>,
    pub excluded_classes: Vec<usize>,
}

impl MapResult {
    /// AP of each class averaged over thresholds; `None` if excluded.
    pub fn class_average(&self) -> Vec<Option<f64>> {
        let num_classes = self.per_class.first().map_or(0, Vec::len);
        (0..num_classes)
            .map(|c| {
                let vals: Option<Vec<f64>> = self.per_class.iter().map(|row| row[c]).collect();
                vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect()
    }

    /// Mean over `classes` of the threshold-averaged AP, skipping excluded ones.
    pub fn subset_average(&self, classes: &[usize]) -> Option<f64> {
        let avg = self.class_average();
        let vals: Vec<f64> = classes.iter().filter_map(|&c| avg.get(c).copied().flatten()).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

/// mAP at each threshold and its mean over thresholds.
pub fn map_at(videos: &[VideoDetections], thresholds: &[f64], num_classes: usize) -> MapResult {
    let per_class: Vec<Vec<Option<f64>>> = thresholds
        .iter()
        .map(|&t| (0..num_classes).map(|c| average_precision(videos, c, t)).collect())
        .collect();
    let excluded_classes = (0..num_classes)
        .filter(|c| per_class.first().map_or(true, |row| row[*c].is_none()))
        .collect();
    let per_threshold: Vec<f64> = per_class
        .iter()
        .map(|row| {
            let valid: Vec<f64> = row.iter().flatten().copied().collect();
            if valid.is_empty() {
                0.0
            } else {
                valid.iter().sum::<f64>() / valid.len() as f64
            }
        })
        .collect();
    let average = if per_threshold.is_empty() {
        0.0
    } else {
        per_threshold.iter().sum::<f64>() / per_threshold.len() as f64
    };
    MapResult {
        thresholds: thresholds.to_vec(),
        per_threshold,
        average,
        per_class,
        excluded_classes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prop(start: f64, end: f64, class: usize, score: f64) -> Proposal {
        Proposal {
            start,
            end,
            class,
            score,
        }
    }

    #[test]
    fn tiou_examples() {
        let a = Interval::new(0.0, 10.0);
        assert_eq!(tiou(a, a).unwrap(), 1.0);
        assert_eq!(tiou(a, Interval::new(11.0, 12.0)).unwrap(), 0.0);
        assert!((tiou(a, Interval::new(5.0, 15.0)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(tiou(a, Interval::new(3.0, 3.0)).is_err());
    }

    #[test]
    fn perfect_detector_scores_one() {
        let gt = vec![Segment::new(2, 9, 0), Segment::new(12, 20, 1)];
        let proposals = gt.iter().map(|s| prop(s.start as f64, s.end as f64, s.class, 1.0)).collect();
        let videos = vec![VideoDetections { proposals, gt }];
        let m = map_at(&videos, &DEFAULT_THRESHOLDS, 2);
        assert!(m.per_threshold.iter().all(|&v| v == 1.0));
        assert_eq!(m.average, 1.0);
    }

    #[test]
    fn miss_scores_zero_and_empty_is_zero() {
        let gt = vec![Segment::new(0, 5, 0)];
        let videos = vec![VideoDetections {
            proposals: vec![prop(10.0, 20.0, 0, 0.9)],
            gt: gt.clone(),
        }];
        assert_eq!(average_precision(&videos, 0, 0.5), Some(0.0));
        let empty = vec![VideoDetections { proposals: vec![], gt }];
        assert_eq!(map_at(&empty, &DEFAULT_THRESHOLDS, 1).average, 0.0);
    }

    #[test]
    fn classes_without_gt_are_excluded() {
        let gt = vec![Segment::new(0, 5, 1)];
        let videos = vec![VideoDetections {
            proposals: vec![prop(0.0, 5.0, 1, 0.9), prop(0.0, 5.0, 0, 0.9)],
            gt,
        }];
        let m = map_at(&videos, &[0.5], 3);
        assert_eq!(m.excluded_classes, vec![0, 2]);
        assert_eq!(m.average, 1.0);
    }

    #[test]
    fn hand_computed_envelope() {
        // Ranks: TP, FP, TP with two gt -> precision 1, 1/2, 2/3; recall 1/2, 1/2, 1.
        // Envelope 1, 2/3, 2/3 -> AP = 1/2 * 1 + 1/2 * 2/3.
        let gt = vec![Segment::new(0, 10, 0), Segment::new(20, 30, 0)];
        let proposals = vec![
            prop(0.0, 10.0, 0, 0.9),
            prop(40.0, 50.0, 0, 0.8),
            prop(20.0, 30.0, 0, 0.7),
        ];
        let ap = average_precision(&[VideoDetections { proposals, gt }], 0, 0.5).unwrap();
        assert!((ap - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn duplicates_count_once() {
        let gt = vec![Segment::new(0, 10, 0)];
        let proposals = vec![prop(0.0, 10.0, 0, 0.9), prop(0.0, 10.0, 0, 0.8)];
        let ap = average_precision(&[VideoDetections { proposals, gt }], 0, 0.5).unwrap();
        assert_eq!(ap, 1.0);
    }
}
