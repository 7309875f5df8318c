use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::net::FrameOutputs;
use crate::error::Result;
use crate::nn::{self, Interval, Matrix};
use crate::synth::{validate_segments, Segment};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub start: f64,
    pub end: f64,
    pub class: usize,
    pub score: f64,
}

impl Proposal {
    pub fn interval(&self) -> Interval {
        Interval::new(self.start, self.end)
    }
}

/// Score descending, then start, end and class ascending.
pub fn proposal_order(a: &Proposal, b: &Proposal) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.start.total_cmp(&b.start))
        .then(a.end.total_cmp(&b.end))
        .then(a.class.cmp(&b.class))
}

/// Anchor-free decoding: frame `l`, class `c` with score above threshold
/// yields `[l - off_start, l + off_end]`, clamped to `[0, L]`.
pub fn decode_proposals(outputs: &FrameOutputs, cfg: &ModelConfig) -> Vec<Proposal> {
    let frames = outputs.frames();
    let len = frames as f64;
    let mut out = Vec::new();
    for l in 0..frames {
        let start = (l as f64 - outputs.offsets[(l, 0)]).clamp(0.0, len);
        let end = (l as f64 + outputs.offsets[(l, 1)]).clamp(0.0, len);
        if start >= end {
            continue;
        }
        for (class, &score) in outputs.cls_scores.row(l).iter().enumerate() {
            if score >= cfg.score_threshold {
                out.push(Proposal {
                    start,
                    end,
                    class,
                    score,
                });
            }
        }
    }
    out.sort_by(proposal_order);
    out.truncate(cfg.top_k_pre_nms);
    out
}

/// Greedy class-wise suppression of proposals overlapping a kept one by more
/// than `tiou_threshold`.
pub fn nms(proposals: &[Proposal], tiou_threshold: f64) -> Vec<Proposal> {
    let mut sorted = proposals.to_vec();
    sorted.sort_by(proposal_order);
    let mut kept: Vec<Proposal> = Vec::new();
    for p in sorted {
        let iv = p.interval();
        let suppressed = kept
            .iter()
            .any(|k| k.class == p.class && k.interval().iou(&iv) > tiou_threshold);
        if !suppressed {
            kept.push(p);
        }
    }
    kept
}

/// Decode followed by NMS, the per-video inference path.
pub fn detect(outputs: &FrameOutputs, cfg: &ModelConfig) -> Vec<Proposal> {
    nms(&decode_proposals(outputs, cfg), cfg.nms_tiou)
}

/// Mean per-frame cross-entropy against the frame's template token: the
/// covering segment's class, or the background token `C`.
///
/// Returns the loss and its gradient with respect to `tmpl_logits`.
pub fn template_loss(tmpl_logits: &Matrix, gt: &[Segment]) -> Result<(f64, Matrix)> {
    let frames = tmpl_logits.rows();
    let background = tmpl_logits.cols().saturating_sub(1);
    validate_segments(gt, frames, background)?;
    let labels = crate::synth::frame_labels(gt, frames);
    let mut grad = Matrix::zeros(frames, tmpl_logits.cols());
    let mut total = 0.0;
    let n = frames.max(1) as f64;
    for (l, label) in labels.iter().enumerate() {
        let target = label.unwrap_or(background);
        let (loss, g) = nn::cross_entropy(tmpl_logits.row(l), target)?;
        total += loss;
        for (dst, v) in grad.row_mut(l).iter_mut().zip(g) {
            *dst = v / n;
        }
    }
    Ok((total / n, grad))
}
