use super::table::ClasswiseLossTable;
use crate::error::{Error, Result};
use crate::model::FrameOutputs;
use crate::nn::{diou_loss_1d, focal_loss_with_grad, FocalParams, Interval, Matrix};
use crate::synth::{covering_segments, validate_segments, Segment};

/// Detection loss of one video and its gradients.
#[derive(Clone, Debug)]
pub struct DetectionLoss {
    /// Sum of per-frame terms divided by `positives`.
    pub loss: f64,
    /// `L x 1` unnormalized per-frame terms.
    pub per_frame: Matrix,
    /// Positive frame count, floored at 1.
    pub positives: usize,
    /// `d loss / d logit`, `L x C`.
    pub dlogits: Matrix,
    /// `d loss / d offsets`, `L x 2`.
    pub doffsets: Matrix,
}

const MIN_PRED_LEN: f64 = 1e-6;

/// Focal classification over every frame and class plus `lambda_loc` times a
/// distance-IoU term on positive frames, normalized by the positive count.
pub fn detection_loss(
    outputs: &FrameOutputs,
    gt: &[Segment],
    lambda_loc: f64,
    focal: FocalParams,
) -> Result<DetectionLoss> {
    let frames = outputs.frames();
    let num_classes = outputs.cls_scores.cols();
    validate_segments(gt, frames, num_classes)?;
    let cover = covering_segments(gt, frames);
    let positives = cover.iter().filter(|c| c.is_some()).count().max(1);
    let norm = 1.0 / positives as f64;

    let mut per_frame = Matrix::zeros(frames, 1);
    let mut dlogits = Matrix::zeros(frames, num_classes);
    let mut doffsets = Matrix::zeros(frames, 2);
    for l in 0..frames {
        let label = cover[l].map(|s| s.class);
        let mut term = 0.0;
        for c in 0..num_classes {
            let (v, g) = focal_loss_with_grad(outputs.cls_scores[(l, c)], label == Some(c), focal);
            term += v;
            dlogits[(l, c)] = g * norm;
        }
        if let Some(seg) = cover[l] {
            let anchor = l as f64;
            let mut start = anchor - outputs.offsets[(l, 0)];
            let mut end = anchor + outputs.offsets[(l, 1)];
            if end - start < MIN_PRED_LEN {
                start -= 0.5 * MIN_PRED_LEN;
                end += 0.5 * MIN_PRED_LEN;
            }
            let target = Interval::new(seg.start as f64, seg.end as f64);
            let (v, [ds, de]) = diou_loss_1d(Interval::new(start, end), target)?;
            term += lambda_loc * v;
            doffsets[(l, 0)] = -ds * lambda_loc * norm;
            doffsets[(l, 1)] = de * lambda_loc * norm;
        }
        per_frame[(l, 0)] = term;
    }
    let loss = per_frame.data().iter().sum::<f64>() * norm;
    Ok(DetectionLoss {
        loss,
        per_frame,
        positives,
        dlogits,
        doffsets,
    })
}

/// Per-frame advantage targets `mean_v(class) - frame_loss` on positive
/// frames; background frames are masked out.
pub fn target_advantage(
    table: &ClasswiseLossTable,
    per_frame_vl: &Matrix,
    gt: &[Segment],
) -> Result<(Matrix, Vec<bool>)> {
    let frames = per_frame_vl.rows();
    let cover = covering_segments(gt, frames);
    let mut targets = Matrix::zeros(frames, 1);
    let mut mask = vec![false; frames];
    for (l, seg) in cover.iter().enumerate() {
        if let Some(seg) = seg {
            if seg.class >= table.num_classes() {
                return Err(Error::Schedule(format!("class {} outside the loss table", seg.class)));
            }
            targets[(l, 0)] = table.mean(seg.class)? - per_frame_vl[(l, 0)];
            mask[l] = true;
        }
    }
    Ok((targets, mask))
}

/// Masked mean squared error and its gradient with respect to `adv_pred`.
pub fn advantage_loss(adv_pred: &Matrix, targets: &Matrix, mask: &[bool]) -> Result<(f64, Matrix)> {
    adv_pred.ensure_same_shape("advantage_loss", targets)?;
    if mask.len() != adv_pred.rows() {
        return Err(Error::Shape {
            op: "advantage_loss mask",
            left: (mask.len(), 1),
            right: adv_pred.shape(),
        });
    }
    let n = mask.iter().filter(|m| **m).count();
    let mut grad = Matrix::zeros(adv_pred.rows(), adv_pred.cols());
    if n == 0 {
        return Ok((0.0, grad));
    }
    let mut sum = 0.0;
    for (l, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        let d = adv_pred[(l, 0)] - targets[(l, 0)];
        sum += d * d;
        grad[(l, 0)] = 2.0 * d / n as f64;
    }
    Ok((sum / n as f64, grad))
}
