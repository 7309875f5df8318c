use serde::{Deserialize, Serialize};

use super::ops::sigmoid_scalar;
use super::Matrix;
use crate::error::{Error, Result};

/// Probability clamp used by the focal and cross-entropy losses.
pub const PROB_EPS: f64 = 1e-7;

/// Half-open temporal interval `[start, end)` in frame units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Interval { start, end }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    /// Temporal IoU; 0 for disjoint intervals.
    pub fn iou(&self, other: &Interval) -> f64 {
        let inter = (self.end.min(other.end) - self.start.max(other.start)).max(0.0);
        let union = self.len() + other.len() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }

    pub(crate) fn ensure_valid(&self, what: &str) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite()) || self.start >= self.end {
            return Err(Error::invalid(
                what,
                format!("degenerate interval [{}, {}]", self.start, self.end),
            ));
        }
        Ok(())
    }
}

/// Focal-loss hyperparameters. Defaults are the usual detector values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocalParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        FocalParams {
            alpha: 0.25,
            gamma: 2.0,
        }
    }
}

/// Binary focal loss on a probability, clamped to `[eps, 1 - eps]`.
pub fn focal_loss(p: f64, positive: bool, alpha: f64, gamma: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if positive {
        -alpha * (1.0 - p).powf(gamma) * p.ln()
    } else {
        -(1.0 - alpha) * p.powf(gamma) * (1.0 - p).ln()
    }
}

/// Focal loss of `sigmoid(z)` and its derivative with respect to the logit `z`.
pub fn focal_loss_logit(z: f64, positive: bool, params: FocalParams) -> (f64, f64) {
    focal_loss_with_grad(sigmoid_scalar(z), positive, params)
}

/// Focal loss at probability `p = sigmoid(z)` together with `d loss / d z`.
///
/// The derivative is the closed form of the unclamped loss evaluated at the
/// clamped probability:
/// positive: `alpha (1-p)^g (g p ln p - (1 - p))`,
/// negative: `(1-alpha) p^g (p - g (1-p) ln(1-p))`.
pub fn focal_loss_with_grad(p: f64, positive: bool, params: FocalParams) -> (f64, f64) {
    let FocalParams { alpha, gamma } = params;
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    let q = 1.0 - p;
    if positive {
        let w = q.powf(gamma);
        let loss = -alpha * w * p.ln();
        let grad = alpha * w * (gamma * p * p.ln() - q);
        (loss, grad)
    } else {
        let w = p.powf(gamma);
        let loss = -(1.0 - alpha) * w * q.ln();
        let grad = (1.0 - alpha) * w * (p - gamma * q * q.ln());
        (loss, grad)
    }
}

/// 1-D distance-IoU loss: `1 - IoU + (center gap)^2 / (enclosing length)^2`.
///
/// Returns the loss and its gradient with respect to `(pred.start, pred.end)`.
/// At exact ties between endpoints the one-sided derivative that treats the
/// prediction as not dominating is used.
pub fn diou_loss_1d(pred: Interval, gt: Interval) -> Result<(f64, [f64; 2])> {
    pred.ensure_valid("prediction")?;
    gt.ensure_valid("ground truth")?;
    let (a, b) = (pred.start, pred.end);
    let (g, h) = (gt.start, gt.end);

    let lo = a.max(g);
    let hi = b.min(h);
    let inter = (hi - lo).max(0.0);
    let (di_da, di_db) = if inter > 0.0 {
        (if a > g { -1.0 } else { 0.0 }, if b < h { 1.0 } else { 0.0 })
    } else {
        (0.0, 0.0)
    };
    let union = (b - a) + (h - g) - inter;
    let du_da = -1.0 - di_da;
    let du_db = 1.0 - di_db;
    let iou = inter / union;
    let diou_da = (di_da * union - inter * du_da) / (union * union);
    let diou_db = (di_db * union - inter * du_db) / (union * union);

    let enclosure = b.max(h) - a.min(g);
    let de_da = if a < g { -1.0 } else { 0.0 };
    let de_db = if b > h { 1.0 } else { 0.0 };
    let gap = 0.5 * ((a + b) - (g + h));
    let e2 = enclosure * enclosure;
    let penalty = gap * gap / e2;
    let dp = |de: f64| gap / e2 - 2.0 * gap * gap * de / (e2 * enclosure);

    let loss = 1.0 - iou + penalty;
    Ok((loss, [-diou_da + dp(de_da), -diou_db + dp(de_db)]))
}

/// `-log softmax(logits)[target]` via log-sum-exp, and its gradient.
///
/// The loss is capped at `-ln(PROB_EPS)`; past the cap the gradient is zero.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if logits.len() < 2 {
        return Err(Error::invalid("logits", format!("need at least 2 classes, got {}", logits.len())));
    }
    if target >= logits.len() {
        return Err(Error::invalid(
            "target",
            format!("class {target} out of range for {} logits", logits.len()),
        ));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
    let lse = max + sum.ln();
    let loss = lse - logits[target];
    let cap = -PROB_EPS.ln();
    if loss > cap {
        return Ok((cap, vec![0.0; logits.len()]));
    }
    let mut grad: Vec<f64> = logits.iter().map(|z| (z - lse).exp()).collect();
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Mean squared error and its gradient with respect to `a`.
pub fn mse(a: &Matrix, b: &Matrix) -> Result<(f64, Matrix)> {
    a.ensure_same_shape("mse", b)?;
    let n = a.data().len().max(1) as f64;
    let mut grad = Matrix::zeros(a.rows(), a.cols());
    let mut sum = 0.0;
    for ((g, x), y) in grad.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
        let d = x - y;
        sum += d * d;
        *g = 2.0 * d / n;
    }
    Ok((sum / n, grad))
}
