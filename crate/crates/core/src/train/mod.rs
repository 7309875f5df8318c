//! Alternating vision-only / vision-language training.

mod log;
mod loss;
mod table;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamConfig, FocalParams, Matrix};

pub use log::{read_log, write_log, EpochLog, Phase, TrainLog};
pub use loss::{advantage_loss, detection_loss, target_advantage, DetectionLoss};
pub use table::ClasswiseLossTable;
pub use trainer::{fit, EpochTrace, SampleTrace, Trainer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lambda_loc: f64,
    pub lambda_tg: f64,
    pub lambda_adv: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub focal_alpha: f64,
    pub focal_gamma: f64,
    /// Divide the per-frame loss by the positive count before forming the
    /// advantage target.
    pub normalize_frame_loss: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            lr: 2e-3,
            lambda_loc: 1.0,
            lambda_tg: 0.1,
            lambda_adv: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            focal_alpha: 0.25,
            focal_gamma: 2.0,
            normalize_frame_loss: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs % 2 != 0 {
            return Err(Error::invalid("epochs", format!("{} is odd; phases alternate 1:1", self.epochs)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("lr", format!("{} is not positive", self.lr)));
        }
        for (name, v) in [
            ("lambda_loc", self.lambda_loc),
            ("lambda_tg", self.lambda_tg),
            ("lambda_adv", self.lambda_adv),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("{v} is negative")));
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    pub fn focal(&self) -> FocalParams {
        FocalParams {
            alpha: self.focal_alpha,
            gamma: self.focal_gamma,
        }
    }
}

/// Loss terms of one vision-language step.
#[derive(Clone, Debug, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub dh: f64,
    pub tg: f64,
    pub adv: f64,
    /// Unnormalized per-frame detection summands of the fused pass.
    pub per_frame_vl: Matrix,
    pub positives: usize,
}

impl LossBreakdown {
    pub fn compose(dh: f64, tg: f64, adv: f64, cfg: &TrainConfig) -> f64 {
        dh + cfg.lambda_tg * tg + cfg.lambda_adv * adv
    }
}
