use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How language enters the detection head.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    /// Gate predicted per frame from the advantage head.
    Learned,
    /// Constant gate; the advantage head is bypassed and reports zeros.
    Fixed(f64),
    /// Language streams only, vision dropped.
    LanguageOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub dim: usize,
    pub num_classes: usize,
    pub head_layers: usize,
    pub kernel: usize,
    pub hidden: usize,
    pub nms_tiou: f64,
    pub top_k_pre_nms: usize,
    pub score_threshold: f64,
    /// Frames per unit of the relu'd localization output.
    pub offset_scale: f64,
    pub fusion: Fusion,
    /// Feed `[adv | vis]` instead of `adv` alone to the advantage head.
    pub adv_sees_vision: bool,
    /// Initial foreground probability encoded in the classifier bias.
    pub prior_prob: f64,
    /// Initial bias of the advantage head; `ln 3` starts the gate at 0.5.
    pub adv_bias_init: f64,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 32,
            num_classes: 8,
            head_layers: 2,
            kernel: 3,
            hidden: 32,
            nms_tiou: 0.5,
            top_k_pre_nms: 200,
            score_threshold: 0.01,
            offset_scale: 16.0,
            fusion: Fusion::Learned,
            adv_sees_vision: false,
            prior_prob: 0.01,
            adv_bias_init: 3f64.ln(),
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn new(dim: usize, num_classes: usize) -> Self {
        ModelConfig {
            dim,
            num_classes,
            hidden: dim,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel % 2 == 0 {
            return Err(Error::invalid("kernel", format!("{} is even", self.kernel)));
        }
        if !(self.nms_tiou > 0.0 && self.nms_tiou < 1.0) {
            return Err(Error::invalid("nms_tiou", format!("{} outside (0, 1)", self.nms_tiou)));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("num_classes", format!("{} < 2", self.num_classes)));
        }
        if self.dim == 0 || self.hidden == 0 {
            return Err(Error::invalid("dim", "dim and hidden must be positive"));
        }
        if !(self.offset_scale > 0.0) {
            return Err(Error::invalid("offset_scale", "must be positive"));
        }
        if !(self.prior_prob > 0.0 && self.prior_prob < 1.0) {
            return Err(Error::invalid("prior_prob", "must be in (0, 1)"));
        }
        if !self.adv_bias_init.is_finite() {
            return Err(Error::invalid("adv_bias_init", "must be finite"));
        }
        match self.fusion {
            Fusion::Fixed(v) if !(0.0..=1.0).contains(&v) => {
                Err(Error::invalid("fusion", format!("fixed gate {v} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}
