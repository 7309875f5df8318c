use std::path::{Path, PathBuf};

use actionvlm::eval::{EvalOptions, LapMode, MlaFrames, MlaOptions, MlaSource, DEFAULT_THRESHOLDS, HALLUCINATION_TOP_K};
use actionvlm::experiment::Recipe;
use actionvlm::model::{Fusion, ModelConfig};
use actionvlm::synth::{Corpus, GenConfig};
use actionvlm::train::TrainConfig;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "ACTIONVLM_SEED";

/// Bad command-line usage; exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

/// Input that parses but violates an invariant; exit code 2.
#[derive(Debug)]
pub struct InvalidInput(pub String);

macro_rules! impl_error {
    ($t:ty) => {
        impl std::fmt::Display for $t {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&self.0)
            }
        }
        impl std::error::Error for $t {}
    };
}
impl_error!(UsageError);
impl_error!(InvalidInput);

/// Flat run configuration: generation, model, training and evaluation fields
/// side by side. Missing fields take the default bias-corpus recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Drives corpus sampling, weight initialization and traversal order.
    pub seed: u64,
    /// Seed of the class prototypes; corpora meant to be used together must share it.
    pub world_seed: u64,
    pub out_dir: Option<PathBuf>,

    pub num_classes: usize,
    pub num_videos: usize,
    pub frames: usize,
    pub dim: usize,
    pub ambiguity: Vec<f64>,
    pub helpfulness: Vec<f64>,
    pub background_helpfulness: f64,
    pub noise_sigma: f64,
    pub language_noise_sigma: f64,
    pub background_fraction: f64,
    pub decoy_rate: f64,

    pub head_layers: usize,
    pub kernel: usize,
    pub hidden: usize,
    pub nms_tiou: f64,
    pub top_k_pre_nms: usize,
    pub score_threshold: f64,
    pub offset_scale: f64,
    /// `learned`, `fixed` or `language_only`.
    pub fusion: String,
    /// Gate value when `fusion` is `fixed`.
    pub fixed_lambda: f64,
    pub adv_sees_vision: bool,
    pub prior_prob: f64,
    pub adv_bias_init: f64,

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
    pub normalize_frame_loss: bool,

    pub thresholds: Vec<f64>,
    pub hallucination_top_k: usize,
    pub lap_mode: LapMode,
    pub mla_source: MlaSource,
    pub mla_frames: MlaFrames,
    pub eval_videos: usize,
    pub probe_clips: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let recipe = Recipe::bias_default(0);
        let (g, m, t) = (recipe.gen, recipe.model, recipe.train);
        RunConfig {
            seed: 0,
            world_seed: g.world_seed,
            out_dir: None,
            num_classes: g.num_classes,
            num_videos: g.num_videos,
            frames: g.frames,
            dim: g.dim,
            ambiguity: g.ambiguity,
            helpfulness: g.helpfulness,
            background_helpfulness: g.background_helpfulness,
            noise_sigma: g.noise_sigma,
            language_noise_sigma: g.language_noise_sigma,
            background_fraction: g.background_fraction,
            decoy_rate: g.decoy_rate,
            head_layers: m.head_layers,
            kernel: m.kernel,
            hidden: m.hidden,
            nms_tiou: m.nms_tiou,
            top_k_pre_nms: m.top_k_pre_nms,
            score_threshold: m.score_threshold,
            offset_scale: m.offset_scale,
            fusion: "learned".into(),
            fixed_lambda: 1.0,
            adv_sees_vision: m.adv_sees_vision,
            prior_prob: m.prior_prob,
            adv_bias_init: m.adv_bias_init,
            epochs: t.epochs,
            lr: t.lr,
            lambda_loc: t.lambda_loc,
            lambda_tg: t.lambda_tg,
            lambda_adv: t.lambda_adv,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_eps: t.adam_eps,
            focal_alpha: t.focal_alpha,
            focal_gamma: t.focal_gamma,
            normalize_frame_loss: t.normalize_frame_loss,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            hallucination_top_k: HALLUCINATION_TOP_K,
            lap_mode: LapMode::Absolute,
            mla_source: MlaSource::Lambda,
            mla_frames: MlaFrames::Positive,
            eval_videos: recipe.eval_videos,
            probe_clips: recipe.probe_clips,
        }
    }
}

impl RunConfig {
    /// Reads a config file and applies the seed override from the environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seed = v
                .trim()
                .parse()
                .map_err(|_| InvalidInput(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn gen(&self) -> GenConfig {
        GenConfig {
            num_classes: self.num_classes,
            num_videos: self.num_videos,
            frames: self.frames,
            dim: self.dim,
            ambiguity: self.ambiguity.clone(),
            helpfulness: self.helpfulness.clone(),
            background_helpfulness: self.background_helpfulness,
            noise_sigma: self.noise_sigma,
            language_noise_sigma: self.language_noise_sigma,
            background_fraction: self.background_fraction,
            decoy_rate: self.decoy_rate,
            world_seed: self.world_seed,
            seed: self.seed,
        }
    }

    pub fn fusion(&self) -> Result<Fusion> {
        Ok(match self.fusion.as_str() {
            "learned" => Fusion::Learned,
            "fixed" => Fusion::Fixed(self.fixed_lambda),
            "language_only" => Fusion::LanguageOnly,
            other => {
                return Err(InvalidInput(format!(
                    "invalid fusion: {other:?}; valid values: learned, fixed, language_only"
                ))
                .into())
            }
        })
    }

    /// Model configuration for a corpus; width and class count come from the
    /// corpus itself.
    pub fn model(&self, corpus: &Corpus) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            dim: corpus.config.dim,
            num_classes: corpus.config.num_classes,
            head_layers: self.head_layers,
            kernel: self.kernel,
            hidden: self.hidden,
            nms_tiou: self.nms_tiou,
            top_k_pre_nms: self.top_k_pre_nms,
            score_threshold: self.score_threshold,
            offset_scale: self.offset_scale,
            fusion: self.fusion()?,
            adv_sees_vision: self.adv_sees_vision,
            prior_prob: self.prior_prob,
            adv_bias_init: self.adv_bias_init,
            init_seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            lambda_loc: self.lambda_loc,
            lambda_tg: self.lambda_tg,
            lambda_adv: self.lambda_adv,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_eps: self.adam_eps,
            focal_alpha: self.focal_alpha,
            focal_gamma: self.focal_gamma,
            normalize_frame_loss: self.normalize_frame_loss,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn eval(&self) -> EvalOptions {
        EvalOptions {
            thresholds: self.thresholds.clone(),
            top_k: self.hallucination_top_k,
            lap_mode: self.lap_mode,
            mla: MlaOptions {
                source: self.mla_source,
                frames: self.mla_frames,
            },
        }
    }

    pub fn recipe(&self, corpus: &Corpus) -> Result<Recipe> {
        Ok(Recipe {
            gen: corpus.config.clone(),
            eval_videos: self.eval_videos,
            probe_clips: self.probe_clips,
            model: self.model(corpus)?,
            train: self.train()?,
            eval: self.eval(),
        })
    }

    /// `--out` wins over the config's `out_dir`.
    pub fn out_dir(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        match flag.or_else(|| self.out_dir.clone()) {
            Some(p) => Ok(p),
            None => Err(UsageError("no output directory: pass --out or set out_dir in the config".into()).into()),
        }
    }
}
