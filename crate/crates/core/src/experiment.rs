//! Seeded recipes and ablation variants shared by the CLI and the tests.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{class_scores, evaluate, DifficultyBuckets, EvalOptions, Evaluation};
use crate::model::{Fusion, Model, ModelConfig};
use crate::nn::Rng;
use crate::synth::{generate_corpus, generate_distractors, inject_conflict, Corpus, GenConfig};
use crate::train::{fit, TrainConfig, TrainLog};

/// Gate values of the fixed-lambda sweep, strongest language first.
pub const FIXED_SWEEP: [f64; 6] = [1.0, 0.8, 0.6, 0.4, 0.2, 0.0];

const SALT_EVAL: u64 = 0x65_76_61_6c;
const SALT_CONFLICT: u64 = 0x63_6f_6e_66;
const SALT_PROBE: u64 = 0x70_72_6f_62;

/// One trained configuration in an ablation table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Learned gate with every loss term.
    Full,
    Fixed(f64),
    /// Gate frozen at zero; identical to `Fixed(0.0)`.
    VisionOnly,
    NoAdvLoss,
    NoTgLoss,
    LanguageOnly,
}

impl Variant {
    pub fn name(&self) -> String {
        match self {
            Variant::Full => "full".into(),
            Variant::Fixed(g) => format!("fixed-{g:.1}"),
            Variant::VisionOnly => "vision-only".into(),
            Variant::NoAdvLoss => "no-adv-loss".into(),
            Variant::NoTgLoss => "no-tg-loss".into(),
            Variant::LanguageOnly => "language-only".into(),
        }
    }

    /// Model and training configuration for this variant.
    pub fn configure(&self, model: &ModelConfig, train: &TrainConfig) -> (ModelConfig, TrainConfig) {
        let mut m = model.clone();
        let mut t = train.clone();
        match *self {
            Variant::Full => m.fusion = Fusion::Learned,
            Variant::Fixed(g) => m.fusion = Fusion::Fixed(g),
            Variant::VisionOnly => m.fusion = Fusion::Fixed(0.0),
            Variant::NoAdvLoss => {
                m.fusion = Fusion::Learned;
                t.lambda_adv = 0.0;
            }
            Variant::NoTgLoss => {
                m.fusion = Fusion::Learned;
                t.lambda_tg = 0.0;
            }
            Variant::LanguageOnly => m.fusion = Fusion::LanguageOnly,
        }
        (m, t)
    }
}

/// Ablation modes of the command-line `ablate` command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationMode {
    FixedSweep,
    NoAdvLoss,
    NoTgLoss,
    LanguageOnly,
    VisionOnly,
}

impl AblationMode {
    pub const NAMES: [&'static str; 5] = ["fixed-lambda", "no-adv-loss", "no-tg-loss", "language-only", "vision-only"];

    /// Rows of the comparison table; the full model is always the first row.
    pub fn variants(&self) -> Vec<Variant> {
        let mut rows = vec![Variant::Full];
        match self {
            AblationMode::FixedSweep => rows.extend(FIXED_SWEEP.iter().map(|&g| Variant::Fixed(g))),
            AblationMode::NoAdvLoss => rows.push(Variant::NoAdvLoss),
            AblationMode::NoTgLoss => rows.push(Variant::NoTgLoss),
            AblationMode::LanguageOnly => rows.push(Variant::LanguageOnly),
            AblationMode::VisionOnly => rows.push(Variant::VisionOnly),
        }
        rows
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fixed-lambda" => AblationMode::FixedSweep,
            "no-adv-loss" => AblationMode::NoAdvLoss,
            "no-tg-loss" => AblationMode::NoTgLoss,
            "language-only" => AblationMode::LanguageOnly,
            "vision-only" => AblationMode::VisionOnly,
            other => {
                return Err(Error::invalid(
                    "mode",
                    format!("unknown mode {other:?}; valid modes: {}", Self::NAMES.join(", ")),
                ))
            }
        })
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = match self {
            AblationMode::FixedSweep => 0,
            AblationMode::NoAdvLoss => 1,
            AblationMode::NoTgLoss => 2,
            AblationMode::LanguageOnly => 3,
            AblationMode::VisionOnly => 4,
        };
        f.write_str(Self::NAMES[i])
    }
}

/// Everything needed to reproduce one seeded experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Recipe {
    /// Training corpus; the evaluation corpus reuses it with another seed.
    pub gen: GenConfig,
    pub eval_videos: usize,
    pub probe_clips: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalOptions,
}

impl Recipe {
    /// Default bias corpus with 64 training and 32 evaluation videos.
    pub fn bias_default(seed: u64) -> Self {
        let gen = GenConfig {
            world_seed: seed,
            ..GenConfig::bias_corpus(64, seed)
        };
        let mut model = ModelConfig::new(gen.dim, gen.num_classes);
        model.init_seed = seed;
        let train = TrainConfig {
            seed,
            normalize_frame_loss: true,
            ..TrainConfig::default()
        };
        Recipe {
            gen,
            eval_videos: 32,
            probe_clips: 32,
            model,
            train,
            eval: EvalOptions::default(),
        }
    }

    /// Train, evaluation, conflicted and distractor corpora.
    pub fn corpora(&self) -> Result<Corpora> {
        Corpora::derive(generate_corpus(&self.gen)?, self.eval_videos, self.probe_clips)
    }

    pub fn train_variant(&self, corpora: &Corpora, variant: Variant) -> Result<(Model, TrainLog)> {
        let (m, t) = variant.configure(&self.model, &self.train);
        fit(&corpora.train, &m, &t)
    }

    /// Evaluation on the aligned corpus, its conflicted twin and the probe.
    pub fn evaluate(&self, model: &Model, corpora: &Corpora, buckets: Option<&DifficultyBuckets>) -> Result<Evaluation> {
        evaluate(
            model,
            &corpora.eval,
            Some(&corpora.conflicted),
            Some(&corpora.probe),
            buckets,
            &self.eval,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpora {
    pub train: Corpus,
    pub eval: Corpus,
    pub conflicted: Corpus,
    pub probe: Corpus,
}

impl Corpora {
    /// Held-out corpora derived from a training corpus: same prototypes, new
    /// sampling seeds forked from the training seed.
    pub fn derive(train: Corpus, eval_videos: usize, probe_clips: usize) -> Result<Self> {
        let gen = &train.config;
        let eval_cfg = GenConfig {
            num_videos: eval_videos,
            seed: Rng::new(gen.seed).fork(SALT_EVAL).next_u64(),
            ..gen.clone()
        };
        let eval = generate_corpus(&eval_cfg)?;
        let conflicted = conflicted_twin(&eval)?;
        let probe = probe_clips_for(gen, probe_clips)?;
        Ok(Corpora {
            train,
            eval,
            conflicted,
            probe,
        })
    }
}

/// Conflict-injected copy of `corpus`, seeded by its generation seed.
pub fn conflicted_twin(corpus: &Corpus) -> Result<Corpus> {
    inject_conflict(corpus, &mut Rng::new(corpus.config.seed).fork(SALT_CONFLICT))
}

/// Distractor clips sharing the prototypes of `gen`.
pub fn probe_clips_for(gen: &GenConfig, count: usize) -> Result<Corpus> {
    let cfg = GenConfig {
        seed: Rng::new(gen.seed).fork(SALT_PROBE).next_u64(),
        ..gen.clone()
    };
    generate_distractors(&cfg, count)
}

/// One trained and evaluated row of an ablation table.
#[derive(Clone, Debug)]
pub struct AblationRow {
    pub variant: Variant,
    pub model: Model,
    pub log: TrainLog,
    pub evaluation: Evaluation,
}

/// Trains every variant of `mode` on the training corpus and evaluates it on
/// the held-out corpora. Difficulty buckets come from a vision-only model,
/// which also serves the vision-only and fixed 0.0 rows.
pub fn run_ablation(recipe: &Recipe, corpora: &Corpora, mode: AblationMode) -> Result<(DifficultyBuckets, Vec<AblationRow>)> {
    let (base_model, base_log) = recipe.train_variant(corpora, Variant::VisionOnly)?;
    let buckets = buckets_from(&recipe.evaluate(&base_model, corpora, None)?);
    let mut rows = Vec::new();
    for variant in mode.variants() {
        let (model, log) = match variant {
            Variant::VisionOnly | Variant::Fixed(0.0) => (base_model.clone(), base_log.clone()),
            v => recipe.train_variant(corpora, v)?,
        };
        let evaluation = recipe.evaluate(&model, corpora, Some(&buckets))?;
        rows.push(AblationRow {
            variant,
            model,
            log,
            evaluation,
        });
    }
    Ok((buckets, rows))
}

/// Difficulty buckets from a vision-only evaluation.
pub fn buckets_from(vision_only: &Evaluation) -> DifficultyBuckets {
    crate::eval::difficulty_buckets(&class_scores(&vision_only.aligned))
}
