use std::path::Path;
use std::time::Instant;

use super::log::{EpochLog, Phase, TrainLog};
use super::loss::{advantage_loss, detection_loss, target_advantage};
use super::table::ClasswiseLossTable;
use super::{LossBreakdown, TrainConfig};
use crate::blob;
use crate::error::{Error, Result};
use crate::model::{template_loss, Forward, Fusion, Inputs, Model, ModelConfig, OutputGrads};
use crate::nn::{Adam, Matrix, Rng};
use crate::synth::{Corpus, VideoRecord};

/// Per-sample losses of one step, kept for replaying the bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTrace {
    pub video: usize,
    pub classes: Vec<usize>,
    pub total: f64,
    pub dh: f64,
    pub tg: f64,
    pub adv: f64,
    pub mean_lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochTrace {
    pub epoch: usize,
    pub phase: Phase,
    pub samples: Vec<SampleTrace>,
}

impl EpochTrace {
    fn summary(&self, wall_ms: u64) -> EpochLog {
        let n = self.samples.len().max(1) as f64;
        let mean = |f: fn(&SampleTrace) -> f64| self.samples.iter().map(f).sum::<f64>() / n;
        EpochLog {
            epoch: self.epoch,
            phase: self.phase,
            total: mean(|s| s.total),
            dh: mean(|s| s.dh),
            tg: mean(|s| s.tg),
            adv: mean(|s| s.adv),
            mean_lambda: mean(|s| s.mean_lambda),
            wall_ms,
        }
    }
}

/// Model plus optimizer plus schedule position.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: Model,
    pub adam: Adam,
    pub config: TrainConfig,
    pub epochs_done: usize,
    /// Table and the epoch index that produced it.
    table: Option<(usize, ClasswiseLossTable)>,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Trainer {
            adam: Adam::new(config.adam()),
            model,
            config,
            epochs_done: 0,
            table: None,
        })
    }

    /// Learned gating alternates phases; fixed and language-only variants run
    /// every epoch on fused features.
    pub fn alternates(&self) -> bool {
        self.model.config.fusion == Fusion::Learned
    }

    pub fn table(&self) -> Option<&ClasswiseLossTable> {
        self.table.as_ref().map(|(_, t)| t)
    }

    pub fn next_phase(&self) -> Phase {
        if self.alternates() && self.epochs_done % 2 == 0 {
            Phase::VisionOnly
        } else {
            Phase::VisionLanguage
        }
    }

    fn traversal(&self, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        Rng::new(self.config.seed)
            .fork(self.epochs_done as u64 + 1)
            .shuffle(&mut order);
        order
    }

    fn step(&mut self, phase: Phase, fwd: &Forward, grads: &OutputGrads) {
        self.model.state.zero_grad();
        self.model.backward(fwd, grads);
        let learned = self.alternates();
        let active: Vec<bool> = self
            .model
            .state
            .named_params()
            .iter()
            .map(|(name, _)| match phase {
                Phase::VisionOnly => !(name.starts_with("adv_fc") || name.starts_with("tmpl_out")),
                Phase::VisionLanguage => learned || !name.starts_with("adv_fc"),
            })
            .collect();
        let mut params = self.model.state.params_mut();
        self.adam.step_active(&mut params, &active);
    }

    /// Vision-only loss of one video (no language read) with its gradients.
    pub fn vision_loss(&self, video: &VideoRecord) -> Result<(f64, Forward, OutputGrads)> {
        let fwd = self.model.forward(Inputs::VisionOnly(&video.vis))?;
        let det = detection_loss(&fwd.outputs, &video.gt, self.config.lambda_loc, self.config.focal())?;
        let grads = OutputGrads {
            cls_logits: det.dlogits,
            offsets: det.doffsets,
            tmpl_logits: None,
            adv_pred: None,
        };
        Ok((det.loss, fwd, grads))
    }

    /// Total vision-language objective of one video. Advantage targets enter
    /// as constants.
    pub fn vision_language_loss(
        &self,
        video: &VideoRecord,
        table: Option<&ClasswiseLossTable>,
    ) -> Result<(LossBreakdown, Forward, OutputGrads)> {
        let cfg = &self.config;
        let fwd = self.model.forward(Inputs::Fused {
            vis: &video.vis,
            lang: &video.lang,
        })?;
        let det = detection_loss(&fwd.outputs, &video.gt, cfg.lambda_loc, cfg.focal())?;
        let (tg, mut dtmpl) = template_loss(&fwd.outputs.tmpl_logits, &video.gt)?;
        dtmpl.scale(cfg.lambda_tg);
        let (adv, dadv) = if self.alternates() {
            let table = table.ok_or_else(|| Error::Schedule("vision-language epoch without a loss table".into()))?;
            let mut frame_losses = det.per_frame.clone();
            if cfg.normalize_frame_loss {
                frame_losses.scale(1.0 / det.positives as f64);
            }
            let (targets, mask) = target_advantage(table, &frame_losses, &video.gt)?;
            let (adv, mut g) = advantage_loss(&fwd.outputs.adv_pred, &targets, &mask)?;
            g.scale(cfg.lambda_adv);
            (adv, Some(g))
        } else {
            (0.0, None)
        };
        let breakdown = LossBreakdown {
            total: LossBreakdown::compose(det.loss, tg, adv, cfg),
            dh: det.loss,
            tg,
            adv,
            per_frame_vl: det.per_frame,
            positives: det.positives,
        };
        let grads = OutputGrads {
            cls_logits: det.dlogits,
            offsets: det.doffsets,
            tmpl_logits: Some(dtmpl),
            adv_pred: dadv,
        };
        Ok((breakdown, fwd, grads))
    }

    /// One pass over the corpus on vision features only; returns the fresh
    /// class-wise loss table.
    pub fn vision_only_epoch(&mut self, corpus: &Corpus) -> Result<(ClasswiseLossTable, EpochTrace)> {
        if corpus.is_empty() {
            return Err(Error::invalid("corpus", "empty"));
        }
        let mut table = ClasswiseLossTable::new(self.model.config.num_classes);
        let mut samples = Vec::with_capacity(corpus.len());
        for i in self.traversal(corpus.len()) {
            let video = &corpus.videos[i];
            let (loss, fwd, grads) = self.vision_loss(video)?;
            let classes = video.classes();
            table.record(&classes, loss);
            self.step(Phase::VisionOnly, &fwd, &grads);
            samples.push(SampleTrace {
                video: i,
                classes,
                total: loss,
                dh: loss,
                tg: 0.0,
                adv: 0.0,
                mean_lambda: 0.0,
            });
        }
        let trace = EpochTrace {
            epoch: self.epochs_done,
            phase: Phase::VisionOnly,
            samples,
        };
        self.table = Some((self.epochs_done, table.clone()));
        self.epochs_done += 1;
        Ok((table, trace))
    }

    /// One pass over the corpus on fused features with the full objective.
    /// Learned gating requires the table of the immediately preceding epoch.
    pub fn vision_language_epoch(&mut self, corpus: &Corpus) -> Result<EpochTrace> {
        if corpus.is_empty() {
            return Err(Error::invalid("corpus", "empty"));
        }
        let table = if self.alternates() {
            match self.table.take() {
                Some((epoch, t)) if epoch + 1 == self.epochs_done => Some(t),
                Some((epoch, _)) => {
                    return Err(Error::Schedule(format!(
                        "loss table from epoch {epoch} is stale at epoch {}",
                        self.epochs_done
                    )))
                }
                None => return Err(Error::Schedule("vision-language epoch without a loss table".into())),
            }
        } else {
            None
        };
        let mut samples = Vec::with_capacity(corpus.len());
        for i in self.traversal(corpus.len()) {
            let video = &corpus.videos[i];
            let (b, fwd, grads) = self.vision_language_loss(video, table.as_ref())?;
            self.step(Phase::VisionLanguage, &fwd, &grads);
            samples.push(SampleTrace {
                video: i,
                classes: video.classes(),
                total: b.total,
                dh: b.dh,
                tg: b.tg,
                adv: b.adv,
                mean_lambda: fwd.outputs.lambda.mean(),
            });
        }
        let trace = EpochTrace {
            epoch: self.epochs_done,
            phase: Phase::VisionLanguage,
            samples,
        };
        self.epochs_done += 1;
        Ok(trace)
    }

    /// Runs the next epoch of the schedule.
    pub fn run_epoch(&mut self, corpus: &Corpus) -> Result<(EpochLog, EpochTrace)> {
        let t0 = Instant::now();
        let trace = match self.next_phase() {
            Phase::VisionOnly => self.vision_only_epoch(corpus)?.1,
            Phase::VisionLanguage => self.vision_language_epoch(corpus)?,
        };
        let wall = t0.elapsed().as_millis() as u64;
        Ok((trace.summary(wall), trace))
    }

    pub fn train(&mut self, corpus: &Corpus, epochs: usize) -> Result<TrainLog> {
        if epochs % 2 != 0 {
            return Err(Error::invalid("epochs", format!("{epochs} is odd; phases alternate 1:1")));
        }
        let mut log = TrainLog::default();
        for _ in 0..epochs {
            log.epochs.push(self.run_epoch(corpus)?.0);
        }
        Ok(log)
    }

    /// Saves Adam moments and the schedule position next to a checkpoint.
    pub fn write_optimizer_state(&self, path: &Path) -> Result<()> {
        let step = Matrix::filled(1, 1, self.adam.step as f64);
        let done = Matrix::filled(1, 1, self.epochs_done as f64);
        let mut entries: Vec<(String, &Matrix)> = vec![("step".into(), &step), ("epochs_done".into(), &done)];
        let names: Vec<String> = self.model.state.named_params().into_iter().map(|(n, _)| n).collect();
        for (i, name) in names.iter().enumerate() {
            if let (Some(m), Some(v)) = (self.adam.first.get(i), self.adam.second.get(i)) {
                entries.push((format!("m.{name}"), m));
                entries.push((format!("v.{name}"), v));
            }
        }
        blob::write_file(path, &blob::encode_named(&entries))
    }

    pub fn read_optimizer_state(&mut self, path: &Path) -> Result<()> {
        let entries = blob::decode_named(&blob::read_file(path)?, path)?;
        let scalar = |name: &str| -> Result<f64> {
            entries
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| m[(0, 0)])
                .ok_or_else(|| Error::invalid("optimizer state", format!("missing {name}")))
        };
        self.adam.step = scalar("step")? as u64;
        self.epochs_done = scalar("epochs_done")? as usize;
        if self.epochs_done % 2 != 0 {
            return Err(Error::Schedule(format!("cannot resume after odd epoch count {}", self.epochs_done)));
        }
        self.adam.first.clear();
        self.adam.second.clear();
        let names: Vec<String> = self.model.state.named_params().into_iter().map(|(n, _)| n).collect();
        for name in names {
            let find = |key: String| entries.iter().find(|(n, _)| *n == key).map(|(_, m)| m.clone());
            match (find(format!("m.{name}")), find(format!("v.{name}"))) {
                (Some(m), Some(v)) => {
                    self.adam.first.push(m);
                    self.adam.second.push(v);
                }
                _ if self.adam.step == 0 => {}
                _ => return Err(Error::invalid("optimizer state", format!("missing moments for {name}"))),
            }
        }
        self.table = None;
        Ok(())
    }
}

/// Trains a fresh model for `train_cfg.epochs` epochs.
pub fn fit(corpus: &Corpus, model_cfg: &ModelConfig, train_cfg: &TrainConfig) -> Result<(Model, TrainLog)> {
    let mut trainer = Trainer::new(Model::new(model_cfg.clone())?, train_cfg.clone())?;
    let log = trainer.train(corpus, train_cfg.epochs)?;
    Ok((trainer.model, log))
}
