use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ap::{map_at, MapResult, VideoDetections, DEFAULT_THRESHOLDS};
use super::bias::{
    difficulty_buckets, hallucination_rates, lap, mla, probe_statistics, DifficultyBuckets, GateTrace,
    LapMode, MlaOptions, ProbeResult, HALLUCINATION_TOP_K,
};
use super::report::MetricsReport;
use crate::error::{Error, Result};
use crate::model::{detect, Inputs, Model, Proposal};
use crate::synth::Corpus;

/// Model predictions for one video.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoResult {
    pub id: String,
    pub frames: usize,
    /// After NMS, by descending score.
    pub proposals: Vec<Proposal>,
    pub gate: GateTrace,
}

/// Runs the model on every video with its language bundle.
pub fn run_model(model: &Model, corpus: &Corpus) -> Result<Vec<VideoResult>> {
    run_with(model, corpus, false)
}

/// Runs the model with language removed from the inputs entirely.
pub fn run_model_vision_only(model: &Model, corpus: &Corpus) -> Result<Vec<VideoResult>> {
    run_with(model, corpus, true)
}

fn run_with(model: &Model, corpus: &Corpus, vision_only: bool) -> Result<Vec<VideoResult>> {
    corpus
        .videos
        .iter()
        .map(|v| {
            let inputs = if vision_only {
                Inputs::VisionOnly(&v.vis)
            } else {
                Inputs::Fused {
                    vis: &v.vis,
                    lang: &v.lang,
                }
            };
            let out = model.predict(inputs)?;
            Ok(VideoResult {
                id: v.id.clone(),
                frames: v.frames(),
                proposals: detect(&out, &model.config),
                gate: GateTrace {
                    lambda: out.lambda,
                    adv_pred: out.adv_pred,
                    gt: v.gt.clone(),
                },
            })
        })
        .collect()
}

pub fn detections(results: &[VideoResult]) -> Vec<VideoDetections> {
    results
        .iter()
        .map(|r| VideoDetections {
            proposals: r.proposals.clone(),
            gt: r.gate.gt.clone(),
        })
        .collect()
}

/// LAP of `model` between an aligned corpus and its conflicted twin.
pub fn model_lap(model: &Model, aligned: &Corpus, conflicted: &Corpus, thresholds: &[f64], mode: LapMode) -> Result<f64> {
    if aligned.len() != conflicted.len() {
        return Err(Error::invalid(
            "lap",
            format!("aligned corpus has {} videos, conflicted {}", aligned.len(), conflicted.len()),
        ));
    }
    let c = model.config.num_classes;
    let a = map_at(&detections(&run_model(model, aligned)?), thresholds, c);
    let b = map_at(&detections(&run_model(model, conflicted)?), thresholds, c);
    Ok(lap(a.average, b.average, mode))
}

/// Top-1 statistics of the model on action-free distractor clips.
pub fn ambiguity_probe(model: &Model, clips: &Corpus) -> Result<ProbeResult> {
    let top: Vec<(Option<Proposal>, usize)> = run_model(model, clips)?
        .into_iter()
        .map(|r| (r.proposals.first().copied(), r.frames))
        .collect();
    probe_statistics(&top)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub thresholds: Vec<f64>,
    pub top_k: usize,
    pub lap_mode: LapMode,
    pub mla: MlaOptions,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            top_k: HALLUCINATION_TOP_K,
            lap_mode: LapMode::Absolute,
            mla: MlaOptions::default(),
        }
    }
}

/// Everything computed by [`evaluate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub aligned: MapResult,
    pub conflicted: Option<MapResult>,
    pub buckets: DifficultyBuckets,
    pub results: Vec<VideoResult>,
}

/// Full evaluation of one model.
///
/// `buckets` should come from a vision-only baseline; when absent they are
/// derived from this model's own predictions with language removed.
pub fn evaluate(
    model: &Model,
    corpus: &Corpus,
    conflicted: Option<&Corpus>,
    probe: Option<&Corpus>,
    buckets: Option<&DifficultyBuckets>,
    opts: &EvalOptions,
) -> Result<Evaluation> {
    let c = model.config.num_classes;
    let results = run_model(model, corpus)?;
    let aligned = map_at(&detections(&results), &opts.thresholds, c);

    let conflicted_map = match conflicted {
        Some(other) => {
            if other.len() != corpus.len() {
                return Err(Error::invalid(
                    "lap",
                    format!("aligned corpus has {} videos, conflicted {}", corpus.len(), other.len()),
                ));
            }
            Some(map_at(&detections(&run_model(model, other)?), &opts.thresholds, c))
        }
        None => None,
    };

    let buckets = match buckets {
        Some(b) => b.clone(),
        None => {
            let vis = map_at(&detections(&run_model_vision_only(model, corpus)?), &opts.thresholds, c);
            difficulty_buckets(&class_scores(&vis))
        }
    };
    let traces: Vec<GateTrace> = results.iter().map(|r| r.gate.clone()).collect();
    let mut mla_per_bucket = BTreeMap::new();
    for (name, classes) in buckets.named() {
        // Buckets with no positive frames in this corpus are left out.
        if let Ok(v) = mla(&traces, classes, opts.mla) {
            mla_per_bucket.insert(name.to_string(), v);
        }
    }

    let lists: Vec<(Vec<Proposal>, usize)> = results.iter().map(|r| (r.proposals.clone(), r.frames)).collect();
    let rates = hallucination_rates(&lists, opts.top_k);
    let probe = probe.map(|clips| ambiguity_probe(model, clips)).transpose()?;

    let report = MetricsReport {
        map_per_threshold: aligned.thresholds.iter().copied().zip(aligned.per_threshold.iter().copied()).collect(),
        map_avg: aligned.average,
        lap: conflicted_map.as_ref().map(|m| lap(aligned.average, m.average, opts.lap_mode)),
        fixed_rate: rates.fixed,
        infinite_rate: rates.infinite,
        mla_per_bucket,
        mconf: probe.as_ref().map(|p| p.mconf),
        mlen: probe.as_ref().map(|p| p.mlen),
        acc_at: probe.map(|p| p.acc_at).unwrap_or_default(),
    };
    Ok(Evaluation {
        report,
        aligned,
        conflicted: conflicted_map,
        buckets,
        results,
    })
}

/// Threshold-averaged AP per class; classes without ground truth score 0.
pub fn class_scores(map: &MapResult) -> Vec<f64> {
    map.class_average().into_iter().map(|a| a.unwrap_or(0.0)).collect()
}
