use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Proposal;
use crate::nn::Matrix;
use crate::synth::{frame_labels, Segment};

/// Default number of top proposals per video inspected for hallucination.
pub const HALLUCINATION_TOP_K: usize = 10;

/// Overlap above which two proposals count as repeats of one another.
pub const REPEAT_TIOU: f64 = 0.95;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LapMode {
    /// Drop in mAP points (0 to 100 scale).
    #[default]
    Absolute,
    /// Drop as a fraction of the aligned mAP.
    Relative,
}

/// Language-bias penalty from the aligned and conflicted mAP (both in `[0, 1]`).
pub fn lap(aligned_map: f64, conflicted_map: f64, mode: LapMode) -> f64 {
    let drop = aligned_map - conflicted_map;
    match mode {
        LapMode::Absolute => 100.0 * drop,
        LapMode::Relative => {
            if aligned_map > 0.0 {
                drop / aligned_map
            } else {
                0.0
            }
        }
    }
}

/// Per-threshold LAP; the two slices must pair up.
pub fn lap_per_threshold(aligned: &[f64], conflicted: &[f64], mode: LapMode) -> Result<Vec<f64>> {
    if aligned.len() != conflicted.len() {
        return Err(Error::invalid(
            "lap",
            format!("{} aligned values vs {} conflicted", aligned.len(), conflicted.len()),
        ));
    }
    Ok(aligned.iter().zip(conflicted).map(|(a, c)| lap(*a, *c, mode)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HallucinationRates {
    /// Fraction of videos whose rounded proposal boundaries are shared with
    /// at least half of the corpus.
    pub fixed: f64,
    /// Fraction of videos repeating one segment: at least three same-class
    /// proposals with pairwise tIoU above [`REPEAT_TIOU`].
    pub infinite: f64,
}

/// Hallucination rates over the top `top_k` proposals of each video.
pub fn hallucination_rates(videos: &[(Vec<Proposal>, usize)], top_k: usize) -> HallucinationRates {
    let n = videos.len();
    if n == 0 {
        return HallucinationRates {
            fixed: 0.0,
            infinite: 0.0,
        };
    }
    let signatures: Vec<Vec<(i64, i64)>> = videos
        .iter()
        .map(|(props, _)| {
            let mut sig: Vec<(i64, i64)> = props
                .iter()
                .take(top_k)
                .map(|p| (p.start.round() as i64, p.end.round() as i64))
                .collect();
            sig.sort_unstable();
            sig
        })
        .collect();
    let mut counts: HashMap<&[(i64, i64)], usize> = HashMap::new();
    for sig in &signatures {
        if !sig.is_empty() {
            *counts.entry(sig.as_slice()).or_default() += 1;
        }
    }
    let fixed = signatures
        .iter()
        .filter(|sig| {
            let c = if sig.is_empty() { 0 } else { counts[sig.as_slice()] };
            c >= 2 && 2 * c >= n
        })
        .count();
    let infinite = videos
        .iter()
        .filter(|(props, _)| has_repeats(&props[..props.len().min(top_k)]))
        .count();
    HallucinationRates {
        fixed: fixed as f64 / n as f64,
        infinite: infinite as f64 / n as f64,
    }
}

// Looks for a clique of three mutually overlapping same-class proposals.
fn has_repeats(props: &[Proposal]) -> bool {
    let close = |a: &Proposal, b: &Proposal| a.class == b.class && a.interval().iou(&b.interval()) > REPEAT_TIOU;
    let n = props.len();
    for i in 0..n {
        for j in i + 1..n {
            if !close(&props[i], &props[j]) {
                continue;
            }
            if (j + 1..n).any(|k| close(&props[i], &props[k]) && close(&props[j], &props[k])) {
                return true;
            }
        }
    }
    false
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlaSource {
    /// Average the gate value.
    #[default]
    Lambda,
    /// Average the raw predicted advantage.
    Advantage,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlaFrames {
    /// Only frames inside a ground-truth segment of the bucket's classes.
    #[default]
    Positive,
    /// Every frame of videos containing the bucket's classes.
    All,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlaOptions {
    pub source: MlaSource,
    pub frames: MlaFrames,
}

/// Per-video gate trace used by [`mla`].
#[derive(Clone, Debug, PartialEq)]
pub struct GateTrace {
    pub lambda: Matrix,
    pub adv_pred: Matrix,
    pub gt: Vec<Segment>,
}

/// Mean language advantage over frames belonging to `classes`.
pub fn mla(traces: &[GateTrace], classes: &[usize], options: MlaOptions) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in traces {
        let values = match options.source {
            MlaSource::Lambda => &t.lambda,
            MlaSource::Advantage => &t.adv_pred,
        };
        let frames = values.rows();
        match options.frames {
            MlaFrames::Positive => {
                for (l, label) in frame_labels(&t.gt, frames).iter().enumerate() {
                    if label.is_some_and(|c| classes.contains(&c)) {
                        sum += values[(l, 0)];
                        count += 1;
                    }
                }
            }
            MlaFrames::All => {
                if t.gt.iter().any(|s| classes.contains(&s.class)) {
                    sum += values.data().iter().sum::<f64>();
                    count += frames;
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::invalid("mla", format!("no frames for classes {classes:?}")));
    }
    Ok(sum / count as f64)
}

/// Classes split into tertiles by a difficulty score (lower AP is harder).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyBuckets {
    pub easy: Vec<usize>,
    pub medium: Vec<usize>,
    pub hard: Vec<usize>,
}

impl DifficultyBuckets {
    pub fn named(&self) -> [(&'static str, &[usize]); 3] {
        [("easy", &self.easy), ("medium", &self.medium), ("hard", &self.hard)]
    }
}

/// Tertile split of classes by their vision-only AP: the lowest third is hard,
/// the highest third easy. Ties are broken by class index. With fewer than
/// three classes every class is medium.
pub fn difficulty_buckets(vision_ap: &[f64]) -> DifficultyBuckets {
    let n = vision_ap.len();
    if n < 3 {
        return DifficultyBuckets {
            medium: (0..n).collect(),
            ..Default::default()
        };
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vision_ap[a].total_cmp(&vision_ap[b]).then(a.cmp(&b)));
    let third = n / 3;
    let mut hard = order[..third].to_vec();
    let mut medium = order[third..n - third].to_vec();
    let mut easy = order[n - third..].to_vec();
    hard.sort_unstable();
    medium.sort_unstable();
    easy.sort_unstable();
    DifficultyBuckets { easy, medium, hard }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Mean top-1 score over clips.
    pub mconf: f64,
    /// Mean top-1 span as a fraction of clip length.
    pub mlen: f64,
    /// `(threshold, fraction of clips whose top-1 normalized span is below it)`.
    pub acc_at: Vec<(f64, f64)>,
    /// Clips with no proposal at all; they count as score 0 and span 0.
    pub empty_clips: usize,
}

pub const PROBE_THRESHOLDS: [f64; 3] = [0.3, 0.5, 0.7];

/// Ambiguity-probe statistics from the top-1 proposal of each clip.
pub fn probe_statistics(top: &[(Option<Proposal>, usize)]) -> Result<ProbeResult> {
    if top.is_empty() {
        return Err(Error::invalid("probe", "no clips"));
    }
    let n = top.len() as f64;
    let mut conf = 0.0;
    let mut len = 0.0;
    let mut empty = 0;
    for (p, frames) in top {
        match p {
            Some(p) => {
                conf += p.score;
                len += (p.end - p.start) / *frames as f64;
            }
            None => empty += 1,
        }
    }
    let acc_at = PROBE_THRESHOLDS
        .iter()
        .map(|&t| {
            let hits = top
                .iter()
                .filter(|(p, frames)| p.map_or(0.0, |p| (p.end - p.start) / *frames as f64) < t)
                .count();
            (t, hits as f64 / n)
        })
        .collect();
    Ok(ProbeResult {
        mconf: conf / n,
        mlen: len / n,
        acc_at,
        empty_clips: empty,
    })
}
