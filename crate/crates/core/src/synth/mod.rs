//! Seeded synthetic corpora standing in for a video encoder and a VLM.
//!
//! Each class owns a latent prototype and one confusable partner. Vision frames
//! inside a segment blend the class prototype with its partner's (the
//! `ambiguity` knob), language streams carry the true class (`cls`), distance
//! ramps to the segment boundaries (`loc`) and a helpfulness direction (`adv`),
//! each scaled by the class `helpfulness`.

mod conflict;
mod generate;
mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

pub use conflict::inject_conflict;
pub use generate::{generate_corpus, generate_distractors, partner_of, Prototypes};
pub use io::{read_corpus, write_corpus, MANIFEST_FILE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub class: usize,
}

impl Segment {
    pub fn new(start: usize, end: usize, class: usize) -> Self {
        Segment { start, end, class }
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start..self.end).contains(&frame)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }
}

/// Checks `0 <= start < end <= frames`, `class < num_classes` and that segments
/// do not overlap.
pub fn validate_segments(gt: &[Segment], frames: usize, num_classes: usize) -> Result<()> {
    let mut sorted: Vec<&Segment> = gt.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    for s in &sorted {
        if s.start >= s.end || s.end > frames {
            return Err(Error::invalid(
                "segment",
                format!("[{}, {}) outside 0..{frames}", s.start, s.end),
            ));
        }
        if s.class >= num_classes {
            return Err(Error::invalid("segment", format!("class {} >= {num_classes}", s.class)));
        }
    }
    for w in sorted.windows(2) {
        if w[1].start < w[0].end {
            return Err(Error::invalid(
                "segment",
                format!("[{}, {}) overlaps [{}, {})", w[0].start, w[0].end, w[1].start, w[1].end),
            ));
        }
    }
    Ok(())
}

/// Per-frame class label, `None` for background. Segments must not overlap.
pub fn frame_labels(gt: &[Segment], frames: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; frames];
    for s in gt {
        for slot in &mut out[s.start..s.end.min(frames)] {
            *slot = Some(s.class);
        }
    }
    out
}

/// Per-frame covering segment, `None` for background.
pub fn covering_segments(gt: &[Segment], frames: usize) -> Vec<Option<Segment>> {
    let mut out = vec![None; frames];
    for s in gt {
        for slot in &mut out[s.start..s.end.min(frames)] {
            *slot = Some(*s);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub num_classes: usize,
    pub num_videos: usize,
    pub frames: usize,
    pub dim: usize,
    /// Per-class overlap with the confusable partner; 1 makes the pair identical.
    pub ambiguity: Vec<f64>,
    /// Per-class strength of the language signal.
    pub helpfulness: Vec<f64>,
    /// Strength of the language signal on background frames.
    pub background_helpfulness: f64,
    /// Gaussian noise on the vision stream.
    pub noise_sigma: f64,
    /// Gaussian noise on the three language streams.
    pub language_noise_sigma: f64,
    pub background_fraction: f64,
    /// Probability that a video holds a decoy: a background span whose vision
    /// is the even blend of a confusable pair, with background language.
    #[serde(default)]
    pub decoy_rate: f64,
    /// Seed of the class prototypes. Corpora meant to be trained and evaluated
    /// together must share it.
    #[serde(default)]
    pub world_seed: u64,
    /// Seed of the per-video sampling.
    pub seed: u64,
}

impl GenConfig {
    /// Default bias corpus: the first half of the classes are visually
    /// ambiguous with informative language, the second half the reverse.
    pub fn bias_corpus(num_videos: usize, seed: u64) -> Self {
        let num_classes = 8;
        let hard = |c: usize| c < num_classes / 2;
        GenConfig {
            num_classes,
            num_videos,
            frames: 256,
            dim: 32,
            ambiguity: (0..num_classes).map(|c| if hard(c) { 0.8 } else { 0.1 }).collect(),
            helpfulness: (0..num_classes).map(|c| if hard(c) { 0.9 } else { 0.2 }).collect(),
            noise_sigma: 1.5,
            language_noise_sigma: 1.0,
            background_helpfulness: 0.5,
            background_fraction: 0.5,
            decoy_rate: 0.5,
            world_seed: 0,
            seed,
        }
    }

    pub fn uniform(num_classes: usize, num_videos: usize, ambiguity: f64, helpfulness: f64, seed: u64) -> Self {
        GenConfig {
            num_classes,
            num_videos,
            frames: 64,
            dim: 8,
            ambiguity: vec![ambiguity; num_classes],
            helpfulness: vec![helpfulness; num_classes],
            noise_sigma: 1.0,
            language_noise_sigma: 1.0,
            background_helpfulness: 0.0,
            background_fraction: 0.5,
            decoy_rate: 0.0,
            world_seed: 0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::invalid("num_classes", format!("{} < 2", self.num_classes)));
        }
        if self.num_videos < 1 {
            return Err(Error::invalid("num_videos", "must be at least 1"));
        }
        if self.frames < 16 {
            return Err(Error::invalid("frames", format!("{} < 16", self.frames)));
        }
        if self.dim < 4 {
            return Err(Error::invalid("dim", format!("{} < 4", self.dim)));
        }
        for (name, values) in [("ambiguity", &self.ambiguity), ("helpfulness", &self.helpfulness)] {
            if values.len() != self.num_classes {
                return Err(Error::invalid(
                    name,
                    format!("{} entries for {} classes", values.len(), self.num_classes),
                ));
            }
            if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid(name, format!("{v} outside [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.decoy_rate) {
            return Err(Error::invalid("decoy_rate", format!("{} outside [0, 1]", self.decoy_rate)));
        }
        if !(0.0..=1.0).contains(&self.background_helpfulness) {
            return Err(Error::invalid(
                "background_helpfulness",
                format!("{} outside [0, 1]", self.background_helpfulness),
            ));
        }
        for (name, v) in [("noise_sigma", self.noise_sigma), ("language_noise_sigma", self.language_noise_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("{v} is not a finite nonnegative value")));
            }
        }
        if !(self.background_fraction > 0.0 && self.background_fraction < 1.0) {
            return Err(Error::invalid(
                "background_fraction",
                format!("{} outside (0, 1)", self.background_fraction),
            ));
        }
        Ok(())
    }
}

/// The three language streams of one video.
#[derive(Clone, Debug, PartialEq)]
pub struct LanguageBundle {
    pub cls_stream: Matrix,
    pub loc_stream: Matrix,
    pub adv_stream: Matrix,
    /// `false` once the bundle has been swapped in by [`inject_conflict`].
    pub aligned: bool,
    /// Id of the video whose streams these are, when conflict-injected.
    pub donor: Option<String>,
}

impl LanguageBundle {
    pub fn zeros(frames: usize, dim: usize) -> Self {
        LanguageBundle {
            cls_stream: Matrix::zeros(frames, dim),
            loc_stream: Matrix::zeros(frames, dim),
            adv_stream: Matrix::zeros(frames, dim),
            aligned: true,
            donor: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    pub vis: Matrix,
    pub lang: LanguageBundle,
    pub gt: Vec<Segment>,
}

impl VideoRecord {
    pub fn frames(&self) -> usize {
        self.vis.rows()
    }

    /// Distinct gt classes in first-appearance order.
    pub fn classes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for s in &self.gt {
            if !out.contains(&s.class) {
                out.push(s.class);
            }
        }
        out
    }

    /// Class covering the most frames (lowest index on ties).
    pub fn primary_class(&self) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for c in self.classes() {
            let n: usize = self.gt.iter().filter(|s| s.class == c).map(Segment::len).sum();
            if best.map_or(true, |(bn, bc)| n > bn || (n == bn && c < bc)) {
                best = Some((n, c));
            }
        }
        best.map(|(_, c)| c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub config: GenConfig,
    pub videos: Vec<VideoRecord>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    /// Copy with every language stream zeroed.
    pub fn with_zeroed_language(&self) -> Corpus {
        let mut out = self.clone();
        for v in &mut out.videos {
            v.lang = LanguageBundle::zeros(v.vis.rows(), v.vis.cols());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_names_fields() {
        let mut cfg = GenConfig::uniform(3, 2, 0.1, 0.5, 0);
        assert!(cfg.validate().is_ok());
        cfg.num_classes = 1;
        assert!(cfg.validate().unwrap_err().to_string().contains("num_classes"));
        let mut cfg = GenConfig::uniform(3, 2, 0.1, 0.5, 0);
        cfg.frames = 8;
        assert!(cfg.validate().unwrap_err().to_string().contains("frames"));
        let mut cfg = GenConfig::uniform(3, 2, 0.1, 0.5, 0);
        cfg.helpfulness.pop();
        assert!(cfg.validate().unwrap_err().to_string().contains("helpfulness"));
        let mut cfg = GenConfig::uniform(3, 2, 0.1, 0.5, 0);
        cfg.background_fraction = 1.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("background_fraction"));
    }

    #[test]
    fn segment_validation() {
        let ok = [Segment::new(0, 4, 1), Segment::new(4, 9, 0)];
        assert!(validate_segments(&ok, 10, 2).is_ok());
        assert!(validate_segments(&[Segment::new(0, 4, 1), Segment::new(3, 9, 0)], 10, 2).is_err());
        assert!(validate_segments(&[Segment::new(5, 5, 1)], 10, 2).is_err());
        assert!(validate_segments(&[Segment::new(5, 11, 1)], 10, 2).is_err());
        assert!(validate_segments(&[Segment::new(5, 8, 2)], 10, 2).is_err());
        assert_eq!(frame_labels(&ok[..1], 6), vec![Some(1), Some(1), Some(1), Some(1), None, None]);
    }
}
