use super::{Corpus, GenConfig, LanguageBundle, Segment, VideoRecord};
use crate::error::Result;
use crate::nn::{Matrix, Rng};

const SALT_PROTOTYPES: u64 = 0x5052_4f54;
const SALT_VIDEOS: u64 = 0x5649_4445;
const SALT_DISTRACTORS: u64 = 0x4449_5354;

/// Designated confusable partner: classes pair up as (0,1), (2,3), ...; with an
/// odd count the last class pairs with its predecessor.
pub fn partner_of(class: usize, num_classes: usize) -> usize {
    let p = class ^ 1;
    if p < num_classes {
        p
    } else {
        class - 1
    }
}

/// Latent vectors every stream of a corpus is built from. A pure function of
/// `(world_seed, num_classes, dim)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Prototypes {
    pub class: Vec<Vec<f64>>,
    pub background: Vec<f64>,
    /// Constant direction (entries +-1) carrying helpfulness in the adv stream.
    pub adv_direction: Vec<f64>,
}

impl Prototypes {
    pub fn new(cfg: &GenConfig) -> Self {
        let mut rng = Rng::new(cfg.world_seed).fork(SALT_PROTOTYPES);
        let d = cfg.dim;
        let class = (0..cfg.num_classes)
            .map(|_| (0..d).map(|_| rng.normal()).collect())
            .collect();
        let background = (0..d).map(|_| rng.normal()).collect();
        let adv_direction = (0..d)
            .map(|_| if rng.uniform() < 0.5 { -1.0 } else { 1.0 })
            .collect();
        Prototypes {
            class,
            background,
            adv_direction,
        }
    }

    /// Mean in-segment vision feature of `class` at the given ambiguity.
    pub fn vision_mean(&self, class: usize, ambiguity: f64) -> Vec<f64> {
        let partner = partner_of(class, self.class.len());
        let w = 0.5 * ambiguity;
        self.class[class]
            .iter()
            .zip(&self.class[partner])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect()
    }
}

/// Frames per unit of the boundary-distance ramp in the loc stream.
pub(crate) fn ramp_scale(frames: usize) -> f64 {
    (frames as f64 / 8.0).max(1.0)
}

fn min_segment_len(frames: usize) -> usize {
    (frames / 32).max(2)
}

/// Random composition of `total` into `parts` nonnegative integers.
fn composition(rng: &mut Rng, total: usize, parts: usize) -> Vec<usize> {
    let mut cuts: Vec<usize> = (0..parts - 1).map(|_| rng.index(total + 1)).collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts {
        out.push(c - prev);
        prev = c;
    }
    out.push(total - prev);
    out
}

/// Non-overlapping segments of a single class, separated by at least one
/// background frame.
fn layout(rng: &mut Rng, cfg: &GenConfig, class: usize) -> Vec<Segment> {
    let frames = cfg.frames;
    let min_len = min_segment_len(frames);
    let action = (((1.0 - cfg.background_fraction) * frames as f64).round() as usize).clamp(min_len, frames - 2);
    let background = frames - action;
    let max_segments = 3.min(action / min_len).min(background + 1).max(1);
    let n = 1 + rng.index(max_segments);
    let lengths: Vec<usize> = composition(rng, action - n * min_len, n)
        .into_iter()
        .map(|x| x + min_len)
        .collect();
    let gaps = composition(rng, background - (n - 1), n + 1);
    let mut out = Vec::with_capacity(n);
    let mut t = gaps[0];
    for (i, len) in lengths.into_iter().enumerate() {
        out.push(Segment::new(t, t + len, class));
        t += len + gaps[i + 1] + 1;
    }
    out
}

/// Optional decoy span inside one background gap, at least one frame away
/// from every segment. Draws from `rng` only when decoys are enabled.
fn decoy(rng: &mut Rng, cfg: &GenConfig, gt: &[Segment]) -> Option<Segment> {
    if cfg.decoy_rate <= 0.0 || rng.uniform() >= cfg.decoy_rate {
        return None;
    }
    let min_len = min_segment_len(cfg.frames);
    let mut gaps = Vec::new();
    let mut t = 0;
    for s in gt {
        gaps.push((t, s.start));
        t = s.end;
    }
    gaps.push((t, cfg.frames));
    let eligible: Vec<(usize, usize)> = gaps.into_iter().filter(|(a, b)| b - a >= min_len + 2).collect();
    if eligible.is_empty() {
        return None;
    }
    let (a, b) = eligible[rng.index(eligible.len())];
    let len = min_len + rng.index(b - a - 2 - min_len + 1);
    let start = a + 1 + rng.index(b - a - 2 - len + 1);
    Some(Segment::new(start, start + len, rng.index(cfg.num_classes)))
}

fn noise(rng: &mut Rng, frames: usize, dim: usize, sigma: f64) -> Matrix {
    Matrix::from_fn(frames, dim, |_, _| sigma * rng.normal())
}

fn vision_stream(
    rng: &mut Rng,
    cfg: &GenConfig,
    protos: &Prototypes,
    gt: &[Segment],
    decoy: Option<Segment>,
    ambiguity: impl Fn(usize) -> f64,
) -> Matrix {
    let mut vis = noise(rng, cfg.frames, cfg.dim, cfg.noise_sigma);
    let labels = super::frame_labels(gt, cfg.frames);
    let means: Vec<Vec<f64>> = (0..cfg.num_classes)
        .map(|c| protos.vision_mean(c, ambiguity(c)))
        .collect();
    let decoy_mean = decoy.map(|d| protos.vision_mean(d.class, 1.0));
    for (l, label) in labels.iter().enumerate() {
        let mean = match (label, decoy.filter(|d| d.contains(l))) {
            (Some(c), _) => &means[*c],
            (None, Some(_)) => decoy_mean.as_ref().expect("decoy mean"),
            (None, None) => &protos.background,
        };
        for (v, m) in vis.row_mut(l).iter_mut().zip(mean) {
            *v += m;
        }
    }
    vis
}

fn language_bundle(rng: &mut Rng, cfg: &GenConfig, protos: &Prototypes, gt: &[Segment]) -> LanguageBundle {
    let (frames, dim, sigma) = (cfg.frames, cfg.dim, cfg.language_noise_sigma);
    let mut cls_stream = noise(rng, frames, dim, sigma);
    let mut loc_stream = noise(rng, frames, dim, sigma);
    let mut adv_stream = noise(rng, frames, dim, sigma);
    let scale = ramp_scale(frames);
    let hb = cfg.background_helpfulness;
    if hb > 0.0 {
        for (l, label) in super::frame_labels(gt, frames).iter().enumerate() {
            if label.is_some() {
                continue;
            }
            for (v, p) in cls_stream.row_mut(l).iter_mut().zip(&protos.background) {
                *v += hb * p;
            }
            for (v, u) in adv_stream.row_mut(l).iter_mut().zip(&protos.adv_direction) {
                *v += hb * u;
            }
        }
    }
    for s in gt {
        let h = cfg.helpfulness[s.class];
        for l in s.start..s.end {
            for (v, p) in cls_stream.row_mut(l).iter_mut().zip(&protos.class[s.class]) {
                *v += h * p;
            }
            loc_stream[(l, 0)] += h * (l - s.start) as f64 / scale;
            loc_stream[(l, 1)] += h * (s.end - l) as f64 / scale;
            for (v, u) in adv_stream.row_mut(l).iter_mut().zip(&protos.adv_direction) {
                *v += h * u;
            }
        }
    }
    LanguageBundle {
        cls_stream,
        loc_stream,
        adv_stream,
        aligned: true,
        donor: None,
    }
}

/// Seeded corpus of single-class videos with 1-3 segments each.
pub fn generate_corpus(cfg: &GenConfig) -> Result<Corpus> {
    cfg.validate()?;
    let protos = Prototypes::new(cfg);
    let base = Rng::new(cfg.seed).fork(SALT_VIDEOS);
    let videos = (0..cfg.num_videos)
        .map(|i| {
            let mut rng = base.fork(i as u64 + 1);
            let class = rng.index(cfg.num_classes);
            let gt = layout(&mut rng, cfg, class);
            let decoy = decoy(&mut rng, cfg, &gt);
            let vis = vision_stream(&mut rng, cfg, &protos, &gt, decoy, |c| cfg.ambiguity[c]);
            let lang = language_bundle(&mut rng, cfg, &protos, &gt);
            VideoRecord {
                id: format!("v{i:05}"),
                vis,
                lang,
                gt,
            }
        })
        .collect();
    Ok(Corpus {
        config: cfg.clone(),
        videos,
    })
}

/// Distractor clips: a span whose vision frames are the midpoint of a
/// confusable pair (maximal ambiguity) but no ground-truth action. Language
/// streams are generated for the empty annotation.
pub fn generate_distractors(cfg: &GenConfig, count: usize) -> Result<Corpus> {
    cfg.validate()?;
    let protos = Prototypes::new(cfg);
    let base = Rng::new(cfg.seed).fork(SALT_DISTRACTORS);
    let videos = (0..count)
        .map(|i| {
            let mut rng = base.fork(i as u64 + 1);
            let class = rng.index(cfg.num_classes);
            let spans = layout(&mut rng, cfg, class);
            let vis = vision_stream(&mut rng, cfg, &protos, &spans, None, |_| 1.0);
            let lang = language_bundle(&mut rng, cfg, &protos, &[]);
            VideoRecord {
                id: format!("d{i:05}"),
                vis,
                lang,
                gt: Vec::new(),
            }
        })
        .collect();
    let mut config = cfg.clone();
    config.num_videos = count;
    Ok(Corpus { config, videos })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::validate_segments;

    #[test]
    fn layouts_are_valid_across_sizes() {
        for frames in [16, 17, 40, 256] {
            for bg in [0.05, 0.5, 0.95] {
                let mut cfg = GenConfig::uniform(3, 1, 0.0, 0.0, 9);
                cfg.frames = frames;
                cfg.background_fraction = bg;
                let mut rng = Rng::new(frames as u64);
                for _ in 0..200 {
                    let gt = layout(&mut rng, &cfg, 2);
                    assert!(!gt.is_empty());
                    validate_segments(&gt, frames, 3).unwrap();
                }
            }
        }
    }

    #[test]
    fn partners_pair_up() {
        assert_eq!(partner_of(0, 8), 1);
        assert_eq!(partner_of(1, 8), 0);
        assert_eq!(partner_of(6, 8), 7);
        assert_eq!(partner_of(4, 5), 3);
    }

    #[test]
    fn distractors_have_no_gt_and_blend_pairs() {
        let cfg = GenConfig::uniform(4, 1, 0.0, 1.0, 3);
        let d = generate_distractors(&cfg, 5).unwrap();
        assert_eq!(d.len(), 5);
        assert!(d.videos.iter().all(|v| v.gt.is_empty() && v.lang.aligned));
    }

    fn nearest(x: &[f64], protos: &[Vec<f64>]) -> usize {
        let dist = |p: &Vec<f64>| x.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        (0..protos.len())
            .min_by(|&a, &b| dist(&protos[a]).total_cmp(&dist(&protos[b])))
            .unwrap()
    }

    fn best_dot(x: &[f64], protos: &[Vec<f64>]) -> usize {
        let score = |p: &Vec<f64>| {
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() / norm
        };
        (0..protos.len())
            .max_by(|&a, &b| score(&protos[a]).total_cmp(&score(&protos[b])))
            .unwrap()
    }

    fn language_accuracy(corpus: &Corpus) -> f64 {
        let protos = Prototypes::new(&corpus.config);
        let (mut hit, mut n) = (0usize, 0usize);
        for v in &corpus.videos {
            for s in &v.gt {
                for l in s.start..s.end {
                    hit += (best_dot(v.lang.cls_stream.row(l), &protos.class) == s.class) as usize;
                    n += 1;
                }
            }
        }
        hit as f64 / n as f64
    }

    #[test]
    fn same_seed_same_corpus() {
        let mut cfg = GenConfig::bias_corpus(4, 11);
        cfg.decoy_rate = 0.5;
        let a = generate_corpus(&cfg).unwrap();
        let b = generate_corpus(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 12;
        assert_ne!(a, generate_corpus(&cfg).unwrap());
    }

    #[test]
    fn prototypes_depend_only_on_world_seed() {
        let a = GenConfig::uniform(4, 2, 0.3, 0.5, 1);
        let mut b = GenConfig::uniform(4, 9, 0.9, 0.1, 2);
        assert_eq!(Prototypes::new(&a), Prototypes::new(&b));
        b.world_seed = 5;
        assert_ne!(Prototypes::new(&a), Prototypes::new(&b));
    }

    #[test]
    fn zero_helpfulness_language_is_pure_noise() {
        let cfg = GenConfig::uniform(4, 20, 0.0, 0.0, 7);
        let corpus = generate_corpus(&cfg).unwrap();
        let n = (cfg.frames * cfg.num_videos) as f64;
        let bound = 3.0 * cfg.language_noise_sigma / n.sqrt();
        for d in 0..cfg.dim {
            for pick in [0, 1] {
                let mean = corpus
                    .videos
                    .iter()
                    .map(|v| {
                        let m = if pick == 0 { &v.lang.cls_stream } else { &v.lang.loc_stream };
                        (0..m.rows()).map(|l| m[(l, d)]).sum::<f64>()
                    })
                    .sum::<f64>()
                    / n;
                assert!(mean.abs() < bound, "stream {pick} dim {d}: mean {mean} outside {bound}");
            }
        }
    }

    #[test]
    fn unambiguous_vision_is_nearest_prototype_separable() {
        let mut cfg = GenConfig::uniform(6, 20, 0.0, 0.0, 3);
        cfg.dim = 32;
        cfg.noise_sigma = 0.5;
        let corpus = generate_corpus(&cfg).unwrap();
        let protos = Prototypes::new(&cfg);
        let (mut hit, mut n) = (0usize, 0usize);
        for v in &corpus.videos {
            for s in &v.gt {
                for l in s.start..s.end {
                    hit += (nearest(v.vis.row(l), &protos.class) == s.class) as usize;
                    n += 1;
                }
            }
        }
        assert!(hit as f64 >= 0.99 * n as f64, "{hit}/{n}");
    }

    #[test]
    fn full_ambiguity_makes_partners_identical() {
        let protos = Prototypes::new(&GenConfig::uniform(4, 1, 0.0, 0.0, 0));
        assert_eq!(protos.vision_mean(0, 0.0), protos.class[0]);
        let a = protos.vision_mean(2, 1.0);
        let b = protos.vision_mean(3, 1.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn language_accuracy_rises_with_helpfulness() {
        let mut prev = 0.0;
        for h in [0.1, 0.3, 0.6, 1.0] {
            let mut cfg = GenConfig::uniform(4, 12, 0.0, h, 5);
            cfg.language_noise_sigma = 2.0;
            let acc = language_accuracy(&generate_corpus(&cfg).unwrap());
            assert!(acc > prev, "h {h}: {acc} <= {prev}");
            prev = acc;
        }
    }

    #[test]
    fn conflicted_language_points_elsewhere() {
        let cfg = GenConfig::uniform(4, 24, 0.0, 1.0, 8);
        let corpus = generate_corpus(&cfg).unwrap();
        assert!(language_accuracy(&corpus) > 0.9);
        let conflicted = super::super::inject_conflict(&corpus, &mut Rng::new(4)).unwrap();
        assert!(language_accuracy(&conflicted) <= 1.0 / 4.0 + 0.05);
        for (a, b) in corpus.videos.iter().zip(&conflicted.videos) {
            assert_eq!(a.vis, b.vis);
            assert_eq!(a.gt, b.gt);
            assert!(!b.lang.aligned);
        }
    }

    #[test]
    fn decoys_sit_inside_background() {
        let mut cfg = GenConfig::bias_corpus(1, 0);
        cfg.decoy_rate = 1.0;
        let mut rng = Rng::new(21);
        let mut placed = 0;
        for _ in 0..300 {
            let gt = layout(&mut rng, &cfg, 1);
            if let Some(d) = decoy(&mut rng, &cfg, &gt) {
                placed += 1;
                assert!(d.len() >= min_segment_len(cfg.frames) && d.end <= cfg.frames);
                for s in &gt {
                    assert!(d.end < s.start || d.start > s.end, "{d:?} touches {s:?}");
                }
            }
        }
        assert!(placed > 250);
        cfg.decoy_rate = 0.0;
        let before = rng.clone();
        assert!(decoy(&mut rng, &cfg, &[]).is_none());
        assert_eq!(rng, before);
    }
}
