//! Browser bindings for three interactive views of the library: the
//! advantage-to-gate curve, a synthetic video preview and a decode/NMS/tIoU
//! explorer. The plain functions carry the logic and are tested natively;
//! the `#[wasm_bindgen]` wrappers only translate errors.

use actionvlm::eval::tiou;
use actionvlm::model::{lambda_from_advantage, nms, Proposal};
use actionvlm::nn::{Interval, Matrix};
use actionvlm::synth::{generate_corpus, GenConfig, Prototypes, Segment};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Classes in the preview corpus; pairs (0, 1) and (2, 3) are confusable.
pub const PREVIEW_CLASSES: usize = 4;

/// Gate values for `steps` advantages evenly spaced over `[lo, hi]`.
pub fn gate_curve(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let n = steps.max(2);
    let adv = Matrix::from_fn(n, 1, |i, _| lo + (hi - lo) * i as f64 / (n - 1) as f64);
    lambda_from_advantage(&adv).into_vec()
}

#[derive(Debug, Serialize)]
pub struct StreamPreview {
    pub frames: usize,
    pub classes: usize,
    pub gt: Vec<Segment>,
    /// Per frame, cosine similarity of the vision feature to each class
    /// prototype followed by the background prototype.
    pub vision: Vec<Vec<f64>>,
    /// Same for the language classification stream.
    pub language: Vec<Vec<f64>>,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn similarities(stream: &Matrix, protos: &Prototypes) -> Vec<Vec<f64>> {
    (0..stream.rows())
        .map(|l| {
            protos
                .class
                .iter()
                .chain(std::iter::once(&protos.background))
                .map(|p| cosine(stream.row(l), p))
                .collect()
        })
        .collect()
}

/// One generated video with the same ambiguity and helpfulness for every
/// class.
pub fn stream_preview(seed: u64, ambiguity: f64, helpfulness: f64) -> actionvlm::Result<StreamPreview> {
    let mut cfg = GenConfig::uniform(PREVIEW_CLASSES, 1, ambiguity, helpfulness, seed);
    cfg.frames = 64;
    cfg.dim = 16;
    let corpus = generate_corpus(&cfg)?;
    let protos = Prototypes::new(&cfg);
    let video = &corpus.videos[0];
    Ok(StreamPreview {
        frames: video.frames(),
        classes: PREVIEW_CLASSES,
        gt: video.gt.clone(),
        vision: similarities(&video.vis, &protos),
        language: similarities(&video.lang.cls_stream, &protos),
    })
}

#[derive(Debug, Serialize)]
pub struct Exploration {
    /// Proposals surviving class-wise NMS, best first.
    pub kept: Vec<Proposal>,
    /// tIoU of every input proposal with the reference interval.
    pub tiou_to_reference: Vec<f64>,
}

/// Runs NMS on `proposals` (a JSON array of `{start, end, class, score}`)
/// and measures each against `[ref_start, ref_end]`.
pub fn explore(proposals_json: &str, nms_tiou: f64, ref_start: f64, ref_end: f64) -> actionvlm::Result<Exploration> {
    let proposals: Vec<Proposal> = serde_json::from_str(proposals_json)
        .map_err(|source| actionvlm::Error::Json {
            context: "proposals".into(),
            source,
        })?;
    let reference = Interval::new(ref_start, ref_end);
    let tiou_to_reference = proposals
        .iter()
        .map(|p| tiou(p.interval(), reference))
        .collect::<actionvlm::Result<_>>()?;
    Ok(Exploration {
        kept: nms(&proposals, nms_tiou),
        tiou_to_reference,
    })
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = gateCurve)]
pub fn gate_curve_js(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    gate_curve(lo, hi, steps)
}

/// JSON-encoded [`StreamPreview`].
#[wasm_bindgen(js_name = streamPreview)]
pub fn stream_preview_js(seed: u32, ambiguity: f64, helpfulness: f64) -> Result<String, JsError> {
    let preview = stream_preview(seed as u64, ambiguity, helpfulness).map_err(js_err)?;
    serde_json::to_string(&preview).map_err(js_err)
}

/// JSON-encoded [`Exploration`].
#[wasm_bindgen(js_name = explore)]
pub fn explore_js(proposals_json: &str, nms_tiou: f64, ref_start: f64, ref_end: f64) -> Result<String, JsError> {
    let result = explore(proposals_json, nms_tiou, ref_start, ref_end).map_err(js_err)?;
    serde_json::to_string(&result).map_err(js_err)
}
