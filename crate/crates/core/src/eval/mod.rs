//! Detection metrics and language-bias diagnostics.

mod ap;
mod bias;
mod report;
mod run;

pub use ap::{average_precision, map_at, tiou, MapResult, VideoDetections, DEFAULT_THRESHOLDS};
pub use bias::{
    difficulty_buckets, hallucination_rates, lap, lap_per_threshold, mla, probe_statistics, DifficultyBuckets,
    GateTrace, HallucinationRates, LapMode, MlaFrames, MlaOptions, MlaSource, ProbeResult, HALLUCINATION_TOP_K,
    PROBE_THRESHOLDS, REPEAT_TIOU,
};
pub use report::{validate_report_value, MetricsReport};
pub use run::{
    ambiguity_probe, class_scores, detections, evaluate, model_lap, run_model, run_model_vision_only, EvalOptions,
    Evaluation, VideoResult,
};
