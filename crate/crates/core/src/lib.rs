//! Language-advantage debiasing for temporal action localization.
//!
//! A vision stream and three language streams per video are fused by a
//! learned per-frame gate: the model regresses how much language lowers the
//! detection loss, squashes that estimate into `[0, 1)` and adds the gated
//! language features on top of the untouched vision features. Training
//! alternates vision-only and vision-language epochs; the vision-only epoch
//! supplies the class-wise reference losses that define the regression target.

pub mod blob;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod nn;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
