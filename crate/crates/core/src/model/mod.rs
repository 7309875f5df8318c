//! Gated fusion network: advantage regressor, language gate, residual
//! aggregation, convolutional detection head and template head, plus
//! proposal decoding and NMS.

mod checkpoint;
mod config;
mod decode;
mod net;

pub use checkpoint::{encode_state, read_checkpoint, sidecar_path, write_checkpoint};
pub use config::{Fusion, ModelConfig};
pub use decode::{decode_proposals, detect, nms, proposal_order, template_loss, Proposal};
pub use net::{
    aggregate, head_forward, lambda_from_advantage, predict_advantage, FrameOutputs, Forward, Inputs, Layer, Model,
    ModelState, OutputGrads,
};
