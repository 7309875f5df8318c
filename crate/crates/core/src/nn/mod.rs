//! Dense numeric kernels with exact reverse-mode gradients.

mod gradcheck;
mod loss;
mod matrix;
mod ops;
mod optim;
mod rng;

pub use gradcheck::{grad_check, DEFAULT_STEP};
pub use loss::{cross_entropy, diou_loss_1d, focal_loss, focal_loss_logit, focal_loss_with_grad, mse, FocalParams, Interval, PROB_EPS};
pub use matrix::{Matrix, Param};
pub use ops::{
    conv1d, conv1d_backward, conv_width, linear, linear_backward, relu, relu_backward, sigmoid, sigmoid_backward,
    sigmoid_scalar,
};
pub use optim::{Adam, AdamConfig};
pub use rng::Rng;
