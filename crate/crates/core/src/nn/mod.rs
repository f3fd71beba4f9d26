//! Small dense neural-network engine with hand-written backward passes.

mod adam;
mod bilstm;
mod dropout;
mod gradcheck;
mod linear;
mod loss;
mod lstm;
mod matrix;
mod param;

pub use adam::{adam_update, AdamState};
pub use bilstm::{bilstm_encode, BiLstm, BiLstmTrace};
pub use dropout::{dropout, Mode};
pub use gradcheck::{grad_check, relative_error, Differentiable};
pub use linear::{linear_forward, Linear};
pub use loss::{binary_class_loss, entailment_probability, softmax2};
pub use lstm::{lstm_layer_forward, LstmLayerParams, LstmTrace};
pub use matrix::Matrix;
pub use param::{HasParameters, Parameter};

pub(crate) use dropout::{apply_mask, dropout_with_mask, NoRng};
pub(crate) use linear::{relu, relu_backward};
pub(crate) use matrix::{axpy, dot};
