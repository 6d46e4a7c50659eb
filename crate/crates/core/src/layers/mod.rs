//! Differentiable layers. Every layer is a pair of free functions: a
//! forward pass that returns whatever the backward pass needs, and a
//! backward pass that maps an upstream gradient to input and parameter
//! gradients. Models compose them explicitly.

pub mod conv;
pub mod dense;
pub mod dropout;
pub mod embedding;
pub mod lstm;
pub mod residual;

pub use conv::{
    conv1d, conv1d_backward, conv_output_len, maxpool1d, maxpool1d_backward, ConvParams, PoolCache,
};
pub use dense::{dense, dense_backward, DenseParams};
pub use dropout::{dropout, dropout_backward};
pub use embedding::{embedding_backward, embedding_lookup, one_hot, TokenIds};
pub use lstm::{
    bilstm, bilstm_backward, bilstm_forward, lstm_step, lstm_step_backward, lstm_step_cached,
    BiLstmCache, BiLstmMode, BiLstmParams, LstmCellParams, LstmState, StepCache,
};
pub use residual::{residual_add, residual_backward};
