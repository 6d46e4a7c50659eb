//! Loss, optimiser, training loop and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod fit;
pub mod loss;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, load_checkpoint_as,
    load_checkpoint_for, save_checkpoint,
};
pub use config::TrainConfig;
pub use fit::{
    fit, fit_pretrained, fit_with, predict_classes, predict_proba, EpochLog, PretrainLogs, TrainLog,
};
pub use loss::cross_entropy;
