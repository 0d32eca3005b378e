//! Learned prediction of the decoding order.

pub mod adam;
pub mod dataset;
pub mod mlp;
pub mod train;

pub use adam::AdamState;
pub use dataset::{
    features, generate_dataset, label_trial, load_dataset, save_dataset, split_dataset, to_batch,
    TrialRecord,
};
pub use mlp::{Dense, MlpModel, OutputMode, Targets};
pub use train::{train, train_model, TrainConfig, TrainReport};
