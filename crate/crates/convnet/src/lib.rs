//! A compact convolutional network in 64-bit floats: valid convolutions,
//! max pooling, ReLU, global average pooling and a softmax cross-entropy
//! head, trained with heavy-ball SGD.

pub mod checkpoint;
pub mod layers;
pub mod network;
pub mod optim;
pub mod tensor;
pub mod train;

use thiserror::Error;

pub use network::{LayerSpec, Network, NetworkSpec};
pub use tensor::Tensor;
pub use train::{evaluate, run_experiment, train, train_scheduled, Sample, TrainConfig, TrainLog};

#[derive(Debug, Error)]
pub enum ConvnetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, ConvnetError>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> ConvnetError + '_ {
    move |source| ConvnetError::Io { path: path.display().to_string(), source }
}
