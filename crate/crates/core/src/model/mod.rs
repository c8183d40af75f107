//! Multimodal trajectory model with a latent-variable decoder and
//! auxiliary scaled and reconstruction objectives.

pub mod bundle;
pub mod config;
pub mod loss;
pub mod network;
pub mod train;

pub use bundle::{build_bundle, build_targets, Batch, ModalityBundle, Targets};
pub use config::{AblationRow, Modality, ModelConfig, TrainConfig};
pub use network::{Encore, LatentMode, LossVars, Outputs};
pub use train::{write_train_log, EpochLog, TrainReport};
