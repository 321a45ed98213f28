//! Modern-Hopfield template prioritizer: molecule and template encoders
//! projected into a shared associative space, softmax retrieval over the
//! stored template patterns, AdamW training, ensembles and the
//! fingerprint substructure screen.

mod config;
mod ensemble;
mod io;
mod model;
mod train;

use thiserror::Error;

pub use config::{Activation, ModelConfig};
pub use ensemble::{rank_templates, substructure_screen, Ensemble};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_FORMAT_VERSION};
pub use model::{init_model, Example, Gradients, PrioritizerModel};
pub use train::{
    evaluate, parse_training_tsv, read_training_tsv, split_indices, train, AdamW, Dataset, EpochRecord,
    Evaluation, History,
};

#[derive(Debug, Error)]
pub enum MhnError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("fingerprint width {found} does not match model input width {expected}")]
    Shape { expected: usize, found: usize },
    #[error("template id {id} out of range for {k} templates")]
    IdOutOfRange { id: usize, k: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty training set")]
    EmptyDataset,
    #[error("ensemble needs at least one model")]
    EmptyEnsemble,
    #[error("template cache not built")]
    CacheNotBuilt,
    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model was trained against a different template library")]
    Checksum,
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("training data: {0}")]
    Dataset(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
