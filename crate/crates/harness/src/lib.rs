//! Training and evaluation drivers: the alternating GAN loop with its
//! curriculum, the classifier-based score, ablations, the MRU classifier
//! mode and the gradient-check suite.

pub mod ablation;
pub mod classify;
pub mod config;
pub mod eval;
pub mod gan;
pub mod gradcheck;
pub mod sample;
pub mod train;

use std::path::PathBuf;

pub use ablation::{run_ablation, AblationRow, AblationTable, Variant};
pub use classify::{classify_mode, ClassifyReport, ClassifyRow, StackClassifier};
pub use config::{ClassifyConfig, Config, DataConfig, EvalConfig, ScheduleConfig, ScheduleKind, TrainSettings};
pub use eval::{evaluate, score_analogue, EvalClassifier, EvalReport};
pub use gan::Gan;
pub use gradcheck::{gradcheck_suite, SuiteEntry};
pub use sample::sample_grid;
pub use train::{train, MetricsRow, TrainOutcome, Trainer};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("non-finite {term} loss at iteration {iteration}")]
    NonFinite { term: &'static str, iteration: usize },
    #[error("checkpoint does not match the configuration: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Tensor(#[from] mrugan_core::TensorError),
    #[error(transparent)]
    Data(#[from] mrugan_data::Error),
    #[error(transparent)]
    Image(#[from] mrugan_augment::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}
