//! Synthetic stand-in corpus (shape photos, exact edge maps, jittered
//! sketches), its on-disk manifest, batch loading, and the schedule that
//! mixes sketch and edge-map pairs during training.

pub mod corpus;
pub mod schedule;
pub mod synth;

use std::path::PathBuf;

pub use corpus::{build_corpus, load_batch, Batch, Corpus, Manifest, ManifestEntry, Split};
pub use schedule::{draw_batch_sources, mix_ratio, MixRatio, ScheduleMode, ScheduleState, Source};
pub use synth::{corpus_sample, random_spec, render_sample, PairedSample, ShapeClass, ShapeSpec};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {what}: {msg}")]
    Invalid { what: &'static str, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Manifest {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown sample id {0:?}")]
    UnknownId(String),
    #[error(transparent)]
    Image(#[from] mrugan_augment::Error),
    #[error(transparent)]
    Tensor(#[from] mrugan_core::TensorError),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(what: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid { what, msg: msg.into() })
}
