//! Turns photos or edge-probability maps into thin, cleaned edge maps and
//! then into truncated unsigned distance fields.
//!
//! The stages run in a fixed order: [`detect_edges`] → [`binarize`] →
//! [`thin`] → [`remove_small_components`] → [`erode_threshold`] →
//! [`remove_spurs`] → [`distance_field`]. Connectivity is 8-connected
//! throughout.

mod clean;
mod distance;
mod edges;
mod image;
pub mod io;
mod pipeline;
mod thin;

pub use clean::{component_sizes, erode_threshold, remove_small_components, remove_spurs};
pub use distance::distance_field;
pub use edges::{binarize, detect_edges};
pub use image::{AugmentConfig, BinaryImage, DistanceField, GrayImage, RgbImage};
pub use pipeline::{augment_pipeline, clean_edges, AugmentInput};
pub use thin::thin;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("image: {0}")]
    Image(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: png decode failed: {source}")]
    PngDecode {
        path: String,
        #[source]
        source: png::DecodingError,
    },
    #[error("{path}: png encode failed: {source}")]
    PngEncode {
        path: String,
        #[source]
        source: png::EncodingError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
