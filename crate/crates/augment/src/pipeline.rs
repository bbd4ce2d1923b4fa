use crate::clean::{erode_threshold, remove_small_components, remove_spurs};
use crate::distance::distance_field;
use crate::edges::{binarize, detect_edges};
use crate::image::{AugmentConfig, BinaryImage, DistanceField, GrayImage, RgbImage};
use crate::thin::thin;
use crate::Result;

/// Either a photo, which goes through [`detect_edges`] first, or an
/// already computed edge-probability map.
#[derive(Clone, Copy, Debug)]
pub enum AugmentInput<'a> {
    Photo(&'a RgbImage),
    Edges(&'a GrayImage),
}

/// binarize → thin → remove_small_components → erode_threshold → remove_spurs.
pub fn clean_edges(edges: &GrayImage, cfg: &AugmentConfig) -> Result<BinaryImage> {
    cfg.validate()?;
    let b = binarize(edges, cfg.threshold);
    let b = thin(&b);
    let b = remove_small_components(&b, cfg.min_component);
    let b = erode_threshold(&b, cfg.erode_k);
    Ok(remove_spurs(&b, cfg.spur_len))
}

/// The full edge-map pipeline ending in a truncated distance field.
pub fn augment_pipeline(input: AugmentInput<'_>, cfg: &AugmentConfig) -> Result<DistanceField> {
    let detected;
    let edges = match input {
        AugmentInput::Photo(photo) => {
            detected = detect_edges(photo)?;
            &detected
        }
        AugmentInput::Edges(g) => g,
    };
    distance_field(&clean_edges(edges, cfg)?, cfg.cap)
}
