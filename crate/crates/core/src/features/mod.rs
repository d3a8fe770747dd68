//! Integral images, SURF keypoints and descriptors, and descriptor matching.

mod integral;
mod matching;
mod surf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use integral::IntegralImage;
pub use matching::{match_descriptors, Match, DEFAULT_RATIO_THRESHOLD};
pub use surf::{
    assign_orientation, describe_surf, detect_surf, filter_size, min_image_side, DescribedFeatures, Descriptor,
    Keypoint, DEFAULT_HESSIAN_THRESHOLD, DEFAULT_OCTAVES, DESCRIPTOR_LEN, LAYERS_PER_OCTAVE,
};

use crate::image::ColorImage;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("image is empty")]
    EmptyImage,
    #[error("image {width}x{height} is smaller than {min_side}x{min_side} px")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min_side: usize,
    },
    #[error("descriptor set is empty")]
    EmptyDescriptorSet,
}

/// Detector and descriptor settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfConfig {
    pub hessian_threshold: f64,
    pub octaves: usize,
    pub upright: bool,
}

impl Default for SurfConfig {
    fn default() -> Self {
        Self {
            hessian_threshold: DEFAULT_HESSIAN_THRESHOLD,
            octaves: DEFAULT_OCTAVES,
            upright: true,
        }
    }
}

/// Detects and describes features on a color frame.
pub fn extract_features(img: &ColorImage, cfg: &SurfConfig) -> Result<DescribedFeatures, FeatureError> {
    let ii = IntegralImage::from_color(img)?;
    let kps = detect_surf(&ii, cfg.hessian_threshold, cfg.octaves)?;
    Ok(describe_surf(&ii, &kps, cfg.upright))
}
