//! Homography estimation between overlapping frames.

mod homography;
mod msac;

use thiserror::Error;

pub use homography::{
    apply_homography, estimate_homography_dlt, estimate_similarity, has_collinear_triple, Correspondence,
    Homography, COLLINEAR_AREA,
};
pub use msac::{
    msac_homography, msac_score, residuals, EstimateResult, MsacConfig, ResidualKind, TransformFamily,
    DEFAULT_CONFIDENCE, DEFAULT_MAX_ITERATIONS, DEFAULT_SEED, DEFAULT_THRESHOLD_PX, RESIDUAL_FLOOR_PX,
};

use crate::features::{DescribedFeatures, Match};

/// Fewer inliers than this and a frame pair is considered unregistrable.
pub const DEFAULT_MIN_INLIERS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistrationError {
    #[error("need at least {needed} correspondences, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("no sample produced a valid model")]
    NoValidModel,
    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("transform is not invertible")]
    NotInvertible,
    #[error("invalid estimator settings: {0}")]
    InvalidConfig(String),
    #[error("only {inliers} inliers, need {required}")]
    InsufficientOverlap { inliers: usize, required: usize },
}

/// Builds correspondences from matches: query keypoints are the source.
pub fn correspondences(query: &DescribedFeatures, train: &DescribedFeatures, matches: &[Match]) -> Vec<Correspondence> {
    matches
        .iter()
        .map(|m| {
            let q = &query.keypoints[m.query_index];
            let t = &train.keypoints[m.train_index];
            Correspondence::new((q.x, q.y), (t.x, t.y))
        })
        .collect()
}

/// Runs MSAC and enforces a minimum inlier count.
pub fn register_pair(
    pairs: &[Correspondence],
    cfg: &MsacConfig,
    min_inliers: usize,
) -> Result<EstimateResult, RegistrationError> {
    if pairs.len() < min_inliers {
        return Err(RegistrationError::InsufficientOverlap {
            inliers: pairs.len(),
            required: min_inliers,
        });
    }
    let res = msac_homography(pairs, cfg)?;
    if res.inlier_indices.len() < min_inliers {
        return Err(RegistrationError::InsufficientOverlap {
            inliers: res.inlier_indices.len(),
            required: min_inliers,
        });
    }
    Ok(res)
}
