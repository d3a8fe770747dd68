use serde::{Deserialize, Serialize};

use super::surf::Descriptor;
use super::FeatureError;

pub const DEFAULT_RATIO_THRESHOLD: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub query_index: usize,
    pub train_index: usize,
    pub distance: f64,
    /// Nearest over second-nearest distance.
    pub ratio: f64,
}

/// Brute-force nearest-neighbor matching with a distance-ratio test.
///
/// A query is kept when `d1 / d2 < ratio_threshold`. With a single train
/// descriptor the ratio is defined as 0. Equal distances resolve to the lower
/// train index.
pub fn match_descriptors(
    query: &[Descriptor],
    train: &[Descriptor],
    ratio_threshold: f64,
) -> Result<Vec<Match>, FeatureError> {
    if query.is_empty() || train.is_empty() {
        return Err(FeatureError::EmptyDescriptorSet);
    }
    let mut matches = Vec::new();
    for (qi, q) in query.iter().enumerate() {
        let mut best = (f64::INFINITY, usize::MAX);
        let mut second = f64::INFINITY;
        for (ti, t) in train.iter().enumerate() {
            let d = q.distance_sq(t);
            if d < best.0 {
                second = best.0;
                best = (d, ti);
            } else if d < second {
                second = d;
            }
        }
        let d1 = best.0.sqrt();
        let ratio = if train.len() == 1 {
            0.0
        } else {
            let d2 = second.sqrt();
            if d2 > 0.0 {
                d1 / d2
            } else {
                1.0
            }
        };
        if ratio < ratio_threshold {
            matches.push(Match {
                query_index: qi,
                train_index: best.1,
                distance: d1,
                ratio,
            });
        }
    }
    Ok(matches)
}
