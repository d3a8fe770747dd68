//! M-estimator sample consensus.
//!
//! Hypotheses are scored by the truncated quadratic loss `Σ min(r², T²)`, so
//! among models with equal inlier counts the one with tighter inliers wins.

use nalgebra::Point2;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::homography::{
    estimate_homography_dlt, estimate_similarity, has_collinear_triple, Correspondence, Homography,
};
use super::RegistrationError;

pub const DEFAULT_THRESHOLD_PX: f64 = 1.5;
pub const DEFAULT_CONFIDENCE: f64 = 0.99;
pub const DEFAULT_MAX_ITERATIONS: usize = 2000;
pub const DEFAULT_SEED: u64 = 0;
/// Residuals below this are indistinguishable from an exact fit.
pub const RESIDUAL_FLOOR_PX: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TransformFamily {
    /// Full 8-DOF homography, 4-point samples.
    #[default]
    Projective,
    /// Rotation + uniform scale + translation, 2-point samples.
    Similarity,
}

impl TransformFamily {
    pub fn sample_size(self) -> usize {
        match self {
            TransformFamily::Projective => 4,
            TransformFamily::Similarity => 2,
        }
    }

    fn fit(self, pairs: &[Correspondence]) -> Result<Homography, RegistrationError> {
        match self {
            TransformFamily::Projective => estimate_homography_dlt(pairs),
            TransformFamily::Similarity => estimate_similarity(pairs),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    /// `d(Hp, q)`.
    #[default]
    Forward,
    /// `sqrt((d(Hp, q)² + d(H⁻¹q, p)²) / 2)`.
    Symmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsacConfig {
    pub threshold: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    pub seed: u64,
    pub family: TransformFamily,
    pub residual: ResidualKind,
}

impl Default for MsacConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD_PX,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            confidence: DEFAULT_CONFIDENCE,
            seed: DEFAULT_SEED,
            family: TransformFamily::Projective,
            residual: ResidualKind::Forward,
        }
    }
}

impl MsacConfig {
    pub fn validate(&self) -> Result<(), RegistrationError> {
        if !(self.threshold > 0.0) {
            return Err(RegistrationError::InvalidConfig(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(RegistrationError::InvalidConfig(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        if self.max_iterations == 0 {
            return Err(RegistrationError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub model: Homography,
    pub inlier_indices: Vec<usize>,
    /// `Σ min(r², T²)` of the returned model over all pairs, px².
    pub score: f64,
    pub iterations_run: usize,
    /// Score of every hypothesis that replaced the incumbent, in order.
    pub accepted_scores: Vec<f64>,
}

fn residual(model: &Homography, inverse: Option<&Homography>, c: &Correspondence, kind: ResidualKind) -> f64 {
    let fwd = match model.apply(&c.src) {
        Ok(p) => (p - c.dst).norm_squared(),
        Err(_) => return f64::INFINITY,
    };
    let r = match (kind, inverse) {
        (ResidualKind::Symmetric, Some(inv)) => match inv.apply(&c.dst) {
            Ok(p) => (0.5 * (fwd + (p - c.src).norm_squared())).sqrt(),
            Err(_) => return f64::INFINITY,
        },
        (ResidualKind::Symmetric, None) => return f64::INFINITY,
        (ResidualKind::Forward, _) => fwd.sqrt(),
    };
    if r < RESIDUAL_FLOOR_PX {
        0.0
    } else {
        r
    }
}

/// Residual of every pair under `model`.
pub fn residuals(model: &Homography, pairs: &[Correspondence], kind: ResidualKind) -> Vec<f64> {
    let inverse = match kind {
        ResidualKind::Symmetric => model.inverse().ok(),
        ResidualKind::Forward => None,
    };
    pairs
        .iter()
        .map(|c| residual(model, inverse.as_ref(), c, kind))
        .collect()
}

/// Truncated quadratic loss.
pub fn msac_score(residuals: &[f64], threshold: f64) -> f64 {
    let t2 = threshold * threshold;
    residuals.iter().map(|r| (r * r).min(t2)).sum()
}

fn adaptive_bound(inlier_fraction: f64, confidence: f64, sample_size: usize) -> usize {
    let good = inlier_fraction.powi(sample_size as i32);
    if good <= 0.0 {
        return usize::MAX;
    }
    if good >= 1.0 {
        return 1;
    }
    let n = (1.0 - confidence).ln() / (1.0 - good).ln();
    if n.is_finite() {
        n.ceil().max(1.0) as usize
    } else {
        usize::MAX
    }
}

fn sample_is_degenerate(sample: &[Correspondence], family: TransformFamily) -> bool {
    match family {
        TransformFamily::Projective => {
            let src: Vec<Point2<f64>> = sample.iter().map(|c| c.src).collect();
            let dst: Vec<Point2<f64>> = sample.iter().map(|c| c.dst).collect();
            has_collinear_triple(&src) || has_collinear_triple(&dst)
        }
        TransformFamily::Similarity => (sample[0].src - sample[1].src).norm() < 1e-9,
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Robustly estimates the transform mapping `src` onto `dst`.
pub fn msac_homography(pairs: &[Correspondence], cfg: &MsacConfig) -> Result<EstimateResult, RegistrationError> {
    cfg.validate()?;
    let k = cfg.family.sample_size();
    if pairs.len() < k.max(4) && cfg.family == TransformFamily::Projective || pairs.len() < k {
        return Err(RegistrationError::TooFewPairs {
            needed: k,
            got: pairs.len(),
        });
    }
    let n = pairs.len();
    let t = cfg.threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Homography, f64, Vec<f64>)> = None;
    let mut accepted_scores = Vec::new();
    let mut bound = cfg.max_iterations;
    let mut iterations = 0usize;
    let mut sample = Vec::with_capacity(k);

    while iterations < bound.min(cfg.max_iterations) {
        iterations += 1;
        sample.clear();
        sample.extend(index::sample(&mut rng, n, k).into_iter().map(|i| pairs[i]));
        if sample_is_degenerate(&sample, cfg.family) {
            continue;
        }
        let Ok(model) = cfg.family.fit(&sample) else {
            continue;
        };
        let res = residuals(&model, pairs, cfg.residual);
        let score = msac_score(&res, t);
        if best.as_ref().map_or(true, |(_, s, _)| score < *s) {
            let inliers = res.iter().filter(|&&r| r < t).count();
            bound = adaptive_bound(inliers as f64 / n as f64, cfg.confidence, k);
            accepted_scores.push(score);
            best = Some((model, score, res));
        }
    }

    let (sampled, _, sampled_res) = best.ok_or(RegistrationError::NoValidModel)?;
    let inlier_set: Vec<usize> = (0..n).filter(|&i| sampled_res[i] < t).collect();

    // Refit on the consensus set; keep it only if it does not worsen the inlier RMS.
    let mut model = sampled;
    if inlier_set.len() >= k {
        let subset: Vec<Correspondence> = inlier_set.iter().map(|&i| pairs[i]).collect();
        if let Ok(refit) = cfg.family.fit(&subset) {
            let refit_res = residuals(&refit, &subset, cfg.residual);
            let before = rms(inlier_set.iter().map(|&i| sampled_res[i]));
            if rms(refit_res.into_iter()) <= before {
                model = refit;
            }
        }
    }

    let final_res = residuals(&model, pairs, cfg.residual);
    let inlier_indices = (0..n).filter(|&i| final_res[i] < t).collect();
    Ok(EstimateResult {
        model,
        inlier_indices,
        score: msac_score(&final_res, t),
        iterations_run: iterations,
        accepted_scores,
    })
}
