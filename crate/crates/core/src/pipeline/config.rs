use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyze::{StraightedgeMode, DEFAULT_DEPTH_THRESHOLD_MM, DEFAULT_MIN_AREA_MM2};
use crate::features::{SurfConfig, DEFAULT_RATIO_THRESHOLD};
use crate::planefit::LevelingMode;
use crate::preprocess::{PreprocessError, RoiSpec, SmoothSpec};
use crate::registration::{MsacConfig, RegistrationError, DEFAULT_MIN_INLIERS};
use crate::stitch::CompositeRule;

/// Spacing of the transverse profiles the pipeline samples, m.
pub const DEFAULT_PROFILE_STEP_M: f64 = 0.1;
/// Half-width of the along-travel band averaged into each rut profile, mm.
pub const DEFAULT_PROFILE_HALF_BAND_MM: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error("leveling trim fraction must lie in (0, 0.5), got {0}")]
    TrimFraction(f64),
    #[error("invalid SURF settings: {0}")]
    Surf(String),
    #[error("ratio threshold must lie in (0, 1], got {0}")]
    RatioThreshold(f64),
    #[error(transparent)]
    Msac(#[from] RegistrationError),
    #[error("min inliers must be at least the model sample size {sample}, got {got}")]
    MinInliers { got: usize, sample: usize },
    #[error("ground sample distance override must be positive, got {0}")]
    Gsd(f64),
    #[error("defect thresholds must be positive (depth {depth_mm}, area {area_mm2})")]
    DefectThresholds { depth_mm: f64, area_mm2: f64 },
    #[error("sliding straightedge span must be positive, got {0}")]
    StraightedgeSpan(f64),
    #[error("profile step must be positive, got {0}")]
    ProfileStep(f64),
    #[error("profile half band must be finite and non-negative, got {0}")]
    ProfileBand(f64),
}

/// Every stage parameter of a run. Defaults are the module defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub roi: RoiSpec,
    pub smooth: SmoothSpec,
    pub leveling: LevelingMode,
    pub surf: SurfConfig,
    pub ratio_threshold: f64,
    pub msac: MsacConfig,
    pub min_inliers: usize,
    pub reference_index: usize,
    pub elevation_rule: CompositeRule,
    /// Overrides camera height over fx.
    pub gsd_mm: Option<f64>,
    pub depth_threshold_mm: f64,
    pub min_area_mm2: f64,
    pub straightedge: StraightedgeMode,
    pub profile_step_m: f64,
    /// Zero samples single cross-sections.
    pub profile_half_band_mm: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            roi: RoiSpec::default(),
            smooth: SmoothSpec::default(),
            leveling: LevelingMode::default(),
            surf: SurfConfig::default(),
            ratio_threshold: DEFAULT_RATIO_THRESHOLD,
            msac: MsacConfig::default(),
            min_inliers: DEFAULT_MIN_INLIERS,
            reference_index: 0,
            elevation_rule: CompositeRule::Mean,
            gsd_mm: None,
            depth_threshold_mm: DEFAULT_DEPTH_THRESHOLD_MM,
            min_area_mm2: DEFAULT_MIN_AREA_MM2,
            straightedge: StraightedgeMode::FullWidth,
            profile_step_m: DEFAULT_PROFILE_STEP_M,
            profile_half_band_mm: DEFAULT_PROFILE_HALF_BAND_MM,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.roi.validate()?;
        self.smooth.validate()?;
        if let LevelingMode::Trimmed { trim_fraction } = self.leveling {
            if !(trim_fraction > 0.0 && trim_fraction < 0.5) {
                return Err(ConfigError::TrimFraction(trim_fraction));
            }
        }
        if !(self.surf.hessian_threshold > 0.0) || !self.surf.hessian_threshold.is_finite() {
            return Err(ConfigError::Surf(format!(
                "hessian threshold must be positive, got {}",
                self.surf.hessian_threshold
            )));
        }
        if !(1..=4).contains(&self.surf.octaves) {
            return Err(ConfigError::Surf(format!("octaves must be 1 to 4, got {}", self.surf.octaves)));
        }
        if !(self.ratio_threshold > 0.0 && self.ratio_threshold <= 1.0) {
            return Err(ConfigError::RatioThreshold(self.ratio_threshold));
        }
        self.msac.validate()?;
        let sample = self.msac.family.sample_size();
        if self.min_inliers < sample {
            return Err(ConfigError::MinInliers {
                got: self.min_inliers,
                sample,
            });
        }
        if let Some(g) = self.gsd_mm {
            if !(g > 0.0) || !g.is_finite() {
                return Err(ConfigError::Gsd(g));
            }
        }
        if !(self.depth_threshold_mm > 0.0) || !(self.min_area_mm2 > 0.0) {
            return Err(ConfigError::DefectThresholds {
                depth_mm: self.depth_threshold_mm,
                area_mm2: self.min_area_mm2,
            });
        }
        if let StraightedgeMode::Sliding { span_m } = self.straightedge {
            if !(span_m > 0.0) || !span_m.is_finite() {
                return Err(ConfigError::StraightedgeSpan(span_m));
            }
        }
        if !(self.profile_step_m > 0.0) || !self.profile_step_m.is_finite() {
            return Err(ConfigError::ProfileStep(self.profile_step_m));
        }
        if !(self.profile_half_band_mm >= 0.0) || !self.profile_half_band_mm.is_finite() {
            return Err(ConfigError::ProfileBand(self.profile_half_band_mm));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::TransformFamily;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn json_round_trip_and_partial() {
        let c = PipelineConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&s).unwrap(), c);
        let p: PipelineConfig = serde_json::from_str(r#"{"min_inliers": 12}"#).unwrap();
        assert_eq!(p.min_inliers, 12);
        assert_eq!(p.roi, RoiSpec::default());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn named_errors() {
        let mut c = PipelineConfig::default();
        c.ratio_threshold = 1.5;
        assert_eq!(c.validate(), Err(ConfigError::RatioThreshold(1.5)));

        let mut c = PipelineConfig::default();
        c.leveling = LevelingMode::Trimmed { trim_fraction: 0.7 };
        assert_eq!(c.validate(), Err(ConfigError::TrimFraction(0.7)));

        let mut c = PipelineConfig::default();
        c.msac.family = TransformFamily::Similarity;
        c.min_inliers = 1;
        assert!(matches!(c.validate(), Err(ConfigError::MinInliers { sample: 2, .. })));

        let mut c = PipelineConfig::default();
        c.smooth.radius = 1;
        assert!(matches!(c.validate(), Err(ConfigError::Preprocess(_))));

        let mut c = PipelineConfig::default();
        c.gsd_mm = Some(0.0);
        assert_eq!(c.validate(), Err(ConfigError::Gsd(0.0)));

        let mut c = PipelineConfig::default();
        c.straightedge = StraightedgeMode::Sliding { span_m: -2.0 };
        assert_eq!(c.validate(), Err(ConfigError::StraightedgeSpan(-2.0)));
    }
}
