//! Profiles, rut depth, defect metrology and accuracy statistics.

mod defects;
mod profile;
mod rut;
mod stats;

use thiserror::Error;

pub use defects::{
    detect_defects, georeference, DefectMeasurement, DEFAULT_DEPTH_THRESHOLD_MM, DEFAULT_MIN_AREA_MM2,
    RUT_ASPECT_RATIO, RUT_MIN_SPAN_FRACTION,
};
pub use profile::{
    extract_profile, extract_profile_band, profile_csv, profile_svg, ExtractedProfile, TransverseProfile, MAX_INTERPOLATED_GAP,
    MIN_PROFILE_SAMPLES,
};
pub use rut::{
    chord_value, hull_polyline, hull_values, rut_depth_straightedge, upper_hull, RutMeasurement, StraightedgeMode,
    DEFAULT_SLIDING_SPAN_M, GAP_FLOOR_MM,
};
pub use stats::{defect_mre, linear_fit_r2, match_defects, EvalStats, LinearFit, MreReport, MATCH_GATE_MM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyzeError {
    #[error("station {station_m} m outside mosaic of length {length_m} m")]
    StationOutOfRange { station_m: f64, length_m: f64 },
    #[error("profile has only {samples} valid samples")]
    ProfileTooSparse { samples: usize },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
    #[error("no measured defect matches any ground-truth defect")]
    NoMatchedPairs,
    #[error("need at least 3 pairs, got {got}")]
    TooFewPairs { got: usize },
    #[error("truth values have zero variance")]
    DegenerateVariance,
}
