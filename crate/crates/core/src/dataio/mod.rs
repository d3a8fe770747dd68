//! Dataset layout on disk and the synthetic scene generator.

mod manifest;
pub mod pnm;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

pub use manifest::{
    frame_entry, manifest_json, read_dataset, read_manifest, write_dataset, DatasetManifest, Datum, DefectKind,
    DepthRegistration, ExtrinsicRecord, Frame, FrameEntry, GroundTruthDefect, TravelAxis, MANIFEST_FILE,
    MANIFEST_VERSION,
};
pub use synth::{
    datum, default_intrinsics, frame_step_px, generate_synthetic, pairwise_translation, Scene, SynthSpec,
    DEFAULT_CAMERA_HEIGHT_MM, DEFAULT_FRAME_COUNT, DEFAULT_NOISE_K_PER_MM, DEFAULT_NOISE_SIGMA0_MM,
    DEFAULT_OVERLAP_FRACTION, LANE_WIDTH_M, RUT_SIGMA_PER_WIDTH, WIDTH_CONVENTION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("no manifest at {}", .0.display())]
    MissingManifest(PathBuf),
    #[error("missing file {}", path.display())]
    MissingFile { path: PathBuf },
    #[error("corrupt image {}: {reason}", path.display())]
    CorruptImage { path: PathBuf, reason: String },
    #[error("{} is {actual:?}, manifest says {expected:?}", path.display())]
    ResolutionMismatch {
        path: PathBuf,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("dataset does not match its manifest: {0}")]
    ValidationError(String),
    #[error("cannot parse manifest: {0}")]
    InvalidManifest(String),
    #[error("i/o failure on {}: {reason}", path.display())]
    IoFailure { path: PathBuf, reason: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("defect {index} extends outside the lane")]
    DefectOutsideLane { index: usize },
}
