//! Global alignment of a frame sequence, mosaicking, and mosaic export.

mod export;
mod graph;
mod mosaic;

use std::path::PathBuf;

use thiserror::Error;

pub use export::{
    decode_elev, encode_elev, export_ply_cloud, export_ply_mosaic, read_elev, write_elev, ELEV_MAGIC, ELEV_VERSION,
};
pub use graph::{chain_transforms, FrameGraph};
pub use mosaic::{
    canvas_for, composite, default_gsd, frame_corners, mosaic_elevation, mosaic_rgb, warp_color, warp_elevation,
    Canvas, CompositeRule, ElevationMosaic, Warped, WarpedColor, MAX_CANVAS_PIXELS,
};

use crate::registration::RegistrationError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StitchError {
    #[error("no frames to stitch")]
    EmptyInput,
    #[error("no transform between frames {from} and {to}")]
    BrokenChain { from: usize, to: usize },
    #[error("reference frame {index} out of range for {frames} frames")]
    InvalidReference { index: usize, frames: usize },
    #[error("{frames} frames but {transforms} transforms")]
    FrameCountMismatch { frames: usize, transforms: usize },
    #[error("ground sample distance must be positive, got {0}")]
    GsdNonPositive(f64),
    #[error("mosaic canvas {width}x{height} is implausibly large")]
    CanvasTooLarge { width: u64, height: u64 },
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error("i/o failure on {}: {reason}", path.display())]
    Io { path: PathBuf, reason: String },
    #[error("corrupt mosaic: {0}")]
    CorruptMosaic(String),
}
