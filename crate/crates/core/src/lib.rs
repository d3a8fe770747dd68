#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Pavement surface reconstruction from overlapping RGB-D frames.

pub mod analyze;
pub mod camera;
pub mod dataio;
pub mod features;
pub mod image;
pub mod pipeline;
pub mod planefit;
pub mod preprocess;
pub mod registration;
pub mod stitch;

pub use nalgebra;
