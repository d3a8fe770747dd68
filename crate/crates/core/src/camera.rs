//! Pinhole camera geometry: projection, depth unprojection, point clouds and
//! depth-to-color registration.
//!
//! Camera frame convention: x right, y down, z along the optical axis. A depth
//! sample is the z coordinate of the observed point, not the ray length.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{is_valid_depth_f64, ColorImage, DepthImage, Rgb, INVALID_DEPTH};

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("invalid depth {0} mm (must be in the sensor range)")]
    InvalidDepth(f64),
    #[error("pixel ({u}, {v}) outside the {width}x{height} image")]
    OutOfBounds {
        u: f64,
        v: f64,
        width: usize,
        height: usize,
    },
    #[error("point has non-positive depth z = {0}")]
    NonPositiveDepth(f64),
    #[error("image is {actual_w}x{actual_h} but intrinsics describe {expected_w}x{expected_h}")]
    ResolutionMismatch {
        expected_w: usize,
        expected_h: usize,
        actual_w: usize,
        actual_h: usize,
    },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("point cloud has {points} points but {colors} colors")]
    ColorCountMismatch { points: usize, colors: usize },
}

/// Pinhole parameters of a calibrated, undistorted camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self, CameraError> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) || !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{}",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Intrinsics of the `width`x`height` window starting at `(x0, y0)`.
    pub fn cropped(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Self {
            cx: self.cx - x0 as f64,
            cy: self.cy - y0 as f64,
            width,
            height,
            ..*self
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn check_resolution(&self, width: usize, height: usize) -> Result<(), CameraError> {
        if width != self.width || height != self.height {
            return Err(CameraError::ResolutionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                actual_w: width,
                actual_h: height,
            });
        }
        Ok(())
    }
}

/// Rotation plus translation (millimeters) between two camera frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, CameraError> {
        check_rotation(&rotation)?;
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Result<RigidTransform, CameraError> {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

pub(crate) fn check_rotation(r: &Matrix3<f64>) -> Result<(), CameraError> {
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    if !(err <= ORTHONORMAL_TOL) {
        return Err(CameraError::InvalidRotation(format!(
            "not orthonormal (max |RᵀR - I| = {err:e})"
        )));
    }
    let det = r.determinant();
    if !((det - 1.0).abs() <= ORTHONORMAL_TOL) {
        return Err(CameraError::InvalidRotation(format!("determinant {det} != +1")));
    }
    Ok(())
}

/// Back-projects pixel `(u, v)` with depth `depth_mm` into the camera frame.
pub fn unproject(intr: &CameraIntrinsics, u: f64, v: f64, depth_mm: f64) -> Result<Vector3<f64>, CameraError> {
    if !(u >= 0.0 && u <= (intr.width as f64 - 1.0) && v >= 0.0 && v <= (intr.height as f64 - 1.0)) {
        return Err(CameraError::OutOfBounds {
            u,
            v,
            width: intr.width,
            height: intr.height,
        });
    }
    if !is_valid_depth_f64(depth_mm) {
        return Err(CameraError::InvalidDepth(depth_mm));
    }
    Ok(unproject_unchecked(intr, u, v, depth_mm))
}

#[inline]
pub(crate) fn unproject_unchecked(intr: &CameraIntrinsics, u: f64, v: f64, d: f64) -> Vector3<f64> {
    Vector3::new((u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d)
}

/// Projects a camera-frame point to subpixel coordinates. The result may lie
/// outside the image.
pub fn project(intr: &CameraIntrinsics, p: &Vector3<f64>) -> Result<(f64, f64), CameraError> {
    if !(p.z > 0.0) {
        return Err(CameraError::NonPositiveDepth(p.z));
    }
    Ok((intr.fx * p.x / p.z + intr.cx, intr.fy * p.y / p.z + intr.cy))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    colors: Option<Vec<Rgb>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, colors: Option<Vec<Rgb>>) -> Result<Self, CameraError> {
        if let Some(c) = &colors {
            if c.len() != points.len() {
                return Err(CameraError::ColorCountMismatch {
                    points: points.len(),
                    colors: c.len(),
                });
            }
        }
        if let Some(p) = points.iter().find(|p| !(p.z > 0.0)) {
            return Err(CameraError::NonPositiveDepth(p.z));
        }
        Ok(Self { points, colors })
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn colors(&self) -> Option<&[Rgb]> {
        self.colors.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One point per valid pixel, in row-major scan order.
pub fn depth_to_cloud(depth: &DepthImage, intr: &CameraIntrinsics) -> Result<PointCloud, CameraError> {
    intr.check_resolution(depth.width(), depth.height())?;
    let mut points = Vec::with_capacity(depth.valid_count());
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            if depth.is_valid_at(u, v) {
                let d = *depth.get(u, v) as f64;
                points.push(unproject_unchecked(intr, u as f64, v as f64, d));
            }
        }
    }
    Ok(PointCloud {
        points,
        colors: None,
    })
}

/// Same as [`depth_to_cloud`] with colors sampled from a registered color image.
pub fn depth_to_colored_cloud(
    depth: &DepthImage,
    color: &ColorImage,
    intr: &CameraIntrinsics,
) -> Result<PointCloud, CameraError> {
    intr.check_resolution(color.width(), color.height())?;
    let mut cloud = depth_to_cloud(depth, intr)?;
    let colors = (0..depth.height())
        .flat_map(|v| (0..depth.width()).map(move |u| (u, v)))
        .filter(|&(u, v)| depth.is_valid_at(u, v))
        .map(|(u, v)| *color.get(u, v))
        .collect();
    cloud.colors = Some(colors);
    Ok(cloud)
}

/// Resamples an IR-camera depth image onto the color camera's pixel grid.
///
/// Each valid IR pixel is unprojected, moved into the color frame by `extr`,
/// projected with `color_intr` and written to the nearest target pixel. On
/// collision the nearest depth wins.
pub fn align_depth_to_color(
    depth: &DepthImage,
    depth_intr: &CameraIntrinsics,
    color_intr: &CameraIntrinsics,
    extr: &RigidTransform,
) -> Result<DepthImage, CameraError> {
    depth_intr.check_resolution(depth.width(), depth.height())?;
    let (tw, th) = (color_intr.width, color_intr.height);
    let mut out = DepthImage::filled(tw, th, INVALID_DEPTH);
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            if !depth.is_valid_at(u, v) {
                continue;
            }
            let p = unproject_unchecked(depth_intr, u as f64, v as f64, *depth.get(u, v) as f64);
            let q = extr.apply(&p);
            let Ok((tu, tv)) = project(color_intr, &q) else {
                continue;
            };
            let (tx, ty) = (tu.round(), tv.round());
            if tx < 0.0 || ty < 0.0 || tx >= tw as f64 || ty >= th as f64 {
                continue;
            }
            let z = q.z.round();
            if !is_valid_depth_f64(z) {
                continue;
            }
            let z = z as u16;
            let (tx, ty) = (tx as usize, ty as usize);
            let cur = *out.get(tx, ty);
            if cur == INVALID_DEPTH || z < cur {
                out.set(tx, ty, z);
            }
        }
    }
    Ok(out)
}
