//! Total-least-squares plane fitting and slope leveling.
//!
//! The pavement plane is the best-fit plane of the back-projected depth
//! pixels. Its normal is the right singular vector of the centered point
//! matrix with the smallest singular value. Leveling rotates the camera frame
//! so that normal becomes the z axis; elevation is then the signed height
//! above the leveled plane (negative values are depressions).

use nalgebra::{DMatrix, Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{depth_to_cloud, unproject_unchecked, CameraError, CameraIntrinsics, PointCloud};
use crate::image::{DepthImage, ElevationImage};

/// Ratio of the two largest singular values below which the points are treated as collinear.
const COLLINEAR_RATIO: f64 = 1e-9;
pub const DEFAULT_TRIM_FRACTION: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlaneFitError {
    #[error("plane fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate point set (singular values {0:?})")]
    Degenerate([f64; 3]),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error("trim fraction must lie in [0, 1), got {0}")]
    InvalidTrim(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    /// Unit normal with positive z (pointing away from the camera).
    pub normal: Vector3<f64>,
    pub centroid: Vector3<f64>,
    pub rms_residual: f64,
}

impl Plane {
    /// Signed distance along the normal; positive = farther from the camera than the plane.
    #[inline]
    pub fn offset_of(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(&(p - self.centroid))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelingRotation {
    pub rotation: Rotation3<f64>,
    /// z of the leveled plane, i.e. the camera-to-pavement distance in mm.
    pub reference_height: f64,
}

impl LevelingRotation {
    pub fn angle(&self) -> f64 {
        self.rotation.angle()
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        self.rotation.matrix()
    }
}

/// How the per-frame plane is fitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum LevelingMode {
    /// Every valid pixel, defects included.
    #[default]
    AllPixels,
    /// Fit, drop the lowest `trim_fraction` of elevations, refit once.
    Trimmed { trim_fraction: f64 },
}

pub fn fit_plane_svd(points: &[Vector3<f64>]) -> Result<Plane, PlaneFitError> {
    let n = points.len();
    if n < 3 {
        return Err(PlaneFitError::TooFewPoints(n));
    }
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / n as f64;
    let centered = DMatrix::from_fn(n, 3, |r, c| points[r][c] - centroid[c]);
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("V requested");
    let sv = &svd.singular_values;

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let sorted = [sv[order[0]], sv[order[1]], sv[order[2]]];
    if !(sorted[0] > 0.0) || sorted[1] / sorted[0] < COLLINEAR_RATIO {
        return Err(PlaneFitError::Degenerate(sorted));
    }

    let row = v_t.row(order[2]);
    let mut normal = Vector3::new(row[0], row[1], row[2]).normalize();
    if normal.z < 0.0 {
        normal = -normal;
    }
    Ok(Plane {
        normal,
        centroid,
        rms_residual: sorted[2] / (n as f64).sqrt(),
    })
}

pub fn fit_plane_cloud(cloud: &PointCloud) -> Result<Plane, PlaneFitError> {
    fit_plane_svd(cloud.points())
}

/// Fits, discards the `trim_fraction` of points lying farthest below the
/// plane, and fits again once.
pub fn fit_plane_trimmed(points: &[Vector3<f64>], trim_fraction: f64) -> Result<Plane, PlaneFitError> {
    if !(0.0..1.0).contains(&trim_fraction) {
        return Err(PlaneFitError::InvalidTrim(trim_fraction));
    }
    let first = fit_plane_svd(points)?;
    let drop = (points.len() as f64 * trim_fraction).floor() as usize;
    if drop == 0 {
        return Ok(first);
    }
    let mut keyed: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (first.offset_of(p), i))
        .collect();
    // deepest (largest offset away from the camera) first
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut keep: Vec<usize> = keyed[drop..].iter().map(|&(_, i)| i).collect();
    keep.sort_unstable();
    let kept: Vec<Vector3<f64>> = keep.into_iter().map(|i| points[i]).collect();
    fit_plane_svd(&kept)
}

pub fn fit_plane_with_mode(points: &[Vector3<f64>], mode: LevelingMode) -> Result<Plane, PlaneFitError> {
    match mode {
        LevelingMode::AllPixels => fit_plane_svd(points),
        LevelingMode::Trimmed { trim_fraction } => fit_plane_trimmed(points, trim_fraction),
    }
}

/// Minimal rotation taking the plane normal onto +z.
pub fn leveling_rotation(plane: &Plane) -> LevelingRotation {
    let z = Vector3::z();
    let rotation = match Unit::try_new(plane.normal.cross(&z), 0.0) {
        Some(axis) => {
            // atan2 keeps full precision for tiny angles where acos does not
            let angle = plane.normal.cross(&z).norm().atan2(plane.normal.dot(&z));
            Rotation3::from_axis_angle(&axis, angle)
        }
        None => Rotation3::identity(),
    };
    let reference_height = (rotation * plane.centroid).z;
    LevelingRotation {
        rotation,
        reference_height,
    }
}

/// Per-pixel elevation above the leveled plane; invalid depth stays `NaN`.
pub fn level_frame(
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    lvl: &LevelingRotation,
) -> Result<ElevationImage, PlaneFitError> {
    intr.check_resolution(depth.width(), depth.height())?;
    let m = lvl.rotation.matrix();
    let (r20, r21, r22) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    Ok(ElevationImage::from_fn(depth.width(), depth.height(), |u, v| {
        if !depth.is_valid_at(u, v) {
            return f64::NAN;
        }
        let p = unproject_unchecked(intr, u as f64, v as f64, *depth.get(u, v) as f64);
        let z = r20 * p.x + r21 * p.y + r22 * p.z;
        lvl.reference_height - z
    }))
}

/// Fits this frame's plane and returns it with its leveling rotation.
pub fn fit_frame(
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    mode: LevelingMode,
) -> Result<(Plane, LevelingRotation), PlaneFitError> {
    let cloud = depth_to_cloud(depth, intr)?;
    let plane = fit_plane_with_mode(cloud.points(), mode)?;
    Ok((plane, leveling_rotation(&plane)))
}
