//! Straightedge rut depth.
//!
//! A straightedge laid across a profile rests on its upper convex hull, so the
//! rut depth is the largest vertical gap between hull and profile.

use serde::{Deserialize, Serialize};

use super::profile::TransverseProfile;

pub const DEFAULT_SLIDING_SPAN_M: f64 = 2.0;
/// Gaps at or below this are rounding noise on straight runs and read as 0.
pub const GAP_FLOOR_MM: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StraightedgeMode {
    /// One straightedge spanning the whole profile.
    #[default]
    FullWidth,
    /// A straightedge of fixed length slid across the profile.
    Sliding { span_m: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RutMeasurement {
    pub depth_mm: f64,
    pub offset_at_max_m: f64,
    pub mode: StraightedgeMode,
}

/// Elevation at `x` on the chord through `a` and `b`.
#[inline]
pub fn chord_value(a: (f64, f64), b: (f64, f64), x: f64) -> f64 {
    if x == a.0 {
        return a.1;
    }
    if x == b.0 {
        return b.1;
    }
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

/// Indices of the upper hull vertices of points sorted by strictly increasing x.
pub fn upper_hull(points: &[(f64, f64)]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        while hull.len() >= 2 {
            let a = points[hull[hull.len() - 2]];
            let b = points[hull[hull.len() - 1]];
            // drop b unless it lies strictly above the chord a-p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Hull elevation at every sample.
pub fn hull_values(points: &[(f64, f64)]) -> Vec<f64> {
    let hull = upper_hull(points);
    let mut out = Vec::with_capacity(points.len());
    let mut e = 0;
    for (i, p) in points.iter().enumerate() {
        while e + 1 < hull.len() - 1 && hull[e + 1] < i {
            e += 1;
        }
        if hull.len() == 1 {
            out.push(p.1);
        } else {
            out.push(chord_value(points[hull[e]], points[hull[e + 1]], p.0));
        }
    }
    out
}

/// `(depth, index)` of the largest hull gap; ties go to the lowest index.
fn max_gap(points: &[(f64, f64)]) -> (f64, usize) {
    let hv = hull_values(points);
    let mut best = (0.0, 0usize);
    for (i, (h, p)) in hv.iter().zip(points).enumerate() {
        let gap = h - p.1;
        if gap > best.0 && gap > GAP_FLOOR_MM {
            best = (gap, i);
        }
    }
    best
}

pub fn rut_depth_straightedge(profile: &TransverseProfile, mode: StraightedgeMode) -> RutMeasurement {
    let pts = &profile.samples;
    let (depth, idx) = match mode {
        StraightedgeMode::FullWidth => max_gap(pts),
        StraightedgeMode::Sliding { span_m } => {
            let mut best = (0.0, 0usize);
            let mut hi = 0usize;
            for lo in 0..pts.len() {
                while hi + 1 < pts.len() && pts[hi + 1].0 - pts[lo].0 <= span_m {
                    hi += 1;
                }
                hi = hi.max(lo);
                let (d, i) = max_gap(&pts[lo..=hi]);
                if d > best.0 || (d == best.0 && d > 0.0 && lo + i < best.1) {
                    best = (d, lo + i);
                }
                if hi == pts.len() - 1 {
                    break;
                }
            }
            best
        }
    };
    RutMeasurement {
        depth_mm: depth,
        offset_at_max_m: pts.get(idx).map_or(0.0, |p| p.0),
        mode,
    }
}

/// Hull vertices as `(offset, elevation)`, for plotting.
pub fn hull_polyline(profile: &TransverseProfile) -> Vec<(f64, f64)> {
    upper_hull(&profile.samples)
        .into_iter()
        .map(|i| profile.samples[i])
        .collect()
}
