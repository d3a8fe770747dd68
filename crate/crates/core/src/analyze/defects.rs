use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::AnalyzeError;
use crate::dataio::{Datum, DefectKind, TravelAxis};
use crate::stitch::ElevationMosaic;

pub const DEFAULT_DEPTH_THRESHOLD_MM: f64 = 5.0;
pub const DEFAULT_MIN_AREA_MM2: f64 = 10_000.0;
/// Length over width above which an elongated component may be a rut.
pub const RUT_ASPECT_RATIO: f64 = 3.0;
/// Fraction of the mosaic length a rut must span.
pub const RUT_MIN_SPAN_FRACTION: f64 = 0.5;

/// One segmented depression. Positions are in m: along travel from the first
/// mosaic row (or column) and across from the first column (or row), unless
/// converted with [`georeference`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectMeasurement {
    pub kind: DefectKind,
    pub depth_mm: f64,
    /// Transverse bounding-box extent.
    pub width_mm: f64,
    /// Longitudinal bounding-box extent.
    pub length_mm: f64,
    pub station_m: f64,
    pub offset_m: f64,
    pub area_mm2: f64,
    pub pixel_count: usize,
}

/// Segments depressions deeper than `depth_threshold_mm` with 4-connectivity
/// and keeps components of at least `min_area_mm2`, largest first.
pub fn detect_defects(
    mosaic: &ElevationMosaic,
    depth_threshold_mm: f64,
    min_area_mm2: f64,
) -> Result<Vec<DefectMeasurement>, AnalyzeError> {
    if !(depth_threshold_mm > 0.0) || !(min_area_mm2 > 0.0) {
        return Err(AnalyzeError::InvalidThreshold(format!(
            "depth threshold {depth_threshold_mm} and min area {min_area_mm2} must be positive"
        )));
    }
    let (w, h) = (mosaic.width(), mosaic.height());
    let gsd = mosaic.gsd_mm;
    let px_area = gsd * gsd;
    let e = mosaic.elevation.pixels();
    let mask: Vec<bool> = e.iter().map(|&v| v < -depth_threshold_mm).collect();
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    let mut out = Vec::new();

    for seed in 0..w * h {
        if !mask[seed] || seen[seed] {
            continue;
        }
        seen[seed] = true;
        queue.push_back(seed);
        let (mut n, mut sx, mut sy) = (0usize, 0.0f64, 0.0f64);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0usize, 0usize);
        let mut deepest = f64::INFINITY;
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            n += 1;
            sx += x as f64;
            sy += y as f64;
            (x0, y0, x1, y1) = (x0.min(x), y0.min(y), x1.max(x), y1.max(y));
            deepest = deepest.min(e[i]);
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        let area = n as f64 * px_area;
        if area < min_area_mm2 {
            continue;
        }
        let (ext_x, ext_y) = ((x1 - x0 + 1) as f64 * gsd, (y1 - y0 + 1) as f64 * gsd);
        let (cx, cy) = (sx / n as f64 * gsd / 1000.0, sy / n as f64 * gsd / 1000.0);
        let (width, length, station, offset) = match mosaic.travel_axis {
            TravelAxis::Y => (ext_x, ext_y, cy, cx),
            TravelAxis::X => (ext_y, ext_x, cx, cy),
        };
        let elongated = length / width > RUT_ASPECT_RATIO && length > RUT_MIN_SPAN_FRACTION * mosaic.length_mm();
        out.push(DefectMeasurement {
            kind: if elongated { DefectKind::Rut } else { DefectKind::Pothole },
            depth_mm: -deepest,
            width_mm: width,
            length_mm: length,
            station_m: station,
            offset_m: offset,
            area_mm2: area,
            pixel_count: n,
        });
    }
    out.sort_by(|a, b| {
        b.pixel_count
            .cmp(&a.pixel_count)
            .then(a.station_m.total_cmp(&b.station_m))
            .then(a.offset_m.total_cmp(&b.offset_m))
    });
    Ok(out)
}

/// Converts mosaic-relative positions to road coordinates. `datum` is the
/// road position of reference-frame pixel (0, 0).
pub fn georeference(defects: &[DefectMeasurement], mosaic: &ElevationMosaic, datum: &Datum) -> Vec<DefectMeasurement> {
    let k = mosaic.gsd_mm / 1000.0;
    let (along0, across0) = match mosaic.travel_axis {
        TravelAxis::Y => (mosaic.origin_y, mosaic.origin_x),
        TravelAxis::X => (mosaic.origin_x, mosaic.origin_y),
    };
    defects
        .iter()
        .map(|d| DefectMeasurement {
            station_m: datum.station_m + along0 * k + d.station_m,
            offset_m: datum.offset_m + across0 * k + d.offset_m,
            ..*d
        })
        .collect()
}
