use serde::{Deserialize, Serialize};

use super::AnalyzeError;
use crate::stitch::ElevationMosaic;

/// Longest run of missing samples bridged by linear interpolation.
pub const MAX_INTERPOLATED_GAP: usize = 10;
pub const MIN_PROFILE_SAMPLES: usize = 10;

/// Cross-section at one station; offsets strictly increase by one gsd.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransverseProfile {
    /// m from the first mosaic row (or column) along travel.
    pub station_m: f64,
    /// `(offset m, elevation mm)`.
    pub samples: Vec<(f64, f64)>,
}

impl TransverseProfile {
    pub fn new(station_m: f64, samples: Vec<(f64, f64)>) -> Result<Self, AnalyzeError> {
        if samples.len() < MIN_PROFILE_SAMPLES {
            return Err(AnalyzeError::ProfileTooSparse { samples: samples.len() });
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(AnalyzeError::InvalidProfile("offsets must increase strictly".into()));
        }
        if samples.iter().any(|s| !s.0.is_finite() || !s.1.is_finite()) {
            return Err(AnalyzeError::InvalidProfile("samples must be finite".into()));
        }
        Ok(Self { station_m, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedProfile {
    pub profile: TransverseProfile,
    /// Mosaic index along travel that was sampled.
    pub index: usize,
    /// Set when a gap too wide to bridge split the cross-section.
    pub gap_warning: bool,
}

/// Samples the mosaic cross-section nearest to `station_m`.
pub fn extract_profile(mosaic: &ElevationMosaic, station_m: f64) -> Result<ExtractedProfile, AnalyzeError> {
    extract_profile_band(mosaic, station_m, 0)
}

/// Like [`extract_profile`], but each sample is the mean of the valid mosaic
/// values within `half_band` cross-sections on either side of the station.
pub fn extract_profile_band(
    mosaic: &ElevationMosaic,
    station_m: f64,
    half_band: usize,
) -> Result<ExtractedProfile, AnalyzeError> {
    let gsd = mosaic.gsd_mm;
    let pos = (station_m * 1000.0 / gsd).round();
    if !(pos >= 0.0 && pos < mosaic.along_len() as f64) {
        return Err(AnalyzeError::StationOutOfRange {
            station_m,
            length_m: mosaic.length_mm() / 1000.0,
        });
    }
    let index = pos as usize;
    let rows = index.saturating_sub(half_band)..=(index + half_band).min(mosaic.along_len() - 1);
    let raw: Vec<f64> = (0..mosaic.across_len())
        .map(|c| {
            let (sum, n) = rows
                .clone()
                .map(|r| mosaic.at(r, c))
                .filter(|v| !v.is_nan())
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                f64::NAN
            } else {
                sum / n as f64
            }
        })
        .collect();
    let data: Vec<usize> = (0..raw.len()).filter(|&i| !raw[i].is_nan()).collect();
    if data.len() < MIN_PROFILE_SAMPLES {
        return Err(AnalyzeError::ProfileTooSparse { samples: data.len() });
    }

    // Split at gaps too wide to bridge; keep the longest piece.
    let mut segments: Vec<(usize, usize)> = Vec::new();
    let mut start = data[0];
    for w in data.windows(2) {
        if w[1] - w[0] - 1 > MAX_INTERPOLATED_GAP {
            segments.push((start, w[0]));
            start = w[1];
        }
    }
    segments.push((start, *data.last().unwrap()));
    let gap_warning = segments.len() > 1;
    let &(lo, hi) = segments
        .iter()
        .reduce(|best, s| if s.1 - s.0 > best.1 - best.0 { s } else { best })
        .unwrap();

    let mut filled = raw[lo..=hi].to_vec();
    let mut last = 0usize;
    for i in 1..filled.len() {
        if filled[i].is_nan() {
            continue;
        }
        if i - last > 1 {
            let (a, b) = (filled[last], filled[i]);
            for k in last + 1..i {
                let t = (k - last) as f64 / (i - last) as f64;
                filled[k] = a + t * (b - a);
            }
        }
        last = i;
    }
    let samples = filled
        .into_iter()
        .enumerate()
        .map(|(k, e)| ((lo + k) as f64 * gsd / 1000.0, e))
        .collect();
    Ok(ExtractedProfile {
        profile: TransverseProfile::new(station_m, samples)?,
        index,
        gap_warning,
    })
}

/// CSV with header `offset_m,elevation_mm`, six decimals.
pub fn profile_csv(profile: &TransverseProfile) -> String {
    let mut s = String::from("offset_m,elevation_mm\n");
    for (o, e) in &profile.samples {
        // adding zero folds -0.0 into 0.0
        s.push_str(&format!("{:.6},{:.6}\n", o + 0.0, e + 0.0));
    }
    s
}

/// Standalone 800x300 SVG of the profile and its straightedge chord.
pub fn profile_svg(profile: &TransverseProfile, hull: &[(f64, f64)]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 300.0;
    const PAD: f64 = 20.0;
    let xs = profile.samples.iter().map(|s| s.0);
    let ys = profile.samples.iter().map(|s| s.1).chain(hull.iter().map(|h| h.1));
    let (x0, x1) = xs.fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    let (y0, y1) = ys.fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    let sx = (W - 2.0 * PAD) / (x1 - x0).max(1e-9);
    let sy = (H - 2.0 * PAD) / (y1 - y0).max(1e-9);
    let pts = |it: &mut dyn Iterator<Item = &(f64, f64)>| {
        it.map(|(x, y)| format!("{:.2},{:.2}", PAD + (x - x0) * sx, H - PAD - (y - y0) * sy))
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"300\" viewBox=\"0 0 800 300\">\n\
         <rect width=\"800\" height=\"300\" fill=\"white\"/>\n\
         <polyline fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"{}\"/>\n\
         <polyline fill=\"none\" stroke=\"red\" stroke-width=\"1\" points=\"{}\"/>\n\
         <text x=\"{PAD}\" y=\"14\" font-size=\"12\">station {:.3} m</text>\n\
         </svg>\n",
        pts(&mut profile.samples.iter()),
        pts(&mut hull.iter()),
        profile.station_m
    )
}
