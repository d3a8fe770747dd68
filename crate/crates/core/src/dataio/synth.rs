//! Synthetic pavement runs with analytic ground truth.
//!
//! The road is a height field `h(lat, lon)` in mm over lateral offset and
//! longitudinal station (both mm): a tilted plane minus defect relief. A nadir
//! camera at height `camera_height_mm` above the plane's reference point moves
//! along the travel axis in whole-pixel steps, so zero-tilt flat frames are
//! exact pixel translations of one another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::manifest::{
    DatasetManifest, Datum, DefectKind, ExtrinsicRecord, Frame, GroundTruthDefect, TravelAxis,
};
use super::DatasetError;
use crate::camera::{CameraIntrinsics, RigidTransform};
use crate::image::{Raster, Rgb, INVALID_DEPTH, MAX_VALID_DEPTH_MM, MIN_VALID_DEPTH_MM};

pub const LANE_WIDTH_M: f64 = 3.65;
pub const DEFAULT_CAMERA_HEIGHT_MM: f64 = 1000.0;
pub const DEFAULT_FRAME_COUNT: usize = 8;
pub const DEFAULT_OVERLAP_FRACTION: f64 = 0.6;
pub const DEFAULT_NOISE_SIGMA0_MM: f64 = 1.0;
pub const DEFAULT_NOISE_K_PER_MM: f64 = 1.5e-6;

/// Rut cross-section sigma as a fraction of the declared width.
pub const RUT_SIGMA_PER_WIDTH: f64 = 0.25;
pub const WIDTH_CONVENTION: &str =
    "rut: gaussian cross-section with sigma = width/4 (declared width spans the exp(-2) depth level); \
     pothole: depth*(1-rho^4) bowl whose declared width and length are the full rim extents";

/// Longest longitudinal fade at the ends of a rut, mm.
const RUT_TAPER_MM: f64 = 100.0;
const SPECKLE_CELL_MM: f64 = 9.0;
const SPECKLE_PROBABILITY: f64 = 0.05;
const SPECKLE_SIGMA_MM: f64 = 4.0;

/// Intrinsics of the simulated sensor (VGA, 525 px focal length).
pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(525.0, 525.0, 319.5, 239.5, 640, 480).expect("valid default intrinsics")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub lane_width_m: f64,
    pub camera_height_mm: f64,
    /// Surface grade along image x.
    pub tilt_x: f64,
    /// Surface grade along image y.
    pub tilt_y: f64,
    pub frame_count: usize,
    pub overlap_fraction: f64,
    pub noise_sigma0_mm: f64,
    pub noise_k_per_mm: f64,
    pub seed: u64,
    pub defects: Vec<GroundTruthDefect>,
    /// Lateral camera position; lane center when absent.
    pub camera_offset_m: Option<f64>,
    /// Station of the first camera position.
    pub start_station_m: f64,
    pub travel_axis: TravelAxis,
    /// When set, depth comes from a second camera displaced by this much
    /// along -x and the manifest carries the extrinsic.
    pub ir_baseline_mm: Option<f64>,
    pub intrinsics: CameraIntrinsics,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            lane_width_m: LANE_WIDTH_M,
            camera_height_mm: DEFAULT_CAMERA_HEIGHT_MM,
            tilt_x: 0.0,
            tilt_y: 0.0,
            frame_count: DEFAULT_FRAME_COUNT,
            overlap_fraction: DEFAULT_OVERLAP_FRACTION,
            noise_sigma0_mm: DEFAULT_NOISE_SIGMA0_MM,
            noise_k_per_mm: DEFAULT_NOISE_K_PER_MM,
            seed: 0,
            defects: Vec::new(),
            camera_offset_m: None,
            start_station_m: 0.0,
            travel_axis: TravelAxis::Y,
            ir_baseline_mm: None,
            intrinsics: default_intrinsics(),
        }
    }
}

impl SynthSpec {
    pub fn noiseless(mut self) -> Self {
        self.noise_sigma0_mm = 0.0;
        self.noise_k_per_mm = 0.0;
        self
    }

    pub fn camera_offset(&self) -> f64 {
        self.camera_offset_m.unwrap_or(self.lane_width_m / 2.0)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidSpec(m));
        if !(self.lane_width_m > 0.0) {
            return bad(format!("lane width must be positive, got {}", self.lane_width_m));
        }
        let h = self.camera_height_mm;
        if !(h >= MIN_VALID_DEPTH_MM as f64 && h <= MAX_VALID_DEPTH_MM as f64) {
            return bad(format!("camera height {h} mm is outside the sensor range"));
        }
        if self.frame_count == 0 {
            return bad("frame_count must be at least 1".into());
        }
        if !(self.overlap_fraction > 0.0 && self.overlap_fraction < 1.0) {
            return bad(format!("overlap_fraction must lie in (0, 1), got {}", self.overlap_fraction));
        }
        if !(self.noise_sigma0_mm >= 0.0 && self.noise_k_per_mm >= 0.0) {
            return bad("noise parameters must be non-negative".into());
        }
        if !self.tilt_x.is_finite() || !self.tilt_y.is_finite() || self.tilt_x.hypot(self.tilt_y) >= 0.5 {
            return bad("tilt grades must be finite and below 0.5".into());
        }
        if let Some(b) = self.ir_baseline_mm {
            if !b.is_finite() {
                return bad("ir baseline must be finite".into());
            }
        }
        self.intrinsics
            .validate()
            .map_err(|e| DatasetError::InvalidSpec(e.to_string()))?;
        let cam = self.camera_offset();
        if !(0.0..=self.lane_width_m).contains(&cam) {
            return bad(format!("camera offset {cam} m is outside the lane"));
        }
        for (i, d) in self.defects.iter().enumerate() {
            d.validate().map_err(DatasetError::InvalidSpec)?;
            let half = d.width_mm / 2000.0;
            if d.offset_m - half < 0.0 || d.offset_m + half > self.lane_width_m {
                return Err(DatasetError::DefectOutsideLane { index: i });
            }
        }
        Ok(())
    }
}

/// Pixel step between consecutive frames along the travel axis.
pub fn frame_step_px(spec: &SynthSpec) -> usize {
    let along = match spec.travel_axis {
        TravelAxis::X => spec.intrinsics.width,
        TravelAxis::Y => spec.intrinsics.height,
    };
    (((1.0 - spec.overlap_fraction) * along as f64).floor() as usize).max(1)
}

/// Translation taking frame `i + 1` pixels to frame `i` pixels on flat,
/// untilted ground.
pub fn pairwise_translation(spec: &SynthSpec) -> (f64, f64) {
    let s = frame_step_px(spec) as f64;
    match spec.travel_axis {
        TravelAxis::X => (s, 0.0),
        TravelAxis::Y => (0.0, s),
    }
}

/// Analytic height field.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    grade_lat: f64,
    grade_lon: f64,
    ref_lat_mm: f64,
    ref_lon_mm: f64,
    defects: Vec<GroundTruthDefect>,
}

fn smooth_taper(ds: f64, half_length: f64) -> f64 {
    let ramp = RUT_TAPER_MM.min(half_length / 2.0);
    let d = ds.abs();
    if d <= half_length - ramp {
        1.0
    } else if d >= half_length {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (d - (half_length - ramp)) / ramp).cos())
    }
}

impl Scene {
    pub fn new(spec: &SynthSpec) -> Self {
        let (grade_lat, grade_lon) = match spec.travel_axis {
            TravelAxis::Y => (spec.tilt_x, spec.tilt_y),
            TravelAxis::X => (spec.tilt_y, spec.tilt_x),
        };
        Self {
            grade_lat,
            grade_lon,
            ref_lat_mm: spec.camera_offset() * 1000.0,
            ref_lon_mm: spec.start_station_m * 1000.0,
            defects: spec.defects.clone(),
        }
    }

    /// Depth of one defect at a point, mm (positive down).
    pub fn defect_depth(d: &GroundTruthDefect, lat_mm: f64, lon_mm: f64) -> f64 {
        let d_off = lat_mm - d.offset_m * 1000.0;
        let d_st = lon_mm - d.station_m * 1000.0;
        match d.kind {
            DefectKind::Rut => {
                let half = d.length_mm / 2.0;
                if d_st.abs() >= half {
                    return 0.0;
                }
                let w = RUT_SIGMA_PER_WIDTH * d.width_mm;
                d.depth_mm * (-d_off * d_off / (2.0 * w * w)).exp() * smooth_taper(d_st, half)
            }
            DefectKind::Pothole => {
                let a = 2.0 * d_off / d.width_mm;
                let b = 2.0 * d_st / d.length_mm;
                let rho4 = a.powi(4) + b.powi(4);
                if rho4 < 1.0 {
                    d.depth_mm * (1.0 - rho4)
                } else {
                    0.0
                }
            }
        }
    }

    /// Sum of defect relief at a point, mm (zero or negative).
    pub fn relief(&self, lat_mm: f64, lon_mm: f64) -> f64 {
        -self
            .defects
            .iter()
            .map(|d| Self::defect_depth(d, lat_mm, lon_mm))
            .sum::<f64>()
    }

    pub fn plane_height(&self, lat_mm: f64, lon_mm: f64) -> f64 {
        self.grade_lat * (lat_mm - self.ref_lat_mm) + self.grade_lon * (lon_mm - self.ref_lon_mm)
    }

    pub fn height(&self, lat_mm: f64, lon_mm: f64) -> f64 {
        self.plane_height(lat_mm, lon_mm) + self.relief(lat_mm, lon_mm)
    }
}

/// One simulated pinhole camera pose.
struct Pose<'a> {
    spec: &'a SynthSpec,
    /// Extra displacement along image x, mm (depth camera baseline).
    shift_x_mm: f64,
    frame: usize,
}

impl Pose<'_> {
    /// Ground point `(lat, lon)` hit by the ray through `(u, v)` at depth `z`.
    ///
    /// The longitudinal coordinate is assembled as one quotient of exactly
    /// representable terms so that shifted frames reproduce identical values.
    #[inline]
    fn ground(&self, u: usize, v: usize, z: f64) -> (f64, f64) {
        let s = self.spec;
        let k = &s.intrinsics;
        let h = s.camera_height_mm;
        let shift = (self.frame * frame_step_px(s)) as f64;
        let cam_lat = s.camera_offset() * 1000.0;
        let start = s.start_station_m * 1000.0;
        match s.travel_axis {
            TravelAxis::Y => (
                cam_lat + self.shift_x_mm + z * (u as f64 - k.cx) / k.fx,
                start + (z * (v as f64 - k.cy) + h * shift) / k.fy,
            ),
            TravelAxis::X => (
                cam_lat + z * (v as f64 - k.cy) / k.fy,
                start + self.shift_x_mm + (z * (u as f64 - k.cx) + h * shift) / k.fx,
            ),
        }
    }

    /// Depth along the optical axis where the ray meets the surface.
    fn intersect(&self, scene: &Scene, u: usize, v: usize) -> f64 {
        let h = self.spec.camera_height_mm;
        let g = |z: f64| {
            let (lat, lon) = self.ground(u, v, z);
            z - h + scene.height(lat, lon)
        };
        let mut z = h;
        for _ in 0..60 {
            let (lat, lon) = self.ground(u, v, z);
            let next = h - scene.height(lat, lon);
            if (next - z).abs() < 1e-10 {
                return next;
            }
            z = next;
        }
        // Fixed point did not settle (steep relief); bracket and bisect.
        let mut span = 16.0;
        let (mut lo, mut hi) = (h - span, h + span);
        while g(lo).signum() == g(hi).signum() && span < h {
            span *= 2.0;
            lo = (h - span).max(1.0);
            hi = h + span;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(lo).signum() == g(mid).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[inline]
fn lattice(seed: u64, salt: u64, i: i64, j: i64) -> f64 {
    let h = splitmix(seed ^ splitmix(salt ^ splitmix((i as u64) ^ splitmix(j as u64))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(seed: u64, salt: u64, x: f64, y: f64, cell: f64) -> f64 {
    let (fx, fy) = (x / cell, y / cell);
    let (ix, iy) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - ix, fy - iy);
    let (sx, sy) = (tx * tx * (3.0 - 2.0 * tx), ty * ty * (3.0 - 2.0 * ty));
    let (i, j) = (ix as i64, iy as i64);
    let a = lattice(seed, salt, i, j);
    let b = lattice(seed, salt, i + 1, j);
    let c = lattice(seed, salt, i, j + 1);
    let d = lattice(seed, salt, i + 1, j + 1);
    (a * (1.0 - sx) + b * sx) * (1.0 - sy) + (c * (1.0 - sx) + d * sx) * sy
}

/// Gray albedo of the road surface, anchored to ground coordinates.
fn albedo(seed: u64, lat: f64, lon: f64, relief: f64) -> f64 {
    let mut a = 70.0
        + 90.0
            * (0.5 * value_noise(seed, 1, lat, lon, 12.0)
                + 0.3 * value_noise(seed, 2, lat, lon, 28.0)
                + 0.2 * value_noise(seed, 3, lat, lon, 64.0));
    let (ci, cj) = ((lat / SPECKLE_CELL_MM).floor() as i64, (lon / SPECKLE_CELL_MM).floor() as i64);
    for j in cj - 1..=cj + 1 {
        for i in ci - 1..=ci + 1 {
            if lattice(seed, 7, i, j) >= SPECKLE_PROBABILITY {
                continue;
            }
            let px = (i as f64 + 0.2 + 0.6 * lattice(seed, 8, i, j)) * SPECKLE_CELL_MM;
            let py = (j as f64 + 0.2 + 0.6 * lattice(seed, 9, i, j)) * SPECKLE_CELL_MM;
            let sign = if lattice(seed, 10, i, j) < 0.5 { -1.0 } else { 1.0 };
            let amp = sign * (120.0 + 80.0 * lattice(seed, 11, i, j));
            let d2 = (lat - px).powi(2) + (lon - py).powi(2);
            a += amp * (-d2 / (2.0 * SPECKLE_SIGMA_MM * SPECKLE_SIGMA_MM)).exp();
        }
    }
    a *= 1.0 - 0.4 * (-relief / 20.0).clamp(0.0, 1.0);
    a.clamp(0.0, 255.0)
}

fn color_of(a: f64) -> Rgb {
    [a.round() as u8, (0.96 * a).round() as u8, (0.92 * a).round() as u8]
}

fn quantize_depth(z: f64) -> u16 {
    let q = z.round();
    if q >= MIN_VALID_DEPTH_MM as f64 && q <= MAX_VALID_DEPTH_MM as f64 {
        q as u16
    } else {
        INVALID_DEPTH
    }
}

/// Ground position of reference-frame pixel (0, 0) on the road plane.
pub fn datum(spec: &SynthSpec) -> Datum {
    let pose = Pose {
        spec,
        shift_x_mm: 0.0,
        frame: 0,
    };
    let (lat, lon) = pose.ground(0, 0, spec.camera_height_mm);
    Datum {
        station_m: lon / 1000.0,
        offset_m: lat / 1000.0,
    }
}

/// Renders one frame: exact depth (before noise) and color.
fn render_frame(spec: &SynthSpec, scene: &Scene, k: usize) -> (Raster<f64>, Raster<Rgb>) {
    let intr = &spec.intrinsics;
    let color_pose = Pose {
        spec,
        shift_x_mm: 0.0,
        frame: k,
    };
    let depth_pose = Pose {
        spec,
        shift_x_mm: -spec.ir_baseline_mm.unwrap_or(0.0),
        frame: k,
    };
    let color = Raster::from_fn(intr.width, intr.height, |u, v| {
        let z = color_pose.intersect(scene, u, v);
        let (lat, lon) = color_pose.ground(u, v, z);
        color_of(albedo(spec.seed, lat, lon, scene.relief(lat, lon)))
    });
    let depth = Raster::from_fn(intr.width, intr.height, |u, v| depth_pose.intersect(scene, u, v));
    (depth, color)
}

/// Builds a dataset whose manifest carries the defects as ground truth.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(DatasetManifest, Vec<Frame>), DatasetError> {
    spec.validate()?;
    let scene = Scene::new(spec);
    let mut manifest = DatasetManifest::with_frames(spec.frame_count, spec.intrinsics, spec.intrinsics);
    manifest.travel_axis = spec.travel_axis;
    manifest.ground_truth = spec.defects.clone();
    manifest.datum = Some(datum(spec));
    manifest.width_convention = Some(WIDTH_CONVENTION.to_string());
    if let Some(b) = spec.ir_baseline_mm {
        let t = RigidTransform::from_translation(nalgebra::Vector3::new(-b, 0.0, 0.0));
        manifest.preregistered = false;
        manifest.extrinsic = Some(ExtrinsicRecord::from_transform(&t));
    }

    let noisy = spec.noise_sigma0_mm > 0.0 || spec.noise_k_per_mm > 0.0;
    let mut frames = Vec::with_capacity(spec.frame_count);
    for k in 0..spec.frame_count {
        let (exact, color) = render_frame(spec, &scene, k);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(k as u64 + 1);
        let depth = if noisy {
            let mut out = Raster::filled(exact.width(), exact.height(), INVALID_DEPTH);
            for (o, &z) in out.pixels_mut().iter_mut().zip(exact.pixels()) {
                let n: f64 = StandardNormal.sample(&mut rng);
                let sigma = spec.noise_sigma0_mm + spec.noise_k_per_mm * z * z;
                *o = quantize_depth(z + sigma * n);
            }
            out
        } else {
            exact.map(|&z| quantize_depth(z))
        };
        frames.push(Frame { color, depth });
    }
    Ok((manifest, frames))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(spec: SynthSpec) -> SynthSpec {
        SynthSpec {
            intrinsics: CameraIntrinsics::new(105.0, 105.0, 63.5, 47.5, 128, 96).unwrap(),
            ..spec
        }
    }

    fn rut(depth: f64) -> GroundTruthDefect {
        GroundTruthDefect {
            kind: DefectKind::Rut,
            depth_mm: depth,
            width_mm: 400.0,
            length_mm: 6000.0,
            station_m: 1.0,
            offset_m: 1.825,
        }
    }

    #[test]
    fn default_lane_is_standard_width() {
        assert_eq!(LANE_WIDTH_M, 3.65);
        assert_eq!(SynthSpec::default().camera_offset(), 1.825);
    }

    #[test]
    fn flat_noiseless_depth_is_camera_height() {
        let spec = small(SynthSpec::default().noiseless());
        let (_, frames) = generate_synthetic(&spec).unwrap();
        for f in &frames {
            assert!(f.depth.pixels().iter().all(|&d| d == 1000));
        }
    }

    #[test]
    fn tilted_plane_matches_analytic_depth() {
        let spec = small(SynthSpec {
            tilt_x: 0.03,
            tilt_y: -0.02,
            frame_count: 2,
            ..SynthSpec::default().noiseless()
        });
        let (_, frames) = generate_synthetic(&spec).unwrap();
        let k = spec.intrinsics;
        // plane z = H - gx*(X) - gy*(Y - Y0), with X = z*a, Y = z*b + Y0_k
        let (gx, gy, h) = (spec.tilt_x, spec.tilt_y, spec.camera_height_mm);
        for (fi, f) in frames.iter().enumerate() {
            let y_cam = h * (fi * frame_step_px(&spec)) as f64 / k.fy;
            for v in 0..k.height {
                for u in 0..k.width {
                    let a = (u as f64 - k.cx) / k.fx;
                    let b = (v as f64 - k.cy) / k.fy;
                    let z = (h - gy * y_cam) / (1.0 + gx * a + gy * b);
                    assert!((*f.depth.get(u, v) as f64 - z).abs() <= 0.5 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn rut_field_minimum() {
        let spec = SynthSpec {
            defects: vec![rut(10.0)],
            ..SynthSpec::default()
        };
        let scene = Scene::new(&spec);
        assert!((scene.height(1825.0, 1000.0) + 10.0).abs() < 1e-12);
        // exp(-2) depth at half the declared width
        let edge = scene.height(1825.0 + 200.0, 1000.0);
        assert!((edge + 10.0 * (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn pothole_rim() {
        let d = GroundTruthDefect {
            kind: DefectKind::Pothole,
            depth_mm: 50.0,
            width_mm: 300.0,
            length_mm: 400.0,
            station_m: 0.5,
            offset_m: 1.5,
        };
        assert_eq!(Scene::defect_depth(&d, 1500.0, 500.0), 50.0);
        assert_eq!(Scene::defect_depth(&d, 1650.0, 500.0), 0.0);
        assert_eq!(Scene::defect_depth(&d, 1500.0, 700.0), 0.0);
        assert!(Scene::defect_depth(&d, 1640.0, 500.0) > 0.0);
    }

    #[test]
    fn noiseless_rut_depth_in_frames() {
        let spec = SynthSpec {
            defects: vec![rut(10.0)],
            frame_count: 1,
            start_station_m: 1.0,
            ..SynthSpec::default().noiseless()
        };
        let (_, frames) = generate_synthetic(&spec).unwrap();
        let max = *frames[0].depth.pixels().iter().max().unwrap();
        assert_eq!(max, 1010);
    }

    #[test]
    fn seeded_determinism_and_noise_streams() {
        let spec = small(SynthSpec {
            frame_count: 2,
            seed: 42,
            ..SynthSpec::default()
        });
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.1[0].depth, a.1[1].depth);
        let other = generate_synthetic(&SynthSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.1[0].depth, other.1[0].depth);
    }

    #[test]
    fn noise_scale_follows_model() {
        let spec = SynthSpec {
            frame_count: 1,
            ..SynthSpec::default()
        };
        let (_, frames) = generate_synthetic(&spec).unwrap();
        let n = frames[0].depth.pixels().len() as f64;
        let var = frames[0]
            .depth
            .pixels()
            .iter()
            .map(|&d| (d as f64 - 1000.0).powi(2))
            .sum::<f64>()
            / n;
        // sigma 2.5 mm plus uniform quantization variance 1/12
        let expected = 2.5f64.powi(2) + 1.0 / 12.0;
        assert!((var - expected).abs() / expected < 0.03, "{var}");
    }

    #[test]
    fn frames_are_exact_translations() {
        let spec = small(SynthSpec {
            frame_count: 3,
            ..SynthSpec::default().noiseless()
        });
        let (_, frames) = generate_synthetic(&spec).unwrap();
        let step = frame_step_px(&spec);
        assert_eq!(step, 38);
        for w in frames.windows(2) {
            for v in 0..96 - step {
                for u in 0..128 {
                    assert_eq!(w[1].color.get(u, v), w[0].color.get(u, v + step));
                }
            }
        }
    }

    #[test]
    fn consecutive_footprints_overlap() {
        let spec = small(SynthSpec::default().noiseless());
        let k = spec.intrinsics;
        let rows = k.height as f64;
        let step = frame_step_px(&spec) as f64;
        assert!((rows - step) / rows >= spec.overlap_fraction);
        let spec_x = SynthSpec {
            travel_axis: TravelAxis::X,
            ..spec
        };
        assert_eq!(pairwise_translation(&spec_x), (51.0, 0.0));
    }

    #[test]
    fn texture_has_contrast() {
        let spec = small(SynthSpec {
            frame_count: 1,
            ..SynthSpec::default().noiseless()
        });
        let (_, frames) = generate_synthetic(&spec).unwrap();
        let g = frames[0].color.to_gray();
        let (lo, hi) = g
            .pixels()
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi - lo > 60.0);
    }

    #[test]
    fn defect_outside_lane() {
        let mut d = rut(10.0);
        d.offset_m = 3.6;
        let spec = SynthSpec {
            defects: vec![d],
            ..SynthSpec::default()
        };
        assert!(matches!(
            generate_synthetic(&spec),
            Err(DatasetError::DefectOutsideLane { index: 0 })
        ));
    }

    #[test]
    fn baseline_sets_extrinsic() {
        let spec = small(SynthSpec {
            frame_count: 1,
            ir_baseline_mm: Some(25.0),
            ..SynthSpec::default().noiseless()
        });
        let (m, _) = generate_synthetic(&spec).unwrap();
        assert!(!m.preregistered);
        assert_eq!(m.extrinsic.unwrap().translation_mm, [-25.0, 0.0, 0.0]);
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            SynthSpec {
                overlap_fraction: 1.0,
                ..SynthSpec::default()
            },
            SynthSpec {
                camera_height_mm: 100.0,
                ..SynthSpec::default()
            },
            SynthSpec {
                frame_count: 0,
                ..SynthSpec::default()
            },
        ] {
            assert!(matches!(generate_synthetic(&spec), Err(DatasetError::InvalidSpec(_))));
        }
    }
}
