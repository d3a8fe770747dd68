use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::pnm;
use super::DatasetError;
use crate::camera::{CameraIntrinsics, RigidTransform};
use crate::image::{ColorImage, DepthImage};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

/// Which image axis points along the direction of travel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TravelAxis {
    X,
    /// Rows advance with travel (nadir camera on a forward-moving cart).
    #[default]
    Y,
}

impl TravelAxis {
    pub fn code(self) -> u32 {
        match self {
            TravelAxis::X => 0,
            TravelAxis::Y => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(TravelAxis::X),
            1 => Some(TravelAxis::Y),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectKind {
    Rut,
    Pothole,
}

/// A defect with known dimensions. Lengths in mm, position in m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthDefect {
    pub kind: DefectKind,
    pub depth_mm: f64,
    /// Transverse extent.
    pub width_mm: f64,
    /// Longitudinal extent.
    pub length_mm: f64,
    pub station_m: f64,
    pub offset_m: f64,
}

impl GroundTruthDefect {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("depth_mm", self.depth_mm),
            ("width_mm", self.width_mm),
            ("length_mm", self.length_mm),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("defect {name} must be positive, got {v}"));
            }
        }
        if !self.station_m.is_finite() || !self.offset_m.is_finite() {
            return Err("defect position must be finite".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub index: usize,
    pub color: String,
    pub depth: String,
}

/// Depth-camera to color-camera transform as stored on disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrinsicRecord {
    pub rotation: [[f64; 3]; 3],
    pub translation_mm: [f64; 3],
}

impl ExtrinsicRecord {
    pub fn from_transform(t: &RigidTransform) -> Self {
        let r = t.rotation();
        let v = t.translation();
        Self {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation_mm: [v.x, v.y, v.z],
        }
    }

    pub fn to_transform(&self) -> Result<RigidTransform, DatasetError> {
        let r = Matrix3::from_fn(|i, j| self.rotation[i][j]);
        let t = Vector3::from(self.translation_mm);
        RigidTransform::new(r, t).map_err(|e| DatasetError::ValidationError(e.to_string()))
    }
}

/// Ground position (station, offset in m) of pixel (0, 0) of the reference
/// frame, on the undisturbed road plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Datum {
    pub station_m: f64,
    pub offset_m: f64,
}

/// How depth pixels relate to color pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DepthRegistration {
    /// Depth already lies on the color pixel grid.
    Preregistered,
    Extrinsic(RigidTransform),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub frames: Vec<FrameEntry>,
    pub depth_intrinsics: CameraIntrinsics,
    pub color_intrinsics: CameraIntrinsics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrinsic: Option<ExtrinsicRecord>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub preregistered: bool,
    #[serde(default)]
    pub travel_axis: TravelAxis,
    #[serde(default)]
    pub ground_truth: Vec<GroundTruthDefect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datum: Option<Datum>,
    /// Free-text note on how defect widths are defined.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_convention: Option<String>,
}

impl DatasetManifest {
    /// Manifest with conventional file names for `count` frames.
    pub fn with_frames(count: usize, depth_intr: CameraIntrinsics, color_intr: CameraIntrinsics) -> Self {
        Self {
            version: MANIFEST_VERSION,
            frames: (0..count).map(frame_entry).collect(),
            depth_intrinsics: depth_intr,
            color_intrinsics: color_intr,
            extrinsic: None,
            preregistered: true,
            travel_axis: TravelAxis::Y,
            ground_truth: Vec::new(),
            datum: None,
            width_convention: None,
        }
    }

    pub fn registration(&self) -> Result<DepthRegistration, DatasetError> {
        match (self.preregistered, &self.extrinsic) {
            (true, None) => Ok(DepthRegistration::Preregistered),
            (false, Some(e)) => Ok(DepthRegistration::Extrinsic(e.to_transform()?)),
            (true, Some(_)) => Err(DatasetError::ValidationError(
                "manifest sets both an extrinsic and preregistered".into(),
            )),
            (false, None) => Err(DatasetError::ValidationError(
                "manifest needs an extrinsic or preregistered: true".into(),
            )),
        }
    }

    /// Checks everything that does not need the frame files.
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.version != MANIFEST_VERSION {
            return Err(DatasetError::InvalidManifest(format!(
                "unsupported version {}",
                self.version
            )));
        }
        for intr in [&self.depth_intrinsics, &self.color_intrinsics] {
            intr.validate()
                .map_err(|e| DatasetError::ValidationError(e.to_string()))?;
        }
        if self.preregistered
            && (self.depth_intrinsics.width, self.depth_intrinsics.height)
                != (self.color_intrinsics.width, self.color_intrinsics.height)
        {
            return Err(DatasetError::ValidationError(
                "preregistered frames need equal depth and color resolutions".into(),
            ));
        }
        self.registration()?;
        for w in self.frames.windows(2) {
            if w[1].index <= w[0].index {
                return Err(DatasetError::ValidationError(format!(
                    "frame indices must increase strictly ({} then {})",
                    w[0].index, w[1].index
                )));
            }
        }
        for d in &self.ground_truth {
            d.validate().map_err(DatasetError::ValidationError)?;
        }
        Ok(())
    }
}

pub fn frame_entry(index: usize) -> FrameEntry {
    FrameEntry {
        index,
        color: format!("color_{index:04}.ppm"),
        depth: format!("depth_{index:04}.pgm"),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub color: ColorImage,
    pub depth: DepthImage,
}

fn check_frames(manifest: &DatasetManifest, frames: &[Frame]) -> Result<(), DatasetError> {
    manifest.validate()?;
    if frames.len() != manifest.frames.len() {
        return Err(DatasetError::ValidationError(format!(
            "manifest lists {} frames, {} supplied",
            manifest.frames.len(),
            frames.len()
        )));
    }
    let (dw, dh) = (manifest.depth_intrinsics.width, manifest.depth_intrinsics.height);
    let (cw, ch) = (manifest.color_intrinsics.width, manifest.color_intrinsics.height);
    for (entry, f) in manifest.frames.iter().zip(frames) {
        if (f.depth.width(), f.depth.height()) != (dw, dh) || (f.color.width(), f.color.height()) != (cw, ch) {
            return Err(DatasetError::ValidationError(format!(
                "frame {} resolution does not match the manifest intrinsics",
                entry.index
            )));
        }
    }
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> DatasetError {
    DatasetError::IoFailure {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub fn manifest_json(manifest: &DatasetManifest) -> String {
    let mut s = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    s.push('\n');
    s
}

/// Writes `manifest.json` and one PGM/PPM pair per frame under `root`.
/// Everything is validated before the first byte is written.
pub fn write_dataset(manifest: &DatasetManifest, frames: &[Frame], root: &Path) -> Result<(), DatasetError> {
    check_frames(manifest, frames)?;
    fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
    for (entry, f) in manifest.frames.iter().zip(frames) {
        let dp = root.join(&entry.depth);
        fs::write(&dp, pnm::encode_depth_pgm(&f.depth)).map_err(|e| io_err(&dp, e))?;
        let cp = root.join(&entry.color);
        fs::write(&cp, pnm::encode_color_ppm(&f.color)).map_err(|e| io_err(&cp, e))?;
    }
    let mp = root.join(MANIFEST_FILE);
    fs::write(&mp, manifest_json(manifest)).map_err(|e| io_err(&mp, e))
}

pub fn read_manifest(root: &Path) -> Result<DatasetManifest, DatasetError> {
    let mp = root.join(MANIFEST_FILE);
    if !mp.is_file() {
        return Err(DatasetError::MissingManifest(mp));
    }
    let text = fs::read_to_string(&mp).map_err(|e| io_err(&mp, e))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| DatasetError::InvalidManifest(e.to_string()))?;
    manifest.validate()?;
    Ok(manifest)
}

fn read_file(path: PathBuf) -> Result<(PathBuf, Vec<u8>), DatasetError> {
    if !path.is_file() {
        return Err(DatasetError::MissingFile { path });
    }
    let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
    Ok((path, bytes))
}

/// Loads the manifest and every frame, checking resolutions against the
/// manifest intrinsics.
pub fn read_dataset(root: &Path) -> Result<(DatasetManifest, Vec<Frame>), DatasetError> {
    let manifest = read_manifest(root)?;
    let di = &manifest.depth_intrinsics;
    let ci = &manifest.color_intrinsics;
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for entry in &manifest.frames {
        let (dp, bytes) = read_file(root.join(&entry.depth))?;
        let depth = pnm::decode_depth_pgm(&bytes).map_err(|reason| DatasetError::CorruptImage {
            path: dp.clone(),
            reason,
        })?;
        let (cp, bytes) = read_file(root.join(&entry.color))?;
        let color = pnm::decode_color_ppm(&bytes).map_err(|reason| DatasetError::CorruptImage {
            path: cp.clone(),
            reason,
        })?;
        for (path, (w, h), intr) in [
            (&dp, (depth.width(), depth.height()), di),
            (&cp, (color.width(), color.height()), ci),
        ] {
            if (w, h) != (intr.width, intr.height) {
                return Err(DatasetError::ResolutionMismatch {
                    path: path.clone(),
                    expected: (intr.width, intr.height),
                    actual: (w, h),
                });
            }
        }
        frames.push(Frame { color, depth });
    }
    Ok((manifest, frames))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Raster;

    fn small_intr() -> CameraIntrinsics {
        CameraIntrinsics::new(50.0, 50.0, 15.5, 11.5, 32, 24).unwrap()
    }

    fn sample(n: usize) -> (DatasetManifest, Vec<Frame>) {
        let m = DatasetManifest::with_frames(n, small_intr(), small_intr());
        let frames = (0..n)
            .map(|i| Frame {
                color: Raster::from_fn(32, 24, |x, y| [x as u8, y as u8, i as u8]),
                depth: Raster::from_fn(32, 24, |x, y| 900 + (x * y + i) as u16),
            })
            .collect();
        (m, frames)
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (mut m, frames) = sample(3);
        m.ground_truth.push(GroundTruthDefect {
            kind: DefectKind::Pothole,
            depth_mm: 50.0,
            width_mm: 300.0,
            length_mm: 400.0,
            station_m: 0.1,
            offset_m: 1.825,
        });
        m.datum = Some(Datum {
            station_m: -0.4561,
            offset_m: 1.2,
        });
        write_dataset(&m, &frames, dir.path()).unwrap();
        let (m2, f2) = read_dataset(dir.path()).unwrap();
        assert_eq!(m, m2);
        assert_eq!(frames, f2);
    }

    #[test]
    fn deterministic_bytes() {
        let (m, frames) = sample(2);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_dataset(&m, &frames, a.path()).unwrap();
        write_dataset(&m, &frames, b.path()).unwrap();
        for name in ["manifest.json", "depth_0001.pgm", "color_0000.ppm"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap()
            );
        }
    }

    #[test]
    fn empty_frame_list() {
        let dir = tempfile::tempdir().unwrap();
        let (m, frames) = sample(0);
        write_dataset(&m, &frames, dir.path()).unwrap();
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("manifest.json")]);
    }

    #[test]
    fn missing_manifest_and_file() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(DatasetError::MissingManifest(_))));
        let (m, frames) = sample(2);
        write_dataset(&m, &frames, dir.path()).unwrap();
        fs::remove_file(dir.path().join("color_0001.ppm")).unwrap();
        match read_dataset(dir.path()) {
            Err(DatasetError::MissingFile { path }) => assert!(path.ends_with("color_0001.ppm")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_maxval_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let (m, frames) = sample(1);
        write_dataset(&m, &frames, dir.path()).unwrap();
        let mut bytes = b"P5\n32 24\n4095\n".to_vec();
        bytes.extend(std::iter::repeat_n(0u8, 32 * 24 * 2));
        fs::write(dir.path().join("depth_0000.pgm"), bytes).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(DatasetError::CorruptImage { .. })));
    }

    #[test]
    fn resolution_mismatch_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let (m, frames) = sample(1);
        write_dataset(&m, &frames, dir.path()).unwrap();
        let other = Raster::filled(16, 24, 1000u16);
        fs::write(dir.path().join("depth_0000.pgm"), pnm::encode_depth_pgm(&other)).unwrap();
        assert!(matches!(
            read_dataset(dir.path()),
            Err(DatasetError::ResolutionMismatch { expected: (32, 24), actual: (16, 24), .. })
        ));
    }

    #[test]
    fn validation_happens_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("out");
        let (m, mut frames) = sample(2);
        frames[1].depth = Raster::filled(31, 24, 1000);
        assert!(matches!(
            write_dataset(&m, &frames, &root),
            Err(DatasetError::ValidationError(_))
        ));
        assert!(!root.exists());
    }

    #[test]
    fn registration_flags() {
        let (mut m, _) = sample(1);
        assert_eq!(m.registration().unwrap(), DepthRegistration::Preregistered);
        m.extrinsic = Some(ExtrinsicRecord::from_transform(&RigidTransform::identity()));
        assert!(m.registration().is_err());
        m.preregistered = false;
        assert!(matches!(m.registration().unwrap(), DepthRegistration::Extrinsic(_)));
        let json = manifest_json(&m);
        assert!(json.contains("translation_mm") && !json.contains("preregistered"));
    }

    #[test]
    fn non_increasing_indices_rejected() {
        let (mut m, _) = sample(2);
        m.frames[1].index = 0;
        assert!(matches!(m.validate(), Err(DatasetError::ValidationError(_))));
    }
}
