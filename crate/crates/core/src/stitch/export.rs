//! PLY point clouds and the binary ELEV mosaic grid.
//!
//! ELEV layout, little-endian: `"ELEV"`, u32 version, u32 width, u32 height,
//! f64 gsd (mm), f64 origin x, f64 origin y, u32 travel axis (0 = x, 1 = y),
//! then `width * height` f32 elevations (NaN = no data) and as many u32
//! counts, both row-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::mosaic::ElevationMosaic;
use super::StitchError;
use crate::camera::PointCloud;
use crate::dataio::TravelAxis;
use crate::image::{ColorImage, Raster};

pub const ELEV_MAGIC: &[u8; 4] = b"ELEV";
pub const ELEV_VERSION: u32 = 1;
const ELEV_HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 8 + 8 + 4;

fn io_err(path: &Path, e: std::io::Error) -> StitchError {
    StitchError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn ply_bytes(vertices: &[[f64; 3]], colors: Option<&[[u8; 3]]>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + vertices.len() * 40);
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        vertices.len()
    );
    if colors.is_some() {
        out.extend_from_slice(b"property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.extend_from_slice(b"end_header\n");
    for (i, v) in vertices.iter().enumerate() {
        let _ = write!(out, "{:.4} {:.4} {:.4}", v[0], v[1], v[2]);
        if let Some(c) = colors {
            let _ = write!(out, " {} {} {}", c[i][0], c[i][1], c[i][2]);
        }
        out.push(b'\n');
    }
    out
}

/// Writes a camera-frame point cloud (mm) as ASCII PLY.
pub fn export_ply_cloud(cloud: &PointCloud, path: &Path) -> Result<(), StitchError> {
    let verts: Vec<[f64; 3]> = cloud.points().iter().map(|p| [p.x, p.y, p.z]).collect();
    fs::write(path, ply_bytes(&verts, cloud.colors())).map_err(|e| io_err(path, e))
}

/// Writes every data pixel of the mosaic as `(col * gsd, row * gsd, elevation)`,
/// colored from `color` when it has the same size.
pub fn export_ply_mosaic(mosaic: &ElevationMosaic, color: Option<&ColorImage>, path: &Path) -> Result<(), StitchError> {
    let color = color.filter(|c| c.width() == mosaic.width() && c.height() == mosaic.height());
    let mut verts = Vec::new();
    let mut cols = Vec::new();
    for y in 0..mosaic.height() {
        for x in 0..mosaic.width() {
            let e = *mosaic.elevation.get(x, y);
            if e.is_nan() {
                continue;
            }
            verts.push([x as f64 * mosaic.gsd_mm, y as f64 * mosaic.gsd_mm, e]);
            if let Some(c) = color {
                cols.push(*c.get(x, y));
            }
        }
    }
    let colors = color.map(|_| cols.as_slice());
    fs::write(path, ply_bytes(&verts, colors)).map_err(|e| io_err(path, e))
}

pub fn encode_elev(m: &ElevationMosaic) -> Vec<u8> {
    let n = m.width() * m.height();
    let mut out = Vec::with_capacity(ELEV_HEADER_LEN + 8 * n);
    out.extend_from_slice(ELEV_MAGIC);
    out.extend_from_slice(&ELEV_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.width() as u32).to_le_bytes());
    out.extend_from_slice(&(m.height() as u32).to_le_bytes());
    out.extend_from_slice(&m.gsd_mm.to_le_bytes());
    out.extend_from_slice(&m.origin_x.to_le_bytes());
    out.extend_from_slice(&m.origin_y.to_le_bytes());
    out.extend_from_slice(&m.travel_axis.code().to_le_bytes());
    for &e in m.elevation.pixels() {
        out.extend_from_slice(&(e as f32).to_le_bytes());
    }
    for &c in m.count.pixels() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

fn corrupt(msg: &str) -> StitchError {
    StitchError::CorruptMosaic(msg.to_string())
}

pub fn decode_elev(bytes: &[u8]) -> Result<ElevationMosaic, StitchError> {
    if bytes.len() < ELEV_HEADER_LEN || &bytes[0..4] != ELEV_MAGIC {
        return Err(corrupt("missing ELEV header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != ELEV_VERSION {
        return Err(corrupt("unsupported ELEV version"));
    }
    let (w, h) = (u32_at(8) as usize, u32_at(12) as usize);
    let gsd = f64_at(16);
    let origin = (f64_at(24), f64_at(32));
    let axis = TravelAxis::from_code(u32_at(40)).ok_or_else(|| corrupt("bad travel axis code"))?;
    let n = w.checked_mul(h).ok_or_else(|| corrupt("grid too large"))?;
    if bytes.len() != ELEV_HEADER_LEN + 8 * n {
        return Err(corrupt("grid length does not match header"));
    }
    let grid = &bytes[ELEV_HEADER_LEN..ELEV_HEADER_LEN + 4 * n];
    let counts = &bytes[ELEV_HEADER_LEN + 4 * n..];
    let elevation: Vec<f64> = grid
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let count: Vec<u32> = counts
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let elevation = Raster::new(w, h, elevation).map_err(|e| corrupt(&e.to_string()))?;
    let count = Raster::new(w, h, count).map_err(|e| corrupt(&e.to_string()))?;
    ElevationMosaic::new(elevation, count, gsd, origin, axis)
}

pub fn write_elev(m: &ElevationMosaic, path: &Path) -> Result<(), StitchError> {
    fs::write(path, encode_elev(m)).map_err(|e| io_err(path, e))
}

pub fn read_elev(path: &Path) -> Result<ElevationMosaic, StitchError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_elev(&bytes)
}
