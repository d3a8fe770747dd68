//! ROI cropping and validity-aware Gaussian smoothing of depth frames.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{is_valid_depth, DepthImage, Placed, Raster, INVALID_DEPTH};

pub const DEFAULT_ROI_FRACTION: f64 = 0.8;
pub const DEFAULT_SMOOTH_SIGMA: f64 = 1.5;
pub const DEFAULT_SMOOTH_RADIUS: usize = 3;
/// Smallest ROI side accepted, in pixels.
pub const MIN_ROI_SIDE: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("ROI fractions must lie in (0, 1], got ({0}, {1})")]
    InvalidRoi(f64, f64),
    #[error("ROI of {width}x{height} px is below the {MIN_ROI_SIDE}x{MIN_ROI_SIDE} minimum")]
    RoiTooSmall { width: usize, height: usize },
    #[error("invalid smoothing parameters: {0}")]
    InvalidSmoothing(String),
}

/// Centered crop fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiSpec {
    pub fraction_x: f64,
    pub fraction_y: f64,
}

impl RoiSpec {
    pub fn new(fraction_x: f64, fraction_y: f64) -> Result<Self, PreprocessError> {
        let spec = Self {
            fraction_x,
            fraction_y,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        let ok = |f: f64| f > 0.0 && f <= 1.0;
        if !(ok(self.fraction_x) && ok(self.fraction_y)) {
            return Err(PreprocessError::InvalidRoi(self.fraction_x, self.fraction_y));
        }
        Ok(())
    }

    /// `(x0, y0, width, height)` of the crop on a `width`x`height` image.
    pub fn window(&self, width: usize, height: usize) -> Result<(usize, usize, usize, usize), PreprocessError> {
        self.validate()?;
        let cw = (width as f64 * self.fraction_x).round() as usize;
        let ch = (height as f64 * self.fraction_y).round() as usize;
        if cw < MIN_ROI_SIDE || ch < MIN_ROI_SIDE {
            return Err(PreprocessError::RoiTooSmall {
                width: cw,
                height: ch,
            });
        }
        Ok(((width - cw) / 2, (height - ch) / 2, cw, ch))
    }
}

impl Default for RoiSpec {
    fn default() -> Self {
        Self {
            fraction_x: DEFAULT_ROI_FRACTION,
            fraction_y: DEFAULT_ROI_FRACTION,
        }
    }
}

/// Gaussian kernel parameters, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothSpec {
    pub sigma: f64,
    pub radius: usize,
}

impl SmoothSpec {
    pub fn new(sigma: f64, radius: usize) -> Result<Self, PreprocessError> {
        let spec = Self { sigma, radius };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.sigma > 0.0) {
            return Err(PreprocessError::InvalidSmoothing(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        let min_radius = ((2.0 * self.sigma).ceil() as usize).max(1);
        if self.radius < min_radius {
            return Err(PreprocessError::InvalidSmoothing(format!(
                "radius {} below ceil(2 sigma) = {}",
                self.radius, min_radius
            )));
        }
        Ok(())
    }

    fn weights(&self) -> Vec<f64> {
        let two_s2 = 2.0 * self.sigma * self.sigma;
        (0..=self.radius)
            .map(|k| (-((k * k) as f64) / two_s2).exp())
            .collect()
    }
}

impl Default for SmoothSpec {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SMOOTH_SIGMA,
            radius: DEFAULT_SMOOTH_RADIUS,
        }
    }
}

/// Centered crop; the returned offset maps crop pixels back to the full frame.
pub fn crop_roi<T: Clone>(img: &Raster<T>, roi: &RoiSpec) -> Result<Placed<T>, PreprocessError> {
    let (x0, y0, w, h) = roi.window(img.width(), img.height())?;
    let image = img
        .window(x0, y0, w, h)
        .expect("ROI window lies inside the image by construction");
    Ok(Placed { image, x0, y0 })
}

/// Normalized convolution over valid neighbors only.
///
/// Output pixels with no valid neighbor under the kernel stay invalid. Results
/// are rounded half away from zero back to integer millimeters.
pub fn gaussian_smooth_depth(depth: &DepthImage, spec: &SmoothSpec) -> Result<DepthImage, PreprocessError> {
    spec.validate()?;
    let (w, h) = (depth.width(), depth.height());
    let weights = spec.weights();

    let mut num: Vec<f64> = Vec::with_capacity(w * h);
    let mut den: Vec<f64> = Vec::with_capacity(w * h);
    for &d in depth.pixels() {
        if is_valid_depth(d) {
            num.push(d as f64);
            den.push(1.0);
        } else {
            num.push(0.0);
            den.push(0.0);
        }
    }

    let num = convolve_rows(&convolve_cols(&num, w, h, &weights), w, h, &weights);
    let den = convolve_rows(&convolve_cols(&den, w, h, &weights), w, h, &weights);

    let out = num
        .iter()
        .zip(&den)
        .map(|(&n, &d)| {
            if d > 0.0 {
                (n / d).round().clamp(0.0, u16::MAX as f64) as u16
            } else {
                INVALID_DEPTH
            }
        })
        .collect();
    Ok(DepthImage::new(w, h, out).expect("same dimensions"))
}

// Each tap pairs the two mirrored neighbors before weighting, which makes the
// filter exactly mirror-equivariant in floating point.
fn convolve_rows(src: &[f64], w: usize, h: usize, weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = weights[0] * row[x];
            for (k, &wk) in weights.iter().enumerate().skip(1) {
                let left = if x >= k { row[x - k] } else { 0.0 };
                let right = if x + k < w { row[x + k] } else { 0.0 };
                acc += wk * (left + right);
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn convolve_cols(src: &[f64], w: usize, h: usize, weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = weights[0] * src[y * w + x];
            for (k, &wk) in weights.iter().enumerate().skip(1) {
                let up = if y >= k { src[(y - k) * w + x] } else { 0.0 };
                let down = if y + k < h { src[(y + k) * w + x] } else { 0.0 };
                acc += wk * (up + down);
            }
            out[y * w + x] = acc;
        }
    }
    out
}
