//! Row-major raster containers for depth, color and elevation data.

use thiserror::Error;

/// Sentinel for "no return" in a depth image.
pub const INVALID_DEPTH: u16 = 0;
/// Closest depth the sensor reports reliably, in millimeters.
pub const MIN_VALID_DEPTH_MM: u16 = 200;
/// Farthest depth the sensor reports reliably, in millimeters.
pub const MAX_VALID_DEPTH_MM: u16 = 8000;

/// 8-bit RGB triple.
pub type Rgb = [u8; 3];

/// Depth image in integer millimeters, `0` = invalid.
pub type DepthImage = Raster<u16>;
/// 8-bit RGB image.
pub type ColorImage = Raster<Rgb>;
/// Signed elevation in millimeters relative to a fitted pavement plane, `NaN` = no data.
pub type ElevationImage = Raster<f64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("pixel buffer holds {actual} samples, expected {width}x{height}")]
    SizeMismatch {
        width: usize,
        height: usize,
        actual: usize,
    },
    #[error("window {width}x{height}+{x0}+{y0} exceeds a {image_width}x{image_height} image")]
    WindowOutOfBounds {
        x0: usize,
        y0: usize,
        width: usize,
        height: usize,
        image_width: usize,
        image_height: usize,
    },
}

/// True for depths inside the trusted sensor range.
#[inline]
pub fn is_valid_depth(depth_mm: u16) -> bool {
    (MIN_VALID_DEPTH_MM..=MAX_VALID_DEPTH_MM).contains(&depth_mm)
}

/// Same check on a real-valued depth.
#[inline]
pub fn is_valid_depth_f64(depth_mm: f64) -> bool {
    depth_mm >= MIN_VALID_DEPTH_MM as f64 && depth_mm <= MAX_VALID_DEPTH_MM as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Raster<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self, ImageError> {
        if data.len() != width * height {
            return Err(ImageError::SizeMismatch {
                width,
                height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn pixels(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Copy of the window with top-left corner `(x0, y0)`.
    pub fn window(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self, ImageError> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(ImageError::WindowOutOfBounds {
                x0,
                y0,
                width,
                height,
                image_width: self.width,
                image_height: self.height,
            });
        }
        let mut data = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            let start = y * self.width + x0;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Left-right mirror image.
    pub fn mirrored_x(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y).clone()
        })
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl Raster<u16> {
    #[inline]
    pub fn is_valid_at(&self, x: usize, y: usize) -> bool {
        is_valid_depth(*self.get(x, y))
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| is_valid_depth(d)).count()
    }
}

impl Raster<f64> {
    pub fn data_count(&self) -> usize {
        self.data.iter().filter(|v| !v.is_nan()).count()
    }

    /// Minimum over data pixels, `None` when everything is no-data.
    pub fn min_value(&self) -> Option<f64> {
        self.data
            .iter()
            .copied()
            .filter(|v| !v.is_nan())
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }
}

/// A raster positioned inside a larger frame, e.g. an ROI crop. `(x0, y0)` is
/// the full-frame pixel of the raster's top-left sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Placed<T> {
    pub image: Raster<T>,
    pub x0: usize,
    pub y0: usize,
}

impl<T: Clone> Placed<T> {
    pub fn whole(image: Raster<T>) -> Self {
        Self { image, x0: 0, y0: 0 }
    }
}

/// Luma conversion used by the feature stage.
#[inline]
pub fn luma(rgb: &Rgb) -> f64 {
    0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64
}

impl Raster<Rgb> {
    pub fn to_gray(&self) -> Raster<f64> {
        self.map(luma)
    }
}
