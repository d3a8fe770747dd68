use crate::image::{ColorImage, Raster};

use super::FeatureError;

/// Summed-area table with a zero top row and left column.
///
/// `at(x, y)` is the sum of all pixels strictly above and to the left of
/// `(x, y)`, so the table is `(width + 1) x (height + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<f64>,
}

impl IntegralImage {
    pub fn new(gray: &Raster<f64>) -> Result<Self, FeatureError> {
        let (w, h) = (gray.width(), gray.height());
        if w == 0 || h == 0 {
            return Err(FeatureError::EmptyImage);
        }
        let stride = w + 1;
        let mut sums = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row_sum = 0.0;
            for x in 0..w {
                row_sum += *gray.get(x, y);
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row_sum;
            }
        }
        Ok(Self {
            width: w,
            height: h,
            sums,
        })
    }

    /// Luma integral image of a color frame.
    pub fn from_color(img: &ColorImage) -> Result<Self, FeatureError> {
        Self::new(&img.to_gray())
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
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.sums[y * (self.width + 1) + x]
    }

    /// Sum over `[x, x + w) x [y, y + h)`, clipped to the image.
    #[inline]
    pub fn rect_sum(&self, x: i64, y: i64, w: i64, h: i64) -> f64 {
        let x0 = x.clamp(0, self.width as i64) as usize;
        let y0 = y.clamp(0, self.height as i64) as usize;
        let x1 = (x + w).clamp(0, self.width as i64) as usize;
        let y1 = (y + h).clamp(0, self.height as i64) as usize;
        if x1 <= x0 || y1 <= y0 {
            return 0.0;
        }
        self.at(x1, y1) - self.at(x0, y1) - self.at(x1, y0) + self.at(x0, y0)
    }
}
