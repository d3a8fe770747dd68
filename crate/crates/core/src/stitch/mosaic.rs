use nalgebra::Point2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StitchError;
use crate::dataio::TravelAxis;
use crate::image::{ColorImage, Placed, Raster, Rgb};
use crate::registration::Homography;

/// Refuse canvases beyond this many pixels; they only arise from a bad model.
pub const MAX_CANVAS_PIXELS: usize = 100_000_000;
/// Slack when testing whether a back-projected point lies on a frame.
const EDGE_EPS: f64 = 1e-9;

/// Mosaic extent in reference-frame pixel coordinates: canvas pixel (0, 0)
/// sits at reference pixel `(x0, y0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub x0: i64,
    pub y0: i64,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CompositeRule {
    #[default]
    Mean,
    Median,
}

/// Pixel-center corners of a placed raster, in full-frame coordinates.
pub fn frame_corners(width: usize, height: usize, x0: usize, y0: usize) -> [Point2<f64>; 4] {
    let (l, t) = (x0 as f64, y0 as f64);
    let (r, b) = ((x0 + width - 1) as f64, (y0 + height - 1) as f64);
    [Point2::new(l, t), Point2::new(r, t), Point2::new(r, b), Point2::new(l, b)]
}

fn warped_bounds(
    width: usize,
    height: usize,
    x0: usize,
    y0: usize,
    global: &Homography,
) -> Result<(f64, f64, f64, f64), StitchError> {
    let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in frame_corners(width, height, x0, y0) {
        let p = global.apply(&c)?;
        b = (b.0.min(p.x), b.1.min(p.y), b.2.max(p.x), b.3.max(p.y));
    }
    Ok(b)
}

/// Bounding box of all warped frame corners.
pub fn canvas_for<T: Clone>(frames: &[Placed<T>], globals: &[Homography]) -> Result<Canvas, StitchError> {
    if frames.is_empty() {
        return Err(StitchError::EmptyInput);
    }
    if frames.len() != globals.len() {
        return Err(StitchError::FrameCountMismatch {
            frames: frames.len(),
            transforms: globals.len(),
        });
    }
    let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (f, g) in frames.iter().zip(globals) {
        if f.image.is_empty() {
            return Err(StitchError::EmptyInput);
        }
        let fb = warped_bounds(f.image.width(), f.image.height(), f.x0, f.y0, g)?;
        b = (b.0.min(fb.0), b.1.min(fb.1), b.2.max(fb.2), b.3.max(fb.3));
    }
    let (x0, y0) = (b.0.floor(), b.1.floor());
    let (x1, y1) = (b.2.ceil(), b.3.ceil());
    let (w, h) = (x1 - x0 + 1.0, y1 - y0 + 1.0);
    if !(w * h <= MAX_CANVAS_PIXELS as f64) {
        return Err(StitchError::CanvasTooLarge {
            width: w as u64,
            height: h as u64,
        });
    }
    Ok(Canvas {
        x0: x0 as i64,
        y0: y0 as i64,
        width: w as usize,
        height: h as usize,
    })
}

/// A per-frame result on a sub-window of the canvas.
#[derive(Clone, Debug, PartialEq)]
pub struct Warped<T> {
    pub x0: usize,
    pub y0: usize,
    pub image: Raster<T>,
}

/// Canvas window covered by a frame plus the inverse transform.
struct Footprint {
    x0: usize,
    y0: usize,
    width: usize,
    height: usize,
    inverse: Homography,
}

fn footprint<T: Clone>(frame: &Placed<T>, global: &Homography, canvas: &Canvas) -> Result<Option<Footprint>, StitchError> {
    let b = warped_bounds(frame.image.width(), frame.image.height(), frame.x0, frame.y0, global)?;
    let lo_x = (b.0.floor() as i64 - canvas.x0).max(0);
    let lo_y = (b.1.floor() as i64 - canvas.y0).max(0);
    let hi_x = (b.2.ceil() as i64 - canvas.x0).min(canvas.width as i64 - 1);
    let hi_y = (b.3.ceil() as i64 - canvas.y0).min(canvas.height as i64 - 1);
    if hi_x < lo_x || hi_y < lo_y {
        return Ok(None);
    }
    Ok(Some(Footprint {
        x0: lo_x as usize,
        y0: lo_y as usize,
        width: (hi_x - lo_x + 1) as usize,
        height: (hi_y - lo_y + 1) as usize,
        inverse: global.inverse()?,
    }))
}

/// Position of canvas pixel `(cx, cy)` in the frame's own raster, if inside.
#[inline]
fn back_project<T: Clone>(fp: &Footprint, canvas: &Canvas, frame: &Placed<T>, cx: usize, cy: usize) -> Option<(f64, f64)> {
    let g = Point2::new((canvas.x0 + cx as i64) as f64, (canvas.y0 + cy as i64) as f64);
    let p = fp.inverse.apply(&g).ok()?;
    let lx = p.x - frame.x0 as f64;
    let ly = p.y - frame.y0 as f64;
    let (wm, hm) = ((frame.image.width() - 1) as f64, (frame.image.height() - 1) as f64);
    if lx < -EDGE_EPS || ly < -EDGE_EPS || lx > wm + EDGE_EPS || ly > hm + EDGE_EPS {
        return None;
    }
    Some((lx.clamp(0.0, wm), ly.clamp(0.0, hm)))
}

/// The four bilinear taps around `(x, y)` with nonzero weight.
#[inline]
fn taps(x: f64, y: f64, width: usize, height: usize) -> impl Iterator<Item = (usize, usize, f64)> {
    let (i, j) = (x.floor() as usize, y.floor() as usize);
    let (fx, fy) = (x - i as f64, y - j as f64);
    [
        (i, j, (1.0 - fx) * (1.0 - fy)),
        (i + 1, j, fx * (1.0 - fy)),
        (i, j + 1, (1.0 - fx) * fy),
        (i + 1, j + 1, fx * fy),
    ]
    .into_iter()
    .filter(move |&(a, b, w)| w > 0.0 && a < width && b < height)
}

/// Color frame resampled onto the canvas with its feathering weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpedColor {
    pub rgb: Warped<[f64; 3]>,
    /// Distance to the nearest frame edge plus one half; 0 where uncovered.
    pub weight: Raster<f64>,
}

pub fn warp_color(frame: &Placed<Rgb>, global: &Homography, canvas: &Canvas) -> Result<WarpedColor, StitchError> {
    let Some(fp) = footprint(frame, global, canvas)? else {
        return Ok(WarpedColor {
            rgb: Warped {
                x0: 0,
                y0: 0,
                image: Raster::filled(0, 0, [0.0; 3]),
            },
            weight: Raster::filled(0, 0, 0.0),
        });
    };
    let img = &frame.image;
    let (w, h) = (img.width(), img.height());
    let mut rgb = Raster::filled(fp.width, fp.height, [0.0; 3]);
    let mut weight = Raster::filled(fp.width, fp.height, 0.0);
    for y in 0..fp.height {
        for x in 0..fp.width {
            let Some((lx, ly)) = back_project(&fp, canvas, frame, fp.x0 + x, fp.y0 + y) else {
                continue;
            };
            let mut acc = [0.0; 3];
            for (a, b, t) in taps(lx, ly, w, h) {
                let px: &Rgb = img.get(a, b);
                for c in 0..3 {
                    acc[c] += t * px[c] as f64;
                }
            }
            rgb.set(x, y, acc);
            let edge = lx.min(ly).min(w as f64 - 1.0 - lx).min(h as f64 - 1.0 - ly);
            weight.set(x, y, edge + 0.5);
        }
    }
    Ok(WarpedColor {
        rgb: Warped {
            x0: fp.x0,
            y0: fp.y0,
            image: rgb,
        },
        weight,
    })
}

/// Feather-blended color mosaic. Uncovered canvas pixels are black.
pub fn mosaic_rgb(frames: &[Placed<Rgb>], globals: &[Homography]) -> Result<(ColorImage, Canvas), StitchError> {
    let canvas = canvas_for(frames, globals)?;
    let warped: Vec<WarpedColor> = frames
        .par_iter()
        .zip(globals.par_iter())
        .map(|(f, g)| warp_color(f, g, &canvas))
        .collect::<Result<_, _>>()?;
    let mut sum = Raster::filled(canvas.width, canvas.height, [0.0f64; 3]);
    let mut wsum = Raster::filled(canvas.width, canvas.height, 0.0f64);
    for wc in &warped {
        let r = &wc.rgb;
        for y in 0..r.image.height() {
            for x in 0..r.image.width() {
                let wt = *wc.weight.get(x, y);
                if wt <= 0.0 {
                    continue;
                }
                let (cx, cy) = (r.x0 + x, r.y0 + y);
                let v = r.image.get(x, y);
                let s = sum.get(cx, cy);
                sum.set(cx, cy, [s[0] + wt * v[0], s[1] + wt * v[1], s[2] + wt * v[2]]);
                wsum.set(cx, cy, wsum.get(cx, cy) + wt);
            }
        }
    }
    let out = Raster::from_fn(canvas.width, canvas.height, |x, y| {
        let wt = *wsum.get(x, y);
        if wt <= 0.0 {
            return [0, 0, 0];
        }
        let s = sum.get(x, y);
        let ch = |v: f64| (v / wt).round().clamp(0.0, 255.0) as u8;
        [ch(s[0]), ch(s[1]), ch(s[2])]
    });
    Ok((out, canvas))
}

/// Elevation frame resampled onto the canvas; NaN where it has no data.
pub fn warp_elevation(
    frame: &Placed<f64>,
    global: &Homography,
    canvas: &Canvas,
) -> Result<Warped<f64>, StitchError> {
    let Some(fp) = footprint(frame, global, canvas)? else {
        return Ok(Warped {
            x0: 0,
            y0: 0,
            image: Raster::filled(0, 0, f64::NAN),
        });
    };
    let img = &frame.image;
    let (w, h) = (img.width(), img.height());
    let mut out = Raster::filled(fp.width, fp.height, f64::NAN);
    for y in 0..fp.height {
        for x in 0..fp.width {
            let Some((lx, ly)) = back_project(&fp, canvas, frame, fp.x0 + x, fp.y0 + y) else {
                continue;
            };
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (a, b, t) in taps(lx, ly, w, h) {
                let e = *img.get(a, b);
                if !e.is_nan() {
                    acc += t * e;
                    wsum += t;
                }
            }
            if wsum > 0.0 {
                out.set(x, y, acc / wsum);
            }
        }
    }
    Ok(Warped {
        x0: fp.x0,
        y0: fp.y0,
        image: out,
    })
}

/// Leveled elevation composited onto a grid of known ground sample distance.
#[derive(Clone, Debug, PartialEq)]
pub struct ElevationMosaic {
    /// mm; NaN = no data.
    pub elevation: Raster<f64>,
    /// Contributions per pixel; zero exactly where elevation is NaN.
    pub count: Raster<u32>,
    /// mm per pixel.
    pub gsd_mm: f64,
    /// Reference-frame pixel coordinates of mosaic pixel (0, 0).
    pub origin_x: f64,
    pub origin_y: f64,
    pub travel_axis: TravelAxis,
}

impl ElevationMosaic {
    pub fn new(
        elevation: Raster<f64>,
        count: Raster<u32>,
        gsd_mm: f64,
        origin: (f64, f64),
        travel_axis: TravelAxis,
    ) -> Result<Self, StitchError> {
        if !(gsd_mm > 0.0) || !gsd_mm.is_finite() {
            return Err(StitchError::GsdNonPositive(gsd_mm));
        }
        if (elevation.width(), elevation.height()) != (count.width(), count.height()) {
            return Err(StitchError::CorruptMosaic("count grid size differs".into()));
        }
        for (e, c) in elevation.pixels().iter().zip(count.pixels()) {
            if e.is_nan() != (*c == 0) {
                return Err(StitchError::CorruptMosaic(
                    "count must be zero exactly where elevation is missing".into(),
                ));
            }
        }
        Ok(Self {
            elevation,
            count,
            gsd_mm,
            origin_x: origin.0,
            origin_y: origin.1,
            travel_axis,
        })
    }

    pub fn width(&self) -> usize {
        self.elevation.width()
    }

    pub fn height(&self) -> usize {
        self.elevation.height()
    }

    /// Samples along the direction of travel.
    pub fn along_len(&self) -> usize {
        match self.travel_axis {
            TravelAxis::X => self.width(),
            TravelAxis::Y => self.height(),
        }
    }

    /// Samples across the lane.
    pub fn across_len(&self) -> usize {
        match self.travel_axis {
            TravelAxis::X => self.height(),
            TravelAxis::Y => self.width(),
        }
    }

    /// Elevation at longitudinal index `along` and transverse index `across`.
    #[inline]
    pub fn at(&self, along: usize, across: usize) -> f64 {
        match self.travel_axis {
            TravelAxis::X => *self.elevation.get(along, across),
            TravelAxis::Y => *self.elevation.get(across, along),
        }
    }

    pub fn length_mm(&self) -> f64 {
        self.along_len() as f64 * self.gsd_mm
    }

    pub fn data_count(&self) -> usize {
        self.elevation.data_count()
    }
}

/// Ground sample distance from camera height over focal length.
pub fn default_gsd(camera_height_mm: f64, fx: f64) -> Result<f64, StitchError> {
    let g = camera_height_mm / fx;
    if g > 0.0 && g.is_finite() {
        Ok(g)
    } else {
        Err(StitchError::GsdNonPositive(g))
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Composites leveled elevation frames (aligned to their color grids).
pub fn mosaic_elevation(
    frames: &[Placed<f64>],
    globals: &[Homography],
    gsd_mm: f64,
    rule: CompositeRule,
    travel_axis: TravelAxis,
) -> Result<ElevationMosaic, StitchError> {
    if !(gsd_mm > 0.0) || !gsd_mm.is_finite() {
        return Err(StitchError::GsdNonPositive(gsd_mm));
    }
    let canvas = canvas_for(frames, globals)?;
    let warped: Vec<Warped<f64>> = frames
        .par_iter()
        .zip(globals.par_iter())
        .map(|(f, g)| warp_elevation(f, g, &canvas))
        .collect::<Result<_, _>>()?;
    let (elevation, count) = composite(&warped, &canvas, rule);
    ElevationMosaic::new(
        elevation,
        count,
        gsd_mm,
        (canvas.x0 as f64, canvas.y0 as f64),
        travel_axis,
    )
}

/// Combines per-frame warps pixel by pixel, in frame order.
pub fn composite(warped: &[Warped<f64>], canvas: &Canvas, rule: CompositeRule) -> (Raster<f64>, Raster<u32>) {
    let mut count = Raster::filled(canvas.width, canvas.height, 0u32);
    let mut elevation = Raster::filled(canvas.width, canvas.height, f64::NAN);
    match rule {
        CompositeRule::Mean => {
            let mut sum = Raster::filled(canvas.width, canvas.height, 0.0f64);
            for w in warped {
                for y in 0..w.image.height() {
                    for x in 0..w.image.width() {
                        let e = *w.image.get(x, y);
                        if e.is_nan() {
                            continue;
                        }
                        let (cx, cy) = (w.x0 + x, w.y0 + y);
                        sum.set(cx, cy, sum.get(cx, cy) + e);
                        count.set(cx, cy, count.get(cx, cy) + 1);
                    }
                }
            }
            for ((e, s), c) in elevation.pixels_mut().iter_mut().zip(sum.pixels()).zip(count.pixels()) {
                if *c > 0 {
                    *e = s / *c as f64;
                }
            }
        }
        CompositeRule::Median => {
            let mut values: Vec<Vec<f64>> = vec![Vec::new(); canvas.width * canvas.height];
            for w in warped {
                for y in 0..w.image.height() {
                    for x in 0..w.image.width() {
                        let e = *w.image.get(x, y);
                        if !e.is_nan() {
                            values[(w.y0 + y) * canvas.width + w.x0 + x].push(e);
                        }
                    }
                }
            }
            for (i, v) in values.iter_mut().enumerate() {
                if !v.is_empty() {
                    let (x, y) = (i % canvas.width, i / canvas.width);
                    count.set(x, y, v.len() as u32);
                    elevation.set(x, y, median(v));
                }
            }
        }
    }
    (elevation, count)
}
