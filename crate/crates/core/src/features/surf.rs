//! Fast-Hessian keypoint detection and SURF descriptors.
//!
//! Second derivatives are approximated with box filters evaluated on the
//! integral image. The base filter is 9x9; octave `o` uses filter sizes
//! `3 * (2^(o+1) * (l+1) + 1)` for layers `l = 0..4`, sampled every `2^o`
//! pixels. Responses are divided by the filter area so one threshold applies
//! to every scale.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::integral::IntegralImage;
use super::FeatureError;

pub const DEFAULT_HESSIAN_THRESHOLD: f64 = 600.0;
pub const DEFAULT_OCTAVES: usize = 3;
pub const LAYERS_PER_OCTAVE: usize = 4;
pub const DESCRIPTOR_LEN: usize = 64;

/// Relative weight of the mixed derivative in the determinant.
const DXY_WEIGHT: f64 = 0.9;
/// Gaussian sigma of the 9x9 base filter.
const BASE_SIGMA: f64 = 1.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Gaussian-equivalent scale in pixels.
    pub scale: f64,
    pub response: f64,
    pub laplacian_sign: i8,
    /// Radians; zero in upright mode.
    pub orientation: f64,
}

/// Unit-length 64-vector of `[Σdx, Σ|dx|, Σdy, Σ|dy|]` over 4x4 subregions.
#[derive(Clone, Debug, PartialEq)]
pub struct Descriptor(pub [f64; DESCRIPTOR_LEN]);

impl Descriptor {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        self.distance_sq(other).sqrt()
    }

    #[inline]
    pub fn distance_sq(&self, other: &Descriptor) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Keypoints that received a descriptor, parallel to `descriptors`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DescribedFeatures {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
    /// Keypoints whose descriptor window left the image.
    pub dropped_at_border: usize,
    /// Keypoints on a patch with no gradient energy.
    pub dropped_flat: usize,
}

/// Filter side length for `octave` / `layer`.
pub fn filter_size(octave: usize, layer: usize) -> usize {
    3 * ((1usize << (octave + 1)) * (layer + 1) + 1)
}

/// Smallest image side accepted for the given octave count.
pub fn min_image_side(octaves: usize) -> usize {
    16usize << octaves.saturating_sub(1)
}

struct ResponseLayer {
    size: usize,
    responses: Vec<f64>,
    signs: Vec<i8>,
}

fn hessian_at(ii: &IntegralImage, x: i64, y: i64, size: usize) -> (f64, i8) {
    let s = size as i64;
    let l = s / 3;
    let b = (s - 1) / 2;
    let inv_area = 1.0 / (s * s) as f64;
    let dxx = ii.rect_sum(x - b, y - l + 1, s, 2 * l - 1) - 3.0 * ii.rect_sum(x - l / 2, y - l + 1, l, 2 * l - 1);
    let dyy = ii.rect_sum(x - l + 1, y - b, 2 * l - 1, s) - 3.0 * ii.rect_sum(x - l + 1, y - l / 2, 2 * l - 1, l);
    let dxy = ii.rect_sum(x + 1, y - l, l, l) + ii.rect_sum(x - l, y + 1, l, l)
        - ii.rect_sum(x - l, y - l, l, l)
        - ii.rect_sum(x + 1, y + 1, l, l);
    let (dxx, dyy, dxy) = (dxx * inv_area, dyy * inv_area, dxy * inv_area);
    let det = dxx * dyy - (DXY_WEIGHT * dxy).powi(2);
    (det, if dxx + dyy >= 0.0 { 1 } else { -1 })
}

/// Detects scale-space maxima of the box-filter Hessian determinant.
///
/// Keypoints are returned sorted by descending response; ties are broken by
/// position so the output order is fully determined by the input.
pub fn detect_surf(ii: &IntegralImage, hessian_threshold: f64, octaves: usize) -> Result<Vec<Keypoint>, FeatureError> {
    let min_side = min_image_side(octaves.max(1));
    if octaves == 0 || ii.width() < min_side || ii.height() < min_side {
        return Err(FeatureError::ImageTooSmall {
            width: ii.width(),
            height: ii.height(),
            min_side,
        });
    }
    let mut keypoints = Vec::new();
    for octave in 0..octaves {
        let step = 1usize << octave;
        let gw = ii.width() / step;
        let gh = ii.height() / step;
        if gw < 3 || gh < 3 {
            break;
        }
        let layers: Vec<ResponseLayer> = (0..LAYERS_PER_OCTAVE)
            .map(|layer| {
                let size = filter_size(octave, layer);
                let mut responses = Vec::with_capacity(gw * gh);
                let mut signs = Vec::with_capacity(gw * gh);
                for j in 0..gh {
                    for i in 0..gw {
                        let (r, s) = hessian_at(ii, (i * step) as i64, (j * step) as i64, size);
                        responses.push(r);
                        signs.push(s);
                    }
                }
                ResponseLayer {
                    size,
                    responses,
                    signs,
                }
            })
            .collect();

        for mid in 1..LAYERS_PER_OCTAVE - 1 {
            let half_top = ((layers[mid + 1].size - 1) / 2) as i64;
            let step_i = step as i64;
            // every neighbor's filter must lie fully inside the image
            let lo = ((half_top + step_i) + step_i - 1) / step_i;
            let hi_x = (ii.width() as i64 - 1 - half_top - step_i) / step_i;
            let hi_y = (ii.height() as i64 - 1 - half_top - step_i) / step_i;
            for j in lo..=hi_y {
                for i in lo..=hi_x {
                    let (i, j) = (i as usize, j as usize);
                    let idx = j * gw + i;
                    let v = layers[mid].responses[idx];
                    if v <= hessian_threshold || !is_local_max(&layers, mid, i, j, gw, v) {
                        continue;
                    }
                    if let Some(kp) = refine(&layers, mid, i, j, gw, step, octave, ii) {
                        keypoints.push(kp);
                    }
                }
            }
        }
    }
    keypoints.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
            .then(a.scale.total_cmp(&b.scale))
    });
    Ok(keypoints)
}

fn is_local_max(layers: &[ResponseLayer], mid: usize, i: usize, j: usize, gw: usize, v: f64) -> bool {
    for layer in &layers[mid - 1..=mid + 1] {
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                if std::ptr::eq(layer, &layers[mid]) && di == 0 && dj == 0 {
                    continue;
                }
                let idx = (j as i64 + dj) as usize * gw + (i as i64 + di) as usize;
                if layer.responses[idx] >= v {
                    return false;
                }
            }
        }
    }
    true
}

#[allow(clippy::too_many_arguments)]
fn refine(
    layers: &[ResponseLayer],
    mid: usize,
    i: usize,
    j: usize,
    gw: usize,
    step: usize,
    octave: usize,
    ii: &IntegralImage,
) -> Option<Keypoint> {
    let r = |layer: usize, di: i64, dj: i64| -> f64 {
        layers[layer].responses[(j as i64 + dj) as usize * gw + (i as i64 + di) as usize]
    };
    let (lo, hi) = (mid - 1, mid + 1);
    let v = r(mid, 0, 0);
    let grad = Vector3::new(
        (r(mid, 1, 0) - r(mid, -1, 0)) / 2.0,
        (r(mid, 0, 1) - r(mid, 0, -1)) / 2.0,
        (r(hi, 0, 0) - r(lo, 0, 0)) / 2.0,
    );
    let dxx = r(mid, 1, 0) + r(mid, -1, 0) - 2.0 * v;
    let dyy = r(mid, 0, 1) + r(mid, 0, -1) - 2.0 * v;
    let dss = r(hi, 0, 0) + r(lo, 0, 0) - 2.0 * v;
    let dxy = (r(mid, 1, 1) - r(mid, -1, 1) - r(mid, 1, -1) + r(mid, -1, -1)) / 4.0;
    let dxs = (r(hi, 1, 0) - r(hi, -1, 0) - r(lo, 1, 0) + r(lo, -1, 0)) / 4.0;
    let dys = (r(hi, 0, 1) - r(hi, 0, -1) - r(lo, 0, 1) + r(lo, 0, -1)) / 4.0;
    let hessian = Matrix3::new(dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss);
    let offset = -(hessian.try_inverse()? * grad);
    if offset.iter().any(|o| !o.is_finite() || o.abs() > 0.5) {
        return None;
    }
    let step = step as f64;
    let x = (i as f64 + offset.x) * step;
    let y = (j as f64 + offset.y) * step;
    if x < 0.0 || y < 0.0 || x > (ii.width() - 1) as f64 || y > (ii.height() - 1) as f64 {
        return None;
    }
    let layer_gap = (filter_size(octave, mid + 1) - filter_size(octave, mid)) as f64;
    let size = layers[mid].size as f64 + offset.z * layer_gap;
    Some(Keypoint {
        x,
        y,
        scale: BASE_SIGMA * size / 9.0,
        response: v,
        laplacian_sign: layers[mid].signs[j * gw + i],
        orientation: 0.0,
    })
}

#[inline]
fn haar_x(ii: &IntegralImage, x: i64, y: i64, half: i64) -> f64 {
    ii.rect_sum(x, y - half, half, 2 * half) - ii.rect_sum(x - half, y - half, half, 2 * half)
}

#[inline]
fn haar_y(ii: &IntegralImage, x: i64, y: i64, half: i64) -> f64 {
    ii.rect_sum(x - half, y, 2 * half, half) - ii.rect_sum(x - half, y - half, 2 * half, half)
}

fn fits(ii: &IntegralImage, kp: &Keypoint, reach: f64, half: i64) -> bool {
    let x_lo = (kp.x - reach).round() as i64 - half;
    let y_lo = (kp.y - reach).round() as i64 - half;
    let x_hi = (kp.x + reach).round() as i64 + half;
    let y_hi = (kp.y + reach).round() as i64 + half;
    x_lo >= 0 && y_lo >= 0 && x_hi <= ii.width() as i64 && y_hi <= ii.height() as i64
}

/// Dominant gradient direction in a disc of radius `6 * scale`.
pub fn assign_orientation(ii: &IntegralImage, kp: &Keypoint) -> f64 {
    let s = kp.scale;
    let half = ((2.0 * s).round() as i64).max(1);
    let mut samples: Vec<(f64, f64, f64)> = Vec::with_capacity(113);
    for j in -6i64..=6 {
        for i in -6i64..=6 {
            if i * i + j * j >= 36 {
                continue;
            }
            let px = (kp.x + i as f64 * s).round() as i64;
            let py = (kp.y + j as f64 * s).round() as i64;
            let g = (-((i * i + j * j) as f64) / (2.0 * 2.0 * 2.0)).exp();
            let rx = g * haar_x(ii, px, py, half);
            let ry = g * haar_y(ii, px, py, half);
            samples.push((ry.atan2(rx).rem_euclid(2.0 * PI), rx, ry));
        }
    }
    let window = PI / 3.0;
    let mut best = (0.0, 0.0, 0.0);
    let mut start = 0.0;
    while start < 2.0 * PI {
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(a, rx, ry) in &samples {
            let rel = (a - start).rem_euclid(2.0 * PI);
            if rel < window {
                sx += rx;
                sy += ry;
            }
        }
        let mag = sx * sx + sy * sy;
        if mag > best.0 {
            best = (mag, sx, sy);
        }
        start += 0.15;
    }
    if best.0 == 0.0 {
        0.0
    } else {
        best.2.atan2(best.1)
    }
}

/// Computes SURF descriptors. Keypoints whose window leaves the image, or
/// whose patch has no gradient energy, are dropped and counted.
pub fn describe_surf(ii: &IntegralImage, keypoints: &[Keypoint], upright: bool) -> DescribedFeatures {
    let mut out = DescribedFeatures::default();
    for kp in keypoints {
        let s = kp.scale;
        let half = (s.round() as i64).max(1);
        let reach = if upright { 9.5 * s } else { 9.5 * s * std::f64::consts::SQRT_2 };
        if !fits(ii, kp, reach, half) {
            out.dropped_at_border += 1;
            continue;
        }
        let mut kp = *kp;
        kp.orientation = if upright { 0.0 } else { assign_orientation(ii, &kp) };
        let (si, co) = kp.orientation.sin_cos();
        let sigma = 3.3 * s;
        let two_sigma2 = 2.0 * sigma * sigma;
        let mut desc = [0.0; DESCRIPTOR_LEN];
        for sub_y in 0..4 {
            for sub_x in 0..4 {
                let (mut sdx, mut sadx, mut sdy, mut sady) = (0.0, 0.0, 0.0, 0.0);
                for l in 0..5 {
                    for k in 0..5 {
                        let rx = (-10.0 + (sub_x * 5 + k) as f64 + 0.5) * s;
                        let ry = (-10.0 + (sub_y * 5 + l) as f64 + 0.5) * s;
                        let px = (kp.x + co * rx - si * ry).round() as i64;
                        let py = (kp.y + si * rx + co * ry).round() as i64;
                        let g = (-(rx * rx + ry * ry) / two_sigma2).exp();
                        let hx = haar_x(ii, px, py, half);
                        let hy = haar_y(ii, px, py, half);
                        let dx = g * (co * hx + si * hy);
                        let dy = g * (-si * hx + co * hy);
                        sdx += dx;
                        sadx += dx.abs();
                        sdy += dy;
                        sady += dy.abs();
                    }
                }
                let base = (sub_y * 4 + sub_x) * 4;
                desc[base..base + 4].copy_from_slice(&[sdx, sadx, sdy, sady]);
            }
        }
        let norm = desc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-12) {
            out.dropped_flat += 1;
            continue;
        }
        desc.iter_mut().for_each(|v| *v /= norm);
        out.keypoints.push(kp);
        out.descriptors.push(Descriptor(desc));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Raster;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn blob_image(w: usize, h: usize, cx: f64, cy: f64, sigma: f64, amp: f64) -> Raster<f64> {
        Raster::from_fn(w, h, |x, y| {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            20.0 + amp * (-d2 / (2.0 * sigma * sigma)).exp()
        })
    }

    /// Smooth random texture: bilinear value noise plus scattered dots.
    pub(crate) fn texture(w: usize, h: usize, seed: u64) -> Raster<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = 6usize;
        let (gw, gh) = (w / cell + 2, h / cell + 2);
        let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(40.0..200.0)).collect();
        let dots: Vec<(f64, f64)> = (0..w * h / 400)
            .map(|_| (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64)))
            .collect();
        let mut img = Raster::from_fn(w, h, |x, y| {
            let fx = x as f64 / cell as f64;
            let fy = y as f64 / cell as f64;
            let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
            let (tx, ty) = (fx - ix as f64, fy - iy as f64);
            let at = |i: usize, j: usize| lattice[j * gw + i];
            at(ix, iy) * (1.0 - tx) * (1.0 - ty)
                + at(ix + 1, iy) * tx * (1.0 - ty)
                + at(ix, iy + 1) * (1.0 - tx) * ty
                + at(ix + 1, iy + 1) * tx * ty
        });
        for (dx, dy) in dots {
            let (x0, y0) = (dx as i64, dy as i64);
            for y in (y0 - 8).max(0)..(y0 + 9).min(h as i64) {
                for x in (x0 - 8).max(0)..(x0 + 9).min(w as i64) {
                    let d2 = (x as f64 - dx).powi(2) + (y as f64 - dy).powi(2);
                    let v = img.get(x as usize, y as usize) + 100.0 * (-d2 / 18.0).exp();
                    img.set(x as usize, y as usize, v.clamp(0.0, 255.0));
                }
            }
        }
        img
    }

    #[test]
    fn filter_sizes() {
        let sizes: Vec<_> = (0..4).map(|l| filter_size(0, l)).collect();
        assert_eq!(sizes, [9, 15, 21, 27]);
        let sizes: Vec<_> = (0..4).map(|l| filter_size(1, l)).collect();
        assert_eq!(sizes, [15, 27, 39, 51]);
        assert_eq!(filter_size(2, 3), 99);
    }

    #[test]
    fn constant_image_has_no_keypoints() {
        let ii = IntegralImage::new(&Raster::filled(128, 128, 87.0)).unwrap();
        assert!(detect_surf(&ii, DEFAULT_HESSIAN_THRESHOLD, 3).unwrap().is_empty());
    }

    #[test]
    fn small_image_rejected() {
        let ii = IntegralImage::new(&Raster::filled(40, 80, 1.0)).unwrap();
        assert!(matches!(
            detect_surf(&ii, 600.0, 3),
            Err(FeatureError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn blob_is_localized() {
        let ii = IntegralImage::new(&blob_image(128, 128, 64.0, 64.0, 3.0, 200.0)).unwrap();
        let kps = detect_surf(&ii, 100.0, 3).unwrap();
        let best = kps.first().expect("blob must be detected");
        assert!((best.x - 64.0).hypot(best.y - 64.0) < 1.0, "{best:?}");
        assert_eq!(best.laplacian_sign, -1);
    }

    #[test]
    fn detection_is_deterministic_and_sorted() {
        let ii = IntegralImage::new(&texture(200, 160, 1)).unwrap();
        let a = detect_surf(&ii, 300.0, 3).unwrap();
        let b = detect_surf(&ii, 300.0, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.len() > 10);
        assert!(a.windows(2).all(|w| w[0].response >= w[1].response));
    }

    #[test]
    fn keypoints_follow_translation() {
        let base = texture(260, 220, 2);
        let shifted = Raster::from_fn(260, 220, |x, y| {
            if x >= 7 && y >= 3 {
                *base.get(x - 7, y - 3)
            } else {
                0.0
            }
        });
        let a = detect_surf(&IntegralImage::new(&base).unwrap(), 150.0, 3).unwrap();
        let b = detect_surf(&IntegralImage::new(&shifted).unwrap(), 150.0, 3).unwrap();
        let interior: Vec<_> = a
            .iter()
            .filter(|k| k.x > 60.0 && k.y > 60.0 && k.x < 190.0 && k.y < 150.0)
            .collect();
        assert!(interior.len() >= 20, "{} {}", interior.len(), a.len());
        let found = interior
            .iter()
            .filter(|k| b.iter().any(|m| (m.x - k.x - 7.0).hypot(m.y - k.y - 3.0) < 1.0))
            .count();
        assert!(found as f64 >= 0.8 * interior.len() as f64, "{found}/{}", interior.len());
    }

    #[test]
    fn descriptors_unit_norm_and_deterministic() {
        let ii = IntegralImage::new(&texture(200, 160, 3)).unwrap();
        let kps = detect_surf(&ii, 300.0, 3).unwrap();
        for upright in [true, false] {
            let d1 = describe_surf(&ii, &kps, upright);
            let d2 = describe_surf(&ii, &kps, upright);
            assert!(!d1.descriptors.is_empty());
            assert_eq!(d1, d2);
            assert_eq!(
                d1.keypoints.len() + d1.dropped_at_border + d1.dropped_flat,
                kps.len()
            );
            for d in &d1.descriptors {
                assert!((d.norm() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn border_keypoints_dropped() {
        let ii = IntegralImage::new(&texture(100, 100, 4)).unwrap();
        let kp = Keypoint {
            x: 3.0,
            y: 50.0,
            scale: 2.0,
            response: 1.0,
            laplacian_sign: 1,
            orientation: 0.0,
        };
        let d = describe_surf(&ii, &[kp], true);
        assert_eq!(d.dropped_at_border, 1);
        assert!(d.descriptors.is_empty());
    }

    #[test]
    fn descriptor_invariant_to_affine_brightness() {
        let img = texture(160, 160, 5);
        let ii = IntegralImage::new(&img).unwrap();
        let ii2 = IntegralImage::new(&img.map(|v| 1.7 * v + 23.0)).unwrap();
        let kps = detect_surf(&ii, 300.0, 2).unwrap();
        for upright in [true, false] {
            let a = describe_surf(&ii, &kps, upright);
            let b = describe_surf(&ii2, &kps, upright);
            assert_eq!(a.keypoints.len(), b.keypoints.len());
            for (da, db) in a.descriptors.iter().zip(&b.descriptors) {
                assert!(da.distance(db) < 1e-6);
            }
        }
    }

    #[test]
    fn orientation_follows_gradient() {
        // ramp increasing along +y: gradient points down the image
        let img = Raster::from_fn(120, 120, |_, y| y as f64 * 2.0);
        let ii = IntegralImage::new(&img).unwrap();
        let kp = Keypoint {
            x: 60.0,
            y: 60.0,
            scale: 2.0,
            response: 1.0,
            laplacian_sign: 1,
            orientation: 0.0,
        };
        let o = assign_orientation(&ii, &kp);
        assert!((o - PI / 2.0).abs() < 1e-9, "{o}");
    }
}
