//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//!
//! Run with `cargo test -p pavescan-core --test acceptance -- --nocapture`
//! to see the summary lines.

use std::time::Instant;

use nalgebra::{Point2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use pavescan_core::analyze::{linear_fit_r2, rut_depth_straightedge, StraightedgeMode, TransverseProfile};
use pavescan_core::camera::{project, unproject, CameraIntrinsics};
use pavescan_core::dataio::{
    generate_synthetic, pairwise_translation, DefectKind, DepthRegistration, GroundTruthDefect, SynthSpec,
};
use pavescan_core::features::{describe_surf, detect_surf, IntegralImage, SurfConfig};
use pavescan_core::image::{luma, ColorImage, Raster};
use pavescan_core::pipeline::{estimate_camera_height, process_frame, run_pipeline, PipelineConfig};
use pavescan_core::planefit::{fit_plane_svd, leveling_rotation};
use pavescan_core::preprocess::RoiSpec;
use pavescan_core::registration::{msac_homography, Correspondence, Homography, MsacConfig};
use pavescan_core::stitch::{chain_transforms, mosaic_rgb, warp_color, warp_elevation, FrameGraph};

fn verdict(n: u32, name: &str, ok: bool, detail: String) {
    println!("[{}] criterion {n}: {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_1_projection_round_trip() {
    let intr = CameraIntrinsics::new(525.0, 523.0, 319.5, 239.5, 640, 480).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples: Vec<(f64, f64, f64)> = (0..100_000)
        .map(|_| {
            (
                rng.random_range(0.0..639.0),
                rng.random_range(0.0..479.0),
                rng.random_range(200.0..8000.0),
            )
        })
        .collect();
    let t = Instant::now();
    let mut worst = 0.0f64;
    for &(u, v, d) in &samples {
        let p = unproject(&intr, u, v, d).unwrap();
        let (pu, pv) = project(&intr, &p).unwrap();
        worst = worst.max((pu - u).abs()).max((pv - v).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        1,
        "projection round trip",
        worst < 1e-9 && secs < 1.0,
        format!("max error {worst:.2e} px over 1e5 samples in {secs:.3} s"),
    );
}

fn random_unit_normal(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    // tilt up to ~60 degrees from the optical axis
    let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.6..1.0));
    v.normalize()
}

fn sum_sq_distance(points: &[Vector3<f64>], normal: &Vector3<f64>, through: &Vector3<f64>) -> f64 {
    points.iter().map(|p| normal.dot(&(p - through)).powi(2)).sum()
}

#[test]
fn criterion_2_plane_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    // noiseless recovery
    let mut worst_angle = 0.0f64;
    let mut worst_level = 0.0f64;
    for _ in 0..200 {
        let n = random_unit_normal(&mut rng);
        let c = Vector3::new(rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0), rng.random_range(500.0..3000.0));
        let (e1, e2) = {
            let a = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            let e1 = n.cross(&a).normalize();
            (e1, n.cross(&e1))
        };
        let pts: Vec<Vector3<f64>> = (0..200)
            .map(|_| c + e1 * rng.random_range(-500.0..500.0) + e2 * rng.random_range(-500.0..500.0))
            .collect();
        let plane = fit_plane_svd(&pts).unwrap();
        let angle = plane.normal.cross(&n).norm().atan2(plane.normal.dot(&n));
        worst_angle = worst_angle.max(angle);
        let lvl = leveling_rotation(&plane);
        let leveled: Vec<_> = pts.iter().map(|p| lvl.rotation * p).collect();
        let refit = fit_plane_svd(&leveled).unwrap();
        worst_level = worst_level.max((refit.normal - Vector3::z()).norm());
    }

    // small instances against random candidate planes
    let mut svd_wins = true;
    let mut instances = 0;
    for _ in 0..20 {
        let k = rng.random_range(4..=10);
        let pts: Vec<Vector3<f64>> = (0..k)
            .map(|_| {
                let (x, y) = (rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
                Vector3::new(x, y, 800.0 + 0.1 * x - 0.05 * y + rng.random_range(-5.0..5.0))
            })
            .collect();
        let plane = fit_plane_svd(&pts).unwrap();
        let best = sum_sq_distance(&pts, &plane.normal, &plane.centroid);
        let centroid = pts.iter().sum::<Vector3<f64>>() / k as f64;
        for _ in 0..100_000 {
            let n = Vector3::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                1.0,
            )
            .normalize();
            let through = centroid + Vector3::new(0.0, 0.0, rng.random_range(-3.0..3.0));
            if sum_sq_distance(&pts, &n, &through) < best {
                svd_wins = false;
            }
        }
        instances += 1;
    }
    let ok = worst_angle < 1e-7 && svd_wins && worst_level < 1e-9;
    verdict(
        2,
        "plane fit",
        ok,
        format!(
            "max normal error {worst_angle:.2e} rad, leveled refit off by {worst_level:.2e}, \
             SVD beat 1e5 candidates on {instances} instances: {svd_wins}"
        ),
    );
}

fn blob_image(size: usize, cx: f64, cy: f64, sigma: f64) -> ColorImage {
    Raster::from_fn(size, size, |x, y| {
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        let g = (40.0 + 180.0 * (-d2 / (2.0 * sigma * sigma)).exp()).round() as u8;
        [g, g, g]
    })
}

#[test]
fn criterion_3_surf() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // integral image sums
    let gray = Raster::from_fn(97, 73, |_, _| rng.random_range(0.0..255.0));
    let ii = IntegralImage::new(&gray).unwrap();
    let mut worst_sum = 0.0f64;
    for _ in 0..100 {
        let (x, y) = (rng.random_range(0..97), rng.random_range(0..73));
        let (w, h) = (rng.random_range(1..=97 - x), rng.random_range(1..=73 - y));
        let mut direct = 0.0;
        for yy in y..y + h {
            for xx in x..x + w {
                direct += gray.get(xx, yy);
            }
        }
        worst_sum = worst_sum.max((ii.rect_sum(x as i64, y as i64, w as i64, h as i64) - direct).abs());
    }

    // blob localization
    let blob = IntegralImage::from_color(&blob_image(128, 64.0, 64.0, 3.0)).unwrap();
    let kps = detect_surf(&blob, 100.0, 3).unwrap();
    let blob_err = kps.first().map_or(f64::INFINITY, |k| (k.x - 64.0).hypot(k.y - 64.0));

    // translation repeatability and descriptor norms on a synthetic frame
    let (_, frames) = generate_synthetic(&SynthSpec {
        frame_count: 1,
        ..SynthSpec::default()
    })
    .unwrap();
    let img = &frames[0].color;
    let (dx, dy) = (7usize, 3usize);
    let shifted = Raster::from_fn(img.width(), img.height(), |x, y| {
        *img.get(x.saturating_sub(dx), y.saturating_sub(dy))
    });
    let cfg = SurfConfig::default();
    let t = Instant::now();
    let ia = IntegralImage::from_color(img).unwrap();
    let ka = detect_surf(&ia, cfg.hessian_threshold, cfg.octaves).unwrap();
    let da = describe_surf(&ia, &ka, cfg.upright);
    let secs = t.elapsed().as_secs_f64();
    let ib = IntegralImage::from_color(&shifted).unwrap();
    let kb = detect_surf(&ib, cfg.hessian_threshold, cfg.octaves).unwrap();
    let margin = 50.0;
    let interior: Vec<_> = ka
        .iter()
        .filter(|k| k.x > margin && k.y > margin && k.x < img.width() as f64 - margin && k.y < img.height() as f64 - margin)
        .collect();
    let repeated = interior
        .iter()
        .filter(|k| {
            kb.iter()
                .any(|b| (b.x - k.x - dx as f64).hypot(b.y - k.y - dy as f64) <= 1.0)
        })
        .count();
    let repeat = repeated as f64 / interior.len().max(1) as f64;
    let worst_norm = da
        .descriptors
        .iter()
        .map(|d| (d.norm() - 1.0).abs())
        .fold(0.0f64, f64::max);

    let ok = worst_sum < 1e-6
        && blob_err <= 1.0
        && repeat >= 0.8
        && !interior.is_empty()
        && !da.descriptors.is_empty()
        && worst_norm < 1e-6
        && secs < 30.0;
    verdict(
        3,
        "SURF",
        ok,
        format!(
            "rect sum error {worst_sum:.1e}, blob offset {blob_err:.2} px, repeatability {:.1}% of {} interior, \
             descriptor norm error {worst_norm:.1e} over {}, 640x480 detect+describe {secs:.2} s",
            100.0 * repeat,
            interior.len(),
            da.descriptors.len()
        ),
    );
}

#[test]
fn criterion_4_msac() {
    let normal = Normal::new(0.0, 0.3).unwrap();
    let center = Point2::new(320.0, 240.0);
    let mut worst_t = 0.0f64;
    let mut worst_keep = 1.0f64;
    let mut deterministic = true;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let t = (rng.random_range(-60.0..60.0), rng.random_range(-200.0..200.0));
        let mut pairs = Vec::new();
        for i in 0..100 {
            let src = (rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            let dst = if i < 70 {
                (src.0 + t.0 + normal.sample(&mut rng), src.1 + t.1 + normal.sample(&mut rng))
            } else {
                (rng.random_range(-100.0..740.0), rng.random_range(-100.0..580.0))
            };
            pairs.push(Correspondence::new(src, dst));
        }
        let cfg = MsacConfig {
            seed,
            ..MsacConfig::default()
        };
        let res = msac_homography(&pairs, &cfg).unwrap();
        let p = res.model.apply(&center).unwrap();
        worst_t = worst_t.max((p.x - center.x - t.0).hypot(p.y - center.y - t.1));
        let kept = (0..70).filter(|i| res.inlier_indices.contains(i)).count();
        worst_keep = worst_keep.min(kept as f64 / 70.0);
        if seed % 10 == 0 {
            deterministic &= msac_homography(&pairs, &cfg).unwrap() == res;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let exact: Vec<_> = (0..40)
        .map(|_| {
            let s = (rng.random_range(0.0..640.0f64).round(), rng.random_range(0.0..480.0f64).round());
            Correspondence::new(s, (s.0 + 12.0, s.1 - 192.0))
        })
        .collect();
    let pure = msac_homography(&exact, &MsacConfig::default()).unwrap().score;

    let ok = worst_t <= 0.5 && worst_keep >= 0.97 && pure == 0.0 && deterministic;
    verdict(
        4,
        "MSAC",
        ok,
        format!(
            "100 seeds at 30% outliers: worst translation error {worst_t:.3} px, worst inlier retention {:.1}%, \
             pure-inlier score {pure}, repeat runs identical: {deterministic}",
            100.0 * worst_keep
        ),
    );
}

fn processed_run(spec: &SynthSpec) -> Vec<pavescan_core::pipeline::ProcessedFrame> {
    let (m, frames) = generate_synthetic(spec).unwrap();
    let cfg = PipelineConfig::default();
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            process_frame(f, i, &DepthRegistration::Preregistered, &m.depth_intrinsics, &m.color_intrinsics, &cfg).unwrap()
        })
        .collect()
}

// Color is checked on flat ground: relief would add true parallax (a point
// 15 mm low moves ~3 px less per frame), which no planar transform removes.
// Elevation is checked on a rutted run, where relief is the point.
#[test]
fn criterion_5_stitching() {
    let flat = SynthSpec::default().noiseless();
    let rutted = SynthSpec {
        defects: vec![GroundTruthDefect {
            kind: DefectKind::Rut,
            depth_mm: 15.0,
            width_mm: 400.0,
            length_mm: 8000.0,
            station_m: 1.5,
            offset_m: 1.8,
        }],
        ..flat.clone()
    };
    assert_eq!(flat.frame_count, 8);
    let (tx, ty) = pairwise_translation(&flat);
    let mut graph = FrameGraph::new(flat.frame_count);
    for i in 0..flat.frame_count - 1 {
        graph.link(i, Homography::translation(tx, ty));
    }
    let globals = chain_transforms(&graph).unwrap();

    let colors: Vec<_> = processed_run(&flat).into_iter().map(|p| p.color).collect();
    let (mosaic, canvas) = mosaic_rgb(&colors, &globals).unwrap();
    let (_, _, cw, ch) = RoiSpec::default().window(640, 480).unwrap();
    let expect = (cw + 7 * tx as usize, ch + 7 * ty as usize);
    let dims_ok = (canvas.width, canvas.height) == expect && (mosaic.width(), mosaic.height()) == expect;

    // color: every contributing frame agrees with the composite in overlaps
    let warped: Vec<_> = colors.iter().zip(&globals).map(|(c, g)| warp_color(c, g, &canvas).unwrap()).collect();
    let mut cover = Raster::filled(canvas.width, canvas.height, 0u32);
    for w in &warped {
        for y in 0..w.weight.height() {
            for x in 0..w.weight.width() {
                if *w.weight.get(x, y) > 0.0 {
                    let (cx, cy) = (w.rgb.x0 + x, w.rgb.y0 + y);
                    cover.set(cx, cy, cover.get(cx, cy) + 1);
                }
            }
        }
    }
    let mut worst_gray = 0.0f64;
    for w in &warped {
        for y in 0..w.weight.height() {
            for x in 0..w.weight.width() {
                let (cx, cy) = (w.rgb.x0 + x, w.rgb.y0 + y);
                if *w.weight.get(x, y) > 0.0 && *cover.get(cx, cy) >= 2 {
                    let c = w.rgb.image.get(x, y);
                    let l = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
                    worst_gray = worst_gray.max((l - luma(mosaic.get(cx, cy))).abs());
                }
            }
        }
    }

    // elevation: spread of contributions around their per-pixel mean
    let elev: Vec<_> = processed_run(&rutted)
        .iter()
        .zip(&globals)
        .map(|(p, g)| warp_elevation(&p.elevation, g, &canvas).unwrap())
        .collect();
    let mut per_pixel: Vec<Vec<f64>> = vec![Vec::new(); canvas.width * canvas.height];
    for w in &elev {
        for y in 0..w.image.height() {
            for x in 0..w.image.width() {
                let v = *w.image.get(x, y);
                if !v.is_nan() {
                    per_pixel[(w.y0 + y) * canvas.width + w.x0 + x].push(v);
                }
            }
        }
    }
    let (mut ss, mut n) = (0.0, 0usize);
    let mut relief = (f64::INFINITY, f64::NEG_INFINITY);
    for vs in per_pixel.iter().filter(|v| v.len() >= 2) {
        let mean = vs.iter().sum::<f64>() / vs.len() as f64;
        relief = (relief.0.min(mean), relief.1.max(mean));
        ss += vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        n += vs.len();
    }
    let rms = (ss / n.max(1) as f64).sqrt();

    let ok = dims_ok && worst_gray < 1.0 && n > 0 && rms < 1.0 && relief.1 - relief.0 > 10.0;
    verdict(
        5,
        "stitching",
        ok,
        format!(
            "canvas {}x{} (expected {}x{}), worst overlap gray difference {worst_gray:.3}, \
             overlap elevation RMS {rms:.3} mm over {n} samples spanning {:.1} mm of relief",
            canvas.width,
            canvas.height,
            expect.0,
            expect.1,
            relief.1 - relief.0
        ),
    );
}

#[test]
fn criterion_6_metrology() {
    let t = Instant::now();
    let potholes = SynthSpec {
        frame_count: 17,
        seed: 6,
        defects: (0..10)
            .map(|i| GroundTruthDefect {
                kind: DefectKind::Pothole,
                depth_mm: 40.0 + 4.0 * i as f64,
                width_mm: 160.0 + 10.0 * (i % 4) as f64,
                length_mm: 200.0 + 15.0 * (i % 3) as f64,
                station_m: 0.2 + 0.6 * i as f64,
                offset_m: if i % 2 == 0 { 1.975 } else { 1.675 },
            })
            .collect(),
        ..SynthSpec::default()
    };
    let (m, frames) = generate_synthetic(&potholes).unwrap();
    let report = run_pipeline(&m, &frames, &PipelineConfig::default()).unwrap().report;
    let mre = report.mre.expect("potholes matched");

    let rut = SynthSpec {
        seed: 7,
        defects: vec![GroundTruthDefect {
            kind: DefectKind::Rut,
            depth_mm: 10.0,
            width_mm: 400.0,
            length_mm: 6000.0,
            station_m: 1.5,
            offset_m: 1.825,
        }],
        ..SynthSpec::default()
    };
    let (m, frames) = generate_synthetic(&rut).unwrap();
    let rut_depth = run_pipeline(&m, &frames, &PipelineConfig::default())
        .unwrap()
        .report
        .rut_depth_mm
        .unwrap();
    let secs = t.elapsed().as_secs_f64();

    let ok = mre.matched.len() == 10
        && mre.mre_depth <= 8.0
        && mre.mre_width <= 8.0
        && mre.mre_length <= 8.0
        && (rut_depth - 10.0).abs() <= 1.5
        && secs < 120.0;
    verdict(
        6,
        "defect metrology",
        ok,
        format!(
            "{} of 10 potholes matched, MRE depth {:.2}% width {:.2}% length {:.2}%; \
             10 mm rut measured {rut_depth:.2} mm; {secs:.1} s",
            mre.matched.len(),
            mre.mre_depth,
            mre.mre_width,
            mre.mre_length
        ),
    );
}

#[test]
fn criterion_7_distance_accuracy() {
    let cfg = PipelineConfig::default();
    let pairs: Vec<(f64, f64)> = (0..50)
        .map(|i| {
            let h = 600.0 + 600.0 * i as f64 / 49.0;
            let spec = SynthSpec {
                camera_height_mm: h,
                frame_count: 1,
                seed: 700 + i as u64,
                ..SynthSpec::default()
            };
            let (m, frames) = generate_synthetic(&spec).unwrap();
            (estimate_camera_height(&frames[0].depth, &m.depth_intrinsics, &cfg).unwrap(), h)
        })
        .collect();
    let fit = linear_fit_r2(&pairs).unwrap();
    let ok = (0.99..=1.01).contains(&fit.slope) && fit.r2 >= 0.99;
    verdict(
        7,
        "distance accuracy",
        ok,
        format!(
            "50 heights 600-1200 mm: slope {:.5}, intercept {:.3} mm, r2 {:.6}",
            fit.slope, fit.intercept, fit.r2
        ),
    );
}

/// Straightedge simulation: at each sample, the highest line through any two
/// samples that bracket it. The upper envelope of all such lines is where a
/// taut straightedge rests.
fn straightedge_brute_force(pts: &[(f64, f64)]) -> (f64, f64) {
    let line = |a: (f64, f64), b: (f64, f64), x: f64| {
        if x == a.0 {
            a.1
        } else if x == b.0 {
            b.1
        } else {
            a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
        }
    };
    let mut best = (0.0, 0usize);
    for k in 0..pts.len() {
        let mut top = pts[k].1;
        for i in 0..=k {
            for j in k..pts.len() {
                if i < j {
                    top = top.max(line(pts[i], pts[j], pts[k].0));
                }
            }
        }
        let gap = top - pts[k].1;
        if gap > best.0 && gap > 1e-9 {
            best = (gap, k);
        }
    }
    (best.0, pts[best.1].0)
}

#[test]
fn criterion_8_rut_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    for case in 0..1000 {
        let n = rng.random_range(10..=60);
        let e: Vec<f64> = match case % 3 {
            0 => (0..n).map(|_| rng.random_range(-30.0..10.0)).collect(),
            // integer millimeters, many repeated values
            1 => (0..n).map(|_| rng.random_range(-8i32..=2) as f64).collect(),
            // smooth rut shape plus noise
            _ => {
                let c = rng.random_range(0.2..0.8) * n as f64;
                (0..n)
                    .map(|i| {
                        let d = (i as f64 - c) / 4.0;
                        -12.0 * (-d * d).exp() + rng.random_range(-0.5..0.5)
                    })
                    .collect()
            }
        };
        let samples: Vec<(f64, f64)> = e.iter().enumerate().map(|(i, &v)| (i as f64 * 0.002, v)).collect();
        let profile = TransverseProfile::new(0.0, samples.clone()).unwrap();
        let r = rut_depth_straightedge(&profile, StraightedgeMode::FullWidth);
        let (d, at) = straightedge_brute_force(&samples);
        if r.depth_mm != d || (d > 0.0 && r.offset_at_max_m != at) {
            mismatches += 1;
        }
    }
    verdict(
        8,
        "straightedge oracle",
        mismatches == 0,
        format!("{mismatches} mismatches over 1000 random profiles"),
    );
}
