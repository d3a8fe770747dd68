//! End-to-end processing: preprocess, level, register, stitch, measure.
//!
//! Per-frame and per-pair work runs on the ambient rayon pool; results are
//! collected in frame order, so output does not depend on the thread count.

mod config;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ConfigError, PipelineConfig, DEFAULT_PROFILE_HALF_BAND_MM, DEFAULT_PROFILE_STEP_M};

use crate::analyze::{
    defect_mre, detect_defects, extract_profile_band, georeference, linear_fit_r2, rut_depth_straightedge, AnalyzeError,
    DefectMeasurement, LinearFit, MreReport,
};
use crate::camera::{align_depth_to_color, CameraError, CameraIntrinsics};
use crate::dataio::{DatasetError, DatasetManifest, Datum, DepthRegistration, Frame, GroundTruthDefect, TravelAxis};
use crate::features::{extract_features, match_descriptors, DescribedFeatures, FeatureError};
use crate::image::{ColorImage, DepthImage, Placed, Rgb};
use crate::planefit::{fit_frame, level_frame, Plane, PlaneFitError};
use crate::preprocess::{crop_roi, gaussian_smooth_depth, PreprocessError};
use crate::registration::{correspondences, register_pair, Homography, RegistrationError};
use crate::stitch::{
    chain_transforms, default_gsd, mosaic_elevation, mosaic_rgb, Canvas, ElevationMosaic, FrameGraph, StitchError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("align: frame {frame}: {source}")]
    Align { frame: usize, source: CameraError },
    #[error("preprocess: frame {frame}: {source}")]
    Preprocess { frame: usize, source: PreprocessError },
    #[error("level: frame {frame}: {source}")]
    Level { frame: usize, source: PlaneFitError },
    #[error("features: frame {frame}: {source}")]
    Features { frame: usize, source: FeatureError },
    #[error("register: frames {from} and {to}: {source}")]
    Register {
        from: usize,
        to: usize,
        source: RegistrationError,
    },
    #[error("stitch: {0}")]
    Stitch(#[from] StitchError),
    #[error("analyze: {0}")]
    Analyze(#[from] AnalyzeError),
}

/// One frame after crop, smoothing, leveling and feature extraction.
#[derive(Clone, Debug)]
pub struct ProcessedFrame {
    pub color: Placed<Rgb>,
    pub elevation: Placed<f64>,
    /// Keypoints in full-frame pixel coordinates.
    pub features: DescribedFeatures,
    pub plane: Plane,
    /// Camera-to-pavement distance after leveling, mm.
    pub reference_height: f64,
}

/// Depth on the color grid, or an error naming the frame.
fn registered_depth(
    depth: &DepthImage,
    reg: &DepthRegistration,
    depth_intr: &CameraIntrinsics,
    color_intr: &CameraIntrinsics,
    index: usize,
) -> Result<DepthImage, PipelineError> {
    match reg {
        DepthRegistration::Preregistered => Ok(depth.clone()),
        DepthRegistration::Extrinsic(t) => align_depth_to_color(depth, depth_intr, color_intr, t)
            .map_err(|source| PipelineError::Align { frame: index, source }),
    }
}

/// Crop and smooth a depth image already on the color grid, then fit and
/// level it. Returns the placed elevation, plane and reference height.
fn level_depth(
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    cfg: &PipelineConfig,
    index: usize,
) -> Result<(Placed<f64>, Plane, f64), PipelineError> {
    let pre = |source| PipelineError::Preprocess { frame: index, source };
    let lvl_err = |source| PipelineError::Level { frame: index, source };
    let crop = crop_roi(depth, &cfg.roi).map_err(pre)?;
    let smooth = gaussian_smooth_depth(&crop.image, &cfg.smooth).map_err(pre)?;
    let intr = intr.cropped(crop.x0, crop.y0, smooth.width(), smooth.height());
    let (plane, lvl) = fit_frame(&smooth, &intr, cfg.leveling).map_err(lvl_err)?;
    let elevation = level_frame(&smooth, &intr, &lvl).map_err(lvl_err)?;
    Ok((
        Placed {
            image: elevation,
            x0: crop.x0,
            y0: crop.y0,
        },
        plane,
        lvl.reference_height,
    ))
}

pub fn process_frame(
    frame: &Frame,
    index: usize,
    reg: &DepthRegistration,
    depth_intr: &CameraIntrinsics,
    color_intr: &CameraIntrinsics,
    cfg: &PipelineConfig,
) -> Result<ProcessedFrame, PipelineError> {
    let depth = registered_depth(&frame.depth, reg, depth_intr, color_intr, index)?;
    let grid_intr = match reg {
        DepthRegistration::Preregistered => depth_intr,
        DepthRegistration::Extrinsic(_) => color_intr,
    };
    let (elevation, plane, reference_height) = level_depth(&depth, grid_intr, cfg, index)?;
    let color = crop_roi(&frame.color, &cfg.roi).map_err(|source| PipelineError::Preprocess { frame: index, source })?;
    // The crop exists for depth noise at the borders; color is clean there and
    // the extra overlap roughly triples the matches per pair.
    let features =
        extract_features(&frame.color, &cfg.surf).map_err(|source| PipelineError::Features { frame: index, source })?;
    Ok(ProcessedFrame {
        color,
        elevation,
        features,
        plane,
        reference_height,
    })
}

/// Camera-to-pavement distance estimated from one depth frame on its own grid.
pub fn estimate_camera_height(
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    cfg: &PipelineConfig,
) -> Result<f64, PipelineError> {
    cfg.validate()?;
    Ok(level_depth(depth, intr, cfg, 0)?.2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub from: usize,
    pub to: usize,
    pub matches: usize,
    pub inliers: usize,
    pub score: f64,
    pub iterations: usize,
    /// Maps pixels of `from` into pixels of `to`.
    pub transform: Homography,
}

/// Registers each frame `i + 1` onto frame `i`.
pub fn register_sequence(frames: &[ProcessedFrame], cfg: &PipelineConfig) -> Result<Vec<PairSummary>, PipelineError> {
    (0..frames.len().saturating_sub(1))
        .into_par_iter()
        .map(|i| {
            let (query, train) = (&frames[i + 1].features, &frames[i].features);
            let matches = match_descriptors(&query.descriptors, &train.descriptors, cfg.ratio_threshold)
                .map_err(|source| PipelineError::Features { frame: i + 1, source })?;
            let pairs = correspondences(query, train, &matches);
            let res = register_pair(&pairs, &cfg.msac, cfg.min_inliers).map_err(|source| PipelineError::Register {
                from: i + 1,
                to: i,
                source,
            })?;
            Ok(PairSummary {
                from: i + 1,
                to: i,
                matches: matches.len(),
                inliers: res.inlier_indices.len(),
                score: res.score,
                iterations: res.iterations_run,
                transform: res.model,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct StitchOutput {
    pub globals: Vec<Homography>,
    pub color: ColorImage,
    pub canvas: Canvas,
    pub mosaic: ElevationMosaic,
    pub pairs: Vec<PairSummary>,
    pub reference_heights: Vec<f64>,
    /// Road position of reference-frame pixel (0, 0), when the dataset has one.
    pub reference_datum: Option<Datum>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Moves a datum given for frame 0 onto the reference frame.
pub fn reference_datum(datum0: &Datum, global0: &Homography, gsd_mm: f64, axis: TravelAxis) -> Result<Datum, StitchError> {
    let p = global0.inverse()?.apply(&nalgebra::Point2::new(0.0, 0.0))?;
    let (along, across) = match axis {
        TravelAxis::Y => (p.y, p.x),
        TravelAxis::X => (p.x, p.y),
    };
    Ok(Datum {
        station_m: datum0.station_m + along * gsd_mm / 1000.0,
        offset_m: datum0.offset_m + across * gsd_mm / 1000.0,
    })
}

pub fn stitch_dataset(
    manifest: &DatasetManifest,
    frames: &[Frame],
    cfg: &PipelineConfig,
) -> Result<StitchOutput, PipelineError> {
    cfg.validate()?;
    manifest.validate()?;
    if frames.is_empty() {
        return Err(StitchError::EmptyInput.into());
    }
    if cfg.reference_index >= frames.len() {
        return Err(StitchError::InvalidReference {
            index: cfg.reference_index,
            frames: frames.len(),
        }
        .into());
    }
    let reg = manifest.registration()?;
    let processed: Vec<ProcessedFrame> = frames
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            process_frame(f, i, &reg, &manifest.depth_intrinsics, &manifest.color_intrinsics, cfg)
        })
        .collect::<Result<_, _>>()?;
    log::info!("preprocessed {} frames", processed.len());

    let pairs = register_sequence(&processed, cfg)?;
    let mut graph = FrameGraph::new(frames.len()).with_reference(cfg.reference_index);
    for p in &pairs {
        graph.link(p.to, p.transform);
    }
    let globals = chain_transforms(&graph)?;
    log::info!("registered {} pairs", pairs.len());

    let colors: Vec<Placed<Rgb>> = processed.iter().map(|p| p.color.clone()).collect();
    let (color, canvas) = mosaic_rgb(&colors, &globals)?;
    let reference_heights: Vec<f64> = processed.iter().map(|p| p.reference_height).collect();
    let gsd = match cfg.gsd_mm {
        Some(g) => g,
        None => default_gsd(median(reference_heights.clone()), manifest.color_intrinsics.fx)?,
    };
    let elevations: Vec<Placed<f64>> = processed.into_iter().map(|p| p.elevation).collect();
    let mosaic = mosaic_elevation(&elevations, &globals, gsd, cfg.elevation_rule, manifest.travel_axis)?;
    let reference_datum = match &manifest.datum {
        Some(d) => Some(reference_datum(d, &globals[0], gsd, manifest.travel_axis)?),
        None => None,
    };
    Ok(StitchOutput {
        globals,
        color,
        canvas,
        mosaic,
        pairs,
        reference_heights,
        reference_datum,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    /// m from the first mosaic row (or column).
    pub station_m: f64,
    pub rut_depth_mm: f64,
    pub offset_at_max_m: f64,
    pub gap_warning: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MosaicSummary {
    pub width: usize,
    pub height: usize,
    pub gsd_mm: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub travel_axis: TravelAxis,
    pub data_pixels: usize,
}

impl MosaicSummary {
    pub fn of(m: &ElevationMosaic) -> Self {
        Self {
            width: m.width(),
            height: m.height(),
            gsd_mm: m.gsd_mm,
            origin_x: m.origin_x,
            origin_y: m.origin_y,
            travel_axis: m.travel_axis,
            data_pixels: m.data_count(),
        }
    }
}

/// Stations `0, step, 2 step, ...` inside the mosaic.
pub fn profile_stations(mosaic: &ElevationMosaic, step_m: f64) -> Vec<f64> {
    let len_m = mosaic.length_mm() / 1000.0;
    let n = (len_m / step_m).floor() as usize;
    (0..=n).map(|k| k as f64 * step_m).filter(|s| *s < len_m).collect()
}

/// Rut depth at each station; stations without a usable profile are skipped.
pub fn measure_profiles(mosaic: &ElevationMosaic, stations: &[f64], cfg: &PipelineConfig) -> Vec<ProfileSummary> {
    let half_band = (cfg.profile_half_band_mm / mosaic.gsd_mm).round() as usize;
    stations
        .par_iter()
        .filter_map(|&s| {
            let p = extract_profile_band(mosaic, s, half_band).ok()?;
            let r = rut_depth_straightedge(&p.profile, cfg.straightedge);
            Some(ProfileSummary {
                station_m: s,
                rut_depth_mm: r.depth_mm,
                offset_at_max_m: r.offset_at_max_m,
                gap_warning: p.gap_warning,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MosaicAnalysis {
    pub profiles: Vec<ProfileSummary>,
    /// Median over profiles of the straightedge depth.
    pub rut_depth_mm: Option<f64>,
    /// Road coordinates when a datum was given, mosaic-relative otherwise.
    pub defects: Vec<DefectMeasurement>,
    pub georeferenced: bool,
}

pub fn analyze_mosaic(
    mosaic: &ElevationMosaic,
    cfg: &PipelineConfig,
    datum: Option<&Datum>,
) -> Result<MosaicAnalysis, PipelineError> {
    cfg.validate()?;
    let profiles = measure_profiles(mosaic, &profile_stations(mosaic, cfg.profile_step_m), cfg);
    let rut_depth_mm = (!profiles.is_empty()).then(|| median(profiles.iter().map(|p| p.rut_depth_mm).collect()));
    let mut defects = detect_defects(mosaic, cfg.depth_threshold_mm, cfg.min_area_mm2)?;
    if let Some(d) = datum {
        defects = georeference(&defects, mosaic, d);
    }
    Ok(MosaicAnalysis {
        profiles,
        rut_depth_mm,
        defects,
        georeferenced: datum.is_some(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mre: MreReport,
    /// OLS of measured on truth over every matched dimension (depth, width
    /// and length pooled); absent with fewer than three pairs.
    pub fit: Option<LinearFit>,
}

pub fn evaluate(defects: &[DefectMeasurement], truth: &[GroundTruthDefect]) -> Result<Evaluation, AnalyzeError> {
    let mre = defect_mre(defects, truth)?;
    let pairs: Vec<(f64, f64)> = mre
        .matched
        .iter()
        .flat_map(|&(t, m)| {
            let (g, d) = (&truth[t], &defects[m]);
            [(d.depth_mm, g.depth_mm), (d.width_mm, g.width_mm), (d.length_mm, g.length_mm)]
        })
        .collect();
    let fit = match linear_fit_r2(&pairs) {
        Ok(f) => Some(f),
        Err(AnalyzeError::TooFewPairs { .. } | AnalyzeError::DegenerateVariance) => None,
        Err(e) => return Err(e),
    };
    Ok(Evaluation { mre, fit })
}

/// SHA-256 of one input file, hex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Machine-readable record of a run; embeds the resolved config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub inputs: Vec<InputDigest>,
    pub frames: usize,
    pub pairs: Vec<PairSummary>,
    pub reference_heights_mm: Vec<f64>,
    pub reference_datum: Option<Datum>,
    pub mosaic: MosaicSummary,
    pub profiles: Vec<ProfileSummary>,
    pub rut_depth_mm: Option<f64>,
    pub defects: Vec<DefectMeasurement>,
    pub georeferenced: bool,
    pub mre: Option<MreReport>,
    pub r2: Option<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

pub struct PipelineOutput {
    pub stitch: StitchOutput,
    pub report: PipelineReport,
}

/// Runs every stage. Evaluation runs when the manifest carries ground truth,
/// a datum and at least one detected defect matches.
pub fn run_pipeline(
    manifest: &DatasetManifest,
    frames: &[Frame],
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError> {
    let stitch = stitch_dataset(manifest, frames, cfg)?;
    let analysis = analyze_mosaic(&stitch.mosaic, cfg, stitch.reference_datum.as_ref())?;
    let eval = if analysis.georeferenced && !manifest.ground_truth.is_empty() {
        match evaluate(&analysis.defects, &manifest.ground_truth) {
            Ok(e) => Some(e),
            Err(AnalyzeError::NoMatchedPairs) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let fit = eval.as_ref().and_then(|e| e.fit);
    let report = PipelineReport {
        config: cfg.clone(),
        inputs: Vec::new(),
        frames: frames.len(),
        pairs: stitch.pairs.clone(),
        reference_heights_mm: stitch.reference_heights.clone(),
        reference_datum: stitch.reference_datum,
        mosaic: MosaicSummary::of(&stitch.mosaic),
        profiles: analysis.profiles,
        rut_depth_mm: analysis.rut_depth_mm,
        defects: analysis.defects,
        georeferenced: analysis.georeferenced,
        mre: eval.map(|e| e.mre),
        r2: fit.map(|f| f.r2),
        slope: fit.map(|f| f.slope),
        intercept: fit.map(|f| f.intercept),
    };
    Ok(PipelineOutput { stitch, report })
}
