use std::fmt::Display;
use std::fs;
use std::path::Path;

use clap::ArgMatches;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use pavescan_core::analyze::{
    extract_profile_band, hull_polyline, profile_csv, profile_svg, rut_depth_straightedge, DefectMeasurement, MreReport,
};
use pavescan_core::dataio::pnm::encode_color_ppm;
use pavescan_core::dataio::{
    datum, frame_step_px, generate_synthetic, read_dataset, read_manifest, write_dataset, DatasetManifest, Datum,
    DefectKind, GroundTruthDefect, SynthSpec, TravelAxis, MANIFEST_FILE,
};
use pavescan_core::image::ColorImage;
use pavescan_core::pipeline::{
    analyze_mosaic, evaluate, profile_stations, run_pipeline, stitch_dataset, InputDigest, MosaicAnalysis,
    MosaicSummary, PairSummary, PipelineConfig, PipelineError, ProfileSummary,
};
use pavescan_core::registration::Homography;
use pavescan_core::stitch::{export_ply_mosaic, read_elev, write_elev, ElevationMosaic};

use crate::args::{on_command_line, Command, EvalArgs, InfoArgs, MeasureArgs, PipelineArgs, ProfileArgs, StageArgs, StitchArgs, SynthArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

fn failed<E: Display>(stage: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Stage {
        stage,
        message: e.to_string(),
    }
}

fn io_failed<E: Display>(stage: &'static str, path: &Path) -> impl Fn(E) -> CliError {
    let path = path.display().to_string();
    move |e| CliError::Stage {
        stage,
        message: format!("{path}: {e}"),
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(cmd: &Command, m: &ArgMatches) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a, m),
        Command::Stitch(a) => stitch(a, m),
        Command::Profile(a) => profile(a, m),
        Command::Measure(a) => measure(a, m),
        Command::Eval(a) => eval(a),
        Command::Pipeline(a) => pipeline(a, m),
        Command::Info(a) => info(a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(stage: &'static str, path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_failed(stage, path))?;
    serde_json::from_str(&text).map_err(io_failed(stage, path))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn write_text(stage: &'static str, path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_failed(stage, path))
}

fn emit<T: Serialize>(stage: &'static str, out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_text(stage, p, &to_json(value)),
        None => {
            print!("{}", to_json(value));
            Ok(())
        }
    }
}

fn create_dir(stage: &'static str, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_failed(stage, dir))
}

fn digest_file(stage: &'static str, path: &Path, label: String) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(io_failed(stage, path))?;
    Ok(InputDigest {
        path: label,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Digests of the manifest and every frame file, labeled relative to the
/// dataset root so reports do not depend on where the dataset lives.
fn digest_dataset(root: &Path, manifest: &DatasetManifest) -> Result<Vec<InputDigest>> {
    let mut files = vec![MANIFEST_FILE.to_string()];
    for f in &manifest.frames {
        files.push(f.depth.clone());
        files.push(f.color.clone());
    }
    files
        .into_iter()
        .map(|f| digest_file("dataset", &root.join(&f), f))
        .collect()
}

fn stage_config(stage: &StageArgs, m: &ArgMatches) -> Result<PipelineConfig> {
    let base = match &stage.config {
        Some(p) => read_json("config", p)?,
        None => PipelineConfig::default(),
    };
    let cfg = stage.apply(m, base);
    cfg.validate().map_err(PipelineError::from)?;
    Ok(cfg)
}

fn synth(a: &SynthArgs, m: &ArgMatches) -> Result<()> {
    let mut spec: SynthSpec = match &a.scene {
        Some(p) => read_json("synth", p)?,
        None => SynthSpec::default(),
    };
    let set = |id: &str| on_command_line(m, id);
    if set("seed") {
        spec.seed = a.seed;
    }
    if set("frames") {
        spec.frame_count = a.frames;
    }
    if set("camera_height") {
        spec.camera_height_mm = a.camera_height;
    }
    if set("overlap") {
        spec.overlap_fraction = a.overlap;
    }
    if set("tilt_x") {
        spec.tilt_x = a.tilt_x;
    }
    if set("tilt_y") {
        spec.tilt_y = a.tilt_y;
    }
    if set("noise_sigma0") {
        spec.noise_sigma0_mm = a.noise_sigma0;
    }
    if set("noise_k") {
        spec.noise_k_per_mm = a.noise_k;
    }
    if set("lane_width") {
        spec.lane_width_m = a.lane_width;
    }
    if set("travel_axis") {
        spec.travel_axis = a.travel_axis.into();
    }
    if a.ir_baseline.is_some() {
        spec.ir_baseline_mm = a.ir_baseline;
    }
    if let Some(p) = &a.defects {
        let extra: Vec<GroundTruthDefect> = read_json("synth", p)?;
        spec.defects.extend(extra);
    }
    if let Some(depth) = a.rut {
        spec.defects.push(run_long_rut(&spec, depth, a.rut_width));
    }
    let (manifest, frames) = generate_synthetic(&spec).map_err(PipelineError::from)?;
    write_dataset(&manifest, &frames, &a.out).map_err(PipelineError::from)?;
    log::info!("wrote {} frames to {}", frames.len(), a.out.display());
    Ok(())
}

/// A rut under the camera spanning the full ground footprint of the run.
fn run_long_rut(spec: &SynthSpec, depth_mm: f64, width_mm: f64) -> GroundTruthDefect {
    let i = &spec.intrinsics;
    let (along_px, f) = match spec.travel_axis {
        TravelAxis::Y => (i.height, i.fy),
        TravelAxis::X => (i.width, i.fx),
    };
    let covered_px = along_px + (spec.frame_count - 1) * frame_step_px(spec);
    let length_mm = covered_px as f64 * spec.camera_height_mm / f;
    GroundTruthDefect {
        kind: DefectKind::Rut,
        depth_mm,
        width_mm,
        length_mm,
        station_m: datum(spec).station_m + length_mm / 2000.0,
        offset_m: spec.camera_offset(),
    }
}

#[derive(Serialize)]
struct StitchReport<'a> {
    config: &'a PipelineConfig,
    inputs: Vec<InputDigest>,
    frames: usize,
    pairs: &'a [PairSummary],
    globals: &'a [Homography],
    reference_heights_mm: &'a [f64],
    reference_datum: Option<Datum>,
    mosaic: MosaicSummary,
}

fn write_mosaic_files(out: &Path, mosaic: &ElevationMosaic, color: &ColorImage) -> Result<()> {
    write_elev(mosaic, &out.join("mosaic.elev")).map_err(PipelineError::from)?;
    let same_grid = (color.width(), color.height()) == (mosaic.width(), mosaic.height());
    export_ply_mosaic(mosaic, same_grid.then_some(color), &out.join("mosaic.ply")).map_err(PipelineError::from)?;
    let ppm = out.join("color.ppm");
    fs::write(&ppm, encode_color_ppm(color)).map_err(io_failed("stitch", &ppm))
}

fn stitch(a: &StitchArgs, m: &ArgMatches) -> Result<()> {
    let cfg = stage_config(&a.stage, m)?;
    let (manifest, frames) = read_dataset(&a.dataset).map_err(PipelineError::from)?;
    let inputs = digest_dataset(&a.dataset, &manifest)?;
    let s = stitch_dataset(&manifest, &frames, &cfg)?;
    create_dir("stitch", &a.out)?;
    write_mosaic_files(&a.out, &s.mosaic, &s.color)?;
    let report = StitchReport {
        config: &cfg,
        inputs,
        frames: frames.len(),
        pairs: &s.pairs,
        globals: &s.globals,
        reference_heights_mm: &s.reference_heights,
        reference_datum: s.reference_datum,
        mosaic: MosaicSummary::of(&s.mosaic),
    };
    write_text("stitch", &a.out.join("stitch.json"), &to_json(&report))
}

fn station_stem(station_m: f64) -> String {
    format!("profile_{:06}mm", (station_m * 1000.0).round() as i64)
}

/// Writes CSV and SVG for each station and returns the rut summary of each.
fn write_profiles(mosaic: &ElevationMosaic, stations: &[f64], cfg: &PipelineConfig, dir: &Path) -> Result<Vec<ProfileSummary>> {
    create_dir("profile", dir)?;
    let half_band = (cfg.profile_half_band_mm / mosaic.gsd_mm).round() as usize;
    let mut out = Vec::with_capacity(stations.len());
    for &s in stations {
        let p = extract_profile_band(mosaic, s, half_band).map_err(PipelineError::from)?;
        let stem = station_stem(s);
        write_text("profile", &dir.join(format!("{stem}.csv")), &profile_csv(&p.profile))?;
        let svg = profile_svg(&p.profile, &hull_polyline(&p.profile));
        write_text("profile", &dir.join(format!("{stem}.svg")), &svg)?;
        let r = rut_depth_straightedge(&p.profile, cfg.straightedge);
        if p.gap_warning {
            log::warn!("station {s} m: gap too wide to bridge, longest segment kept");
        }
        out.push(ProfileSummary {
            station_m: s,
            rut_depth_mm: r.depth_mm,
            offset_at_max_m: r.offset_at_max_m,
            gap_warning: p.gap_warning,
        });
    }
    Ok(out)
}

fn load_mosaic(path: &Path) -> Result<(ElevationMosaic, InputDigest)> {
    let mosaic = read_elev(path).map_err(PipelineError::from)?;
    let digest = digest_file("stitch", path, path.display().to_string())?;
    Ok((mosaic, digest))
}

fn profile(a: &ProfileArgs, m: &ArgMatches) -> Result<()> {
    let cfg = stage_config(&a.stage, m)?;
    let (mosaic, _) = load_mosaic(&a.mosaic)?;
    let stations = if a.stations.is_empty() {
        profile_stations(&mosaic, cfg.profile_step_m)
    } else {
        a.stations.clone()
    };
    let summary = write_profiles(&mosaic, &stations, &cfg, &a.out)?;
    emit("profile", None, &summary)
}

#[derive(Serialize)]
struct MeasureReport<'a> {
    config: &'a PipelineConfig,
    inputs: Vec<InputDigest>,
    mosaic: MosaicSummary,
    #[serde(flatten)]
    analysis: MosaicAnalysis,
}

fn measure(a: &MeasureArgs, m: &ArgMatches) -> Result<()> {
    let cfg = stage_config(&a.stage, m)?;
    let (mosaic, digest) = load_mosaic(&a.mosaic)?;
    let datum = match (a.datum_station, a.datum_offset) {
        (Some(station_m), Some(offset_m)) => Some(Datum { station_m, offset_m }),
        _ => None,
    };
    let analysis = analyze_mosaic(&mosaic, &cfg, datum.as_ref())?;
    let report = MeasureReport {
        config: &cfg,
        inputs: vec![digest],
        mosaic: MosaicSummary::of(&mosaic),
        analysis,
    };
    emit("measure", a.out.as_deref(), &report)
}

#[derive(Serialize)]
struct EvalReport {
    inputs: Vec<InputDigest>,
    mre: MreReport,
    r2: Option<f64>,
    slope: Option<f64>,
    intercept: Option<f64>,
}

fn load_truth(path: &Path) -> Result<(Vec<GroundTruthDefect>, InputDigest)> {
    if path.is_dir() {
        let manifest = read_manifest(path).map_err(PipelineError::from)?;
        let digest = digest_file("eval", &path.join(MANIFEST_FILE), path.join(MANIFEST_FILE).display().to_string())?;
        Ok((manifest.ground_truth, digest))
    } else {
        let truth = read_json("eval", path)?;
        Ok((truth, digest_file("eval", path, path.display().to_string())?))
    }
}

fn eval(a: &EvalArgs) -> Result<()> {
    let report: Value = read_json("eval", &a.report)?;
    let defects: Vec<DefectMeasurement> = report
        .get("defects")
        .cloned()
        .ok_or_else(|| failed("eval")(format!("{}: no defects array", a.report.display())))
        .and_then(|v| serde_json::from_value(v).map_err(failed("eval")))?;
    if report.get("georeferenced") == Some(&Value::Bool(false)) {
        log::warn!("defect positions are mosaic-relative; matching against road coordinates may fail");
    }
    let (truth, truth_digest) = load_truth(&a.truth)?;
    let e = evaluate(&defects, &truth).map_err(PipelineError::from)?;
    let out = EvalReport {
        inputs: vec![digest_file("eval", &a.report, a.report.display().to_string())?, truth_digest],
        mre: e.mre,
        r2: e.fit.map(|f| f.r2),
        slope: e.fit.map(|f| f.slope),
        intercept: e.fit.map(|f| f.intercept),
    };
    emit("eval", a.out.as_deref(), &out)
}

fn pipeline(a: &PipelineArgs, m: &ArgMatches) -> Result<()> {
    let cfg = stage_config(&a.stage, m)?;
    let (manifest, frames) = read_dataset(&a.dataset).map_err(PipelineError::from)?;
    let inputs = digest_dataset(&a.dataset, &manifest)?;
    let mut out = run_pipeline(&manifest, &frames, &cfg)?;
    out.report.inputs = inputs;
    create_dir("pipeline", &a.out)?;
    write_mosaic_files(&a.out, &out.stitch.mosaic, &out.stitch.color)?;
    if !a.no_profiles {
        let stations: Vec<f64> = out.report.profiles.iter().map(|p| p.station_m).collect();
        write_profiles(&out.stitch.mosaic, &stations, &cfg, &a.out.join("profiles"))?;
    }
    if let Some(d) = out.report.rut_depth_mm {
        log::info!("rut depth {d:.2} mm over {} profiles", out.report.profiles.len());
    }
    write_text("pipeline", &a.out.join("report.json"), &to_json(&out.report))
}

fn info(a: &InfoArgs) -> Result<()> {
    let value = if a.path.is_dir() {
        let m = read_manifest(&a.path).map_err(PipelineError::from)?;
        json!({
            "kind": "dataset",
            "frames": m.frames.len(),
            "color_intrinsics": m.color_intrinsics,
            "depth_intrinsics": m.depth_intrinsics,
            "depth_registration": if m.extrinsic.is_some() { "extrinsic" } else { "preregistered" },
            "travel_axis": m.travel_axis,
            "datum": m.datum,
            "ground_truth": m.ground_truth,
        })
    } else {
        let (mosaic, digest) = load_mosaic(&a.path)?;
        let data: Vec<f64> = mosaic.elevation.pixels().iter().copied().filter(|v| !v.is_nan()).collect();
        let (min, max) = data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let mean = data.iter().sum::<f64>() / data.len().max(1) as f64;
        json!({
            "kind": "mosaic",
            "input": digest,
            "mosaic": MosaicSummary::of(&mosaic),
            "length_m": mosaic.length_mm() / 1000.0,
            "elevation_mm": if data.is_empty() { Value::Null } else { json!({"min": min, "max": max, "mean": mean}) },
        })
    };
    emit("info", None, &value)
}
