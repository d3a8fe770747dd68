//! Command-line surface. Flag defaults are read from the core defaults so the
//! help text and the library never disagree.

use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Args, Parser, Subcommand, ValueEnum};

use pavescan_core::analyze::{StraightedgeMode, DEFAULT_DEPTH_THRESHOLD_MM, DEFAULT_MIN_AREA_MM2, DEFAULT_SLIDING_SPAN_M};
use pavescan_core::dataio::{
    TravelAxis, DEFAULT_CAMERA_HEIGHT_MM, DEFAULT_FRAME_COUNT, DEFAULT_NOISE_K_PER_MM, DEFAULT_NOISE_SIGMA0_MM,
    DEFAULT_OVERLAP_FRACTION, LANE_WIDTH_M,
};
use pavescan_core::features::{DEFAULT_HESSIAN_THRESHOLD, DEFAULT_OCTAVES, DEFAULT_RATIO_THRESHOLD};
use pavescan_core::pipeline::{PipelineConfig, DEFAULT_PROFILE_HALF_BAND_MM, DEFAULT_PROFILE_STEP_M};
use pavescan_core::planefit::{LevelingMode, DEFAULT_TRIM_FRACTION};
use pavescan_core::preprocess::{DEFAULT_ROI_FRACTION, DEFAULT_SMOOTH_RADIUS, DEFAULT_SMOOTH_SIGMA};
use pavescan_core::registration::{
    ResidualKind, TransformFamily, DEFAULT_CONFIDENCE, DEFAULT_MAX_ITERATIONS, DEFAULT_MIN_INLIERS, DEFAULT_SEED,
    DEFAULT_THRESHOLD_PX,
};
use pavescan_core::stitch::CompositeRule;

#[derive(Parser, Debug)]
#[command(name = "pavescan", version, about = "Pavement surface reconstruction from overlapping RGB-D frames")]
pub struct Cli {
    /// Worker threads for frame-parallel stages. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: u16,
    /// More log output on standard error (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset with known ground truth.
    Synth(SynthArgs),
    /// Register a dataset and write the elevation mosaic, color mosaic and PLY.
    Stitch(StitchArgs),
    /// Extract transverse profiles from a mosaic as CSV and SVG.
    Profile(ProfileArgs),
    /// Detect defects and measure rut depth on a mosaic.
    Measure(MeasureArgs),
    /// Score a measurement report against ground truth.
    Eval(EvalArgs),
    /// Run every stage on a dataset.
    Pipeline(PipelineArgs),
    /// Summarize a dataset directory or an ELEV mosaic.
    Info(InfoArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum AxisArg {
    X,
    Y,
}

impl From<AxisArg> for TravelAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::X => TravelAxis::X,
            AxisArg::Y => TravelAxis::Y,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum LevelingArg {
    AllPixels,
    Trimmed,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum FamilyArg {
    Projective,
    Similarity,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ResidualArg {
    Forward,
    Symmetric,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum RuleArg {
    Mean,
    Median,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum StraightedgeArg {
    FullWidth,
    Sliding,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Base scene as SynthSpec JSON; flags given on the command line override it.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_FRAME_COUNT)]
    pub frames: usize,
    /// mm above the road.
    #[arg(long, default_value_t = DEFAULT_CAMERA_HEIGHT_MM)]
    pub camera_height: f64,
    /// Fraction of each frame shared with the next.
    #[arg(long, default_value_t = DEFAULT_OVERLAP_FRACTION)]
    pub overlap: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub tilt_x: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub tilt_y: f64,
    /// Depth noise at zero range, mm.
    #[arg(long, default_value_t = DEFAULT_NOISE_SIGMA0_MM)]
    pub noise_sigma0: f64,
    /// Quadratic depth noise coefficient, 1/mm.
    #[arg(long, default_value_t = DEFAULT_NOISE_K_PER_MM)]
    pub noise_k: f64,
    /// m.
    #[arg(long, default_value_t = LANE_WIDTH_M)]
    pub lane_width: f64,
    #[arg(long, value_enum, default_value = "y")]
    pub travel_axis: AxisArg,
    /// Simulate a separate depth camera this far from the color camera, mm.
    #[arg(long)]
    pub ir_baseline: Option<f64>,
    /// Add a rut of this depth (mm) along the lane center for the whole run.
    #[arg(long)]
    pub rut: Option<f64>,
    /// Rut width, mm.
    #[arg(long, default_value_t = 400.0)]
    pub rut_width: f64,
    /// Extra defects as a JSON array of ground-truth records.
    #[arg(long)]
    pub defects: Option<PathBuf>,
}

/// Parameters shared by every processing stage.
#[derive(Args, Debug)]
pub struct StageArgs {
    /// Base PipelineConfig JSON (for example the `config` of an earlier
    /// report); flags given on the command line override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Centered crop fraction, both axes.
    #[arg(long, default_value_t = DEFAULT_ROI_FRACTION)]
    pub roi_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_SMOOTH_SIGMA)]
    pub smooth_sigma: f64,
    #[arg(long, default_value_t = DEFAULT_SMOOTH_RADIUS)]
    pub smooth_radius: usize,
    #[arg(long, value_enum, default_value = "all-pixels")]
    pub leveling: LevelingArg,
    /// Lowest fraction of elevations dropped by trimmed leveling.
    #[arg(long, default_value_t = DEFAULT_TRIM_FRACTION)]
    pub trim_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_HESSIAN_THRESHOLD)]
    pub hessian_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_OCTAVES)]
    pub octaves: usize,
    /// Assign orientations instead of upright descriptors.
    #[arg(long)]
    pub rotation_invariant: bool,
    #[arg(long, default_value_t = DEFAULT_RATIO_THRESHOLD)]
    pub ratio_threshold: f64,
    /// Inlier distance, px.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_PX)]
    pub msac_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
    pub msac_confidence: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub msac_max_iterations: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub msac_seed: u64,
    #[arg(long, value_enum, default_value = "projective")]
    pub transform: FamilyArg,
    #[arg(long, value_enum, default_value = "forward")]
    pub residual: ResidualArg,
    #[arg(long, default_value_t = DEFAULT_MIN_INLIERS)]
    pub min_inliers: usize,
    /// Frame whose pixel grid the mosaic uses.
    #[arg(long, default_value_t = 0)]
    pub reference_frame: usize,
    #[arg(long, value_enum, default_value = "mean")]
    pub elevation_rule: RuleArg,
    /// Ground sample distance override, mm per pixel [default: camera height / fx].
    #[arg(long)]
    pub gsd: Option<f64>,
    /// mm below the road plane.
    #[arg(long, default_value_t = DEFAULT_DEPTH_THRESHOLD_MM)]
    pub depth_threshold: f64,
    /// mm².
    #[arg(long, default_value_t = DEFAULT_MIN_AREA_MM2)]
    pub min_area: f64,
    #[arg(long, value_enum, default_value = "full-width")]
    pub straightedge: StraightedgeArg,
    /// Sliding straightedge length, m.
    #[arg(long, default_value_t = DEFAULT_SLIDING_SPAN_M)]
    pub straightedge_span: f64,
    /// Station spacing of rut profiles, m.
    #[arg(long, default_value_t = DEFAULT_PROFILE_STEP_M)]
    pub profile_step: f64,
    /// Along-travel half width averaged into each profile, mm.
    #[arg(long, default_value_t = DEFAULT_PROFILE_HALF_BAND_MM)]
    pub profile_half_band: f64,
}

#[derive(Args, Debug)]
pub struct StitchArgs {
    /// Dataset directory.
    pub dataset: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub stage: StageArgs,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    /// ELEV mosaic.
    pub mosaic: PathBuf,
    /// Station in m from the mosaic start; repeatable. Every profile step when absent.
    #[arg(long = "station", allow_negative_numbers = true)]
    pub stations: Vec<f64>,
    /// Output directory for CSV and SVG files.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub stage: StageArgs,
}

#[derive(Args, Debug)]
pub struct MeasureArgs {
    /// ELEV mosaic.
    pub mosaic: PathBuf,
    /// Road station of mosaic pixel (0, 0), m. Defect positions become road coordinates.
    #[arg(long, requires = "datum_offset", allow_negative_numbers = true)]
    pub datum_station: Option<f64>,
    /// Road offset of mosaic pixel (0, 0), m.
    #[arg(long, requires = "datum_station", allow_negative_numbers = true)]
    pub datum_offset: Option<f64>,
    /// Report file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub stage: StageArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Report holding a `defects` array (from `measure` or `pipeline`).
    pub report: PathBuf,
    /// Dataset directory, or a JSON array of ground-truth records.
    #[arg(long)]
    pub truth: PathBuf,
    /// Report file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// Dataset directory.
    pub dataset: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Skip per-station CSV and SVG profile files.
    #[arg(long)]
    pub no_profiles: bool,
    #[command(flatten)]
    pub stage: StageArgs,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    /// Dataset directory or ELEV mosaic.
    pub path: PathBuf,
}

pub fn on_command_line(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

impl StageArgs {
    /// Overlays command-line flags onto `base`.
    pub fn apply(&self, m: &ArgMatches, mut cfg: PipelineConfig) -> PipelineConfig {
        let set = |id: &str| on_command_line(m, id);
        if set("roi_fraction") {
            cfg.roi.fraction_x = self.roi_fraction;
            cfg.roi.fraction_y = self.roi_fraction;
        }
        if set("smooth_sigma") {
            cfg.smooth.sigma = self.smooth_sigma;
        }
        if set("smooth_radius") {
            cfg.smooth.radius = self.smooth_radius;
        }
        if set("leveling") || set("trim_fraction") {
            cfg.leveling = match (self.leveling, set("leveling"), cfg.leveling) {
                (LevelingArg::AllPixels, true, _) => LevelingMode::AllPixels,
                _ => LevelingMode::Trimmed {
                    trim_fraction: self.trim_fraction,
                },
            };
        }
        if set("hessian_threshold") {
            cfg.surf.hessian_threshold = self.hessian_threshold;
        }
        if set("octaves") {
            cfg.surf.octaves = self.octaves;
        }
        if self.rotation_invariant {
            cfg.surf.upright = false;
        }
        if set("ratio_threshold") {
            cfg.ratio_threshold = self.ratio_threshold;
        }
        if set("msac_threshold") {
            cfg.msac.threshold = self.msac_threshold;
        }
        if set("msac_confidence") {
            cfg.msac.confidence = self.msac_confidence;
        }
        if set("msac_max_iterations") {
            cfg.msac.max_iterations = self.msac_max_iterations;
        }
        if set("msac_seed") {
            cfg.msac.seed = self.msac_seed;
        }
        if set("transform") {
            cfg.msac.family = match self.transform {
                FamilyArg::Projective => TransformFamily::Projective,
                FamilyArg::Similarity => TransformFamily::Similarity,
            };
        }
        if set("residual") {
            cfg.msac.residual = match self.residual {
                ResidualArg::Forward => ResidualKind::Forward,
                ResidualArg::Symmetric => ResidualKind::Symmetric,
            };
        }
        if set("min_inliers") {
            cfg.min_inliers = self.min_inliers;
        }
        if set("reference_frame") {
            cfg.reference_index = self.reference_frame;
        }
        if set("elevation_rule") {
            cfg.elevation_rule = match self.elevation_rule {
                RuleArg::Mean => CompositeRule::Mean,
                RuleArg::Median => CompositeRule::Median,
            };
        }
        if self.gsd.is_some() {
            cfg.gsd_mm = self.gsd;
        }
        if set("depth_threshold") {
            cfg.depth_threshold_mm = self.depth_threshold;
        }
        if set("min_area") {
            cfg.min_area_mm2 = self.min_area;
        }
        if set("straightedge") || set("straightedge_span") {
            cfg.straightedge = match (self.straightedge, set("straightedge")) {
                (StraightedgeArg::FullWidth, true) => StraightedgeMode::FullWidth,
                _ => StraightedgeMode::Sliding {
                    span_m: self.straightedge_span,
                },
            };
        }
        if set("profile_step") {
            cfg.profile_step_m = self.profile_step;
        }
        if set("profile_half_band") {
            cfg.profile_half_band_mm = self.profile_half_band;
        }
        cfg
    }
}
