//! The `fusekit` command line.
//!
//! Exit codes: 0 success, 1 validation or contract error, 2 I/O or file
//! format error, 3 usage error. Standard output carries one `key=value`
//! line per run; diagnostics go to standard error.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::detections::{self, detections_to_string, BoxFormat, ClassRegistry, DetectionError, DetectionSet};
use crate::ensemble::{ensemble_corpus, EnsembleError, FusionConfig, NmsScope};
use crate::io::write_atomic;
use crate::metrics::{evaluate_with, EvalConfig, F1Policy, MetricsError};
use crate::registration::{
    self, decode_pnm, encode_pnm, estimate_homography, fuse_images, warp, Colormap, IrNormalization, PnmError, Point2,
    RansacParams, RegistrationError, RegistrationFileError,
};
use crate::synth::{run_experiment, SynthConfig, SynthError};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Validation = 1,
    Io = 2,
    Usage = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    fn validation(message: impl fmt::Display) -> Self {
        Self {
            status: ExitStatus::Validation,
            message: message.to_string(),
        }
    }

    fn io(message: impl fmt::Display) -> Self {
        Self {
            status: ExitStatus::Io,
            message: message.to_string(),
        }
    }
}

impl From<DetectionError> for CliError {
    fn from(e: DetectionError) -> Self {
        match e {
            DetectionError::Io { .. } => Self::io(e),
            _ => Self::validation(e),
        }
    }
}

impl From<EnsembleError> for CliError {
    fn from(e: EnsembleError) -> Self {
        Self::validation(e)
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        Self::validation(e)
    }
}

impl From<RegistrationError> for CliError {
    fn from(e: RegistrationError) -> Self {
        Self::validation(e)
    }
}

impl From<RegistrationFileError> for CliError {
    fn from(e: RegistrationFileError) -> Self {
        Self::io(e)
    }
}

impl From<PnmError> for CliError {
    fn from(e: PnmError) -> Self {
        Self::io(e)
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io { .. } => Self::io(e),
            SynthError::Detections(inner) => inner.into(),
            _ => Self::validation(e),
        }
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn threshold(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1]"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be a non-negative number"))
    }
}

fn class_gamma(s: &str) -> Result<(String, f64), String> {
    let (code, g) = s
        .split_once('=')
        .ok_or_else(|| format!("expected CLASS=GAMMA, got '{s}'"))?;
    Ok((code.to_owned(), unit_interval(g)?))
}

#[derive(Debug, Parser)]
#[command(
    name = "fusekit",
    version,
    about = "Visible/thermal registration, detector ensembling and evaluation"
)]
pub struct Cli {
    /// Worker threads for per-image parallelism (outputs do not depend on it)
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ensemble baseline and thermal detections image by image
    FuseDets(FuseDetsArgs),
    /// Score predictions against ground truth
    Eval(EvalArgs),
    /// Estimate a homography from point correspondences
    Register(RegisterArgs),
    /// Resample a PGM/PPM image through a homography
    Warp(WarpArgs),
    /// Blend a visible PPM with an aligned thermal PGM
    FuseImg(FuseImgArgs),
    /// Run a synthetic two-detector experiment
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct FuseDetsArgs {
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long)]
    pub thermal: PathBuf,
    /// Thermal weight in the fused confidence and box
    #[arg(long, default_value = "0.5", value_parser = unit_interval)]
    pub gamma: f64,
    /// Minimum IoU for two detections to be fused
    #[arg(long, default_value = "0.5", value_parser = threshold)]
    pub iou: f64,
    /// NMS suppresses overlaps with IoU above this
    #[arg(long, default_value = "0.5", value_parser = threshold)]
    pub nms: f64,
    /// Per-class gamma override, e.g. C3=0.8 (repeatable)
    #[arg(long = "class-gamma", value_parser = class_gamma)]
    pub class_gamma: Vec<(String, f64)>,
    /// Let detections of different classes suppress each other
    #[arg(long)]
    pub class_agnostic_nms: bool,
    /// Input boxes are normalized (cx, cy, w, h)
    #[arg(long)]
    pub from_normalized_center: bool,
    /// Write per-detection provenance here
    #[arg(long)]
    pub audit: Option<PathBuf>,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Report precision/recall/F1 at this confidence instead of the F1-maximizing one
    #[arg(long, value_parser = unit_interval)]
    pub f1_threshold: Option<f64>,
    /// Input boxes are normalized (cx, cy, w, h)
    #[arg(long)]
    pub from_normalized_center: bool,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// CSV with header src_x,src_y,dst_x,dst_y
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub ransac: bool,
    #[arg(long, default_value = "1000", requires = "ransac")]
    pub iters: usize,
    /// Inlier reprojection threshold in pixels
    #[arg(long, default_value = "2.0", value_parser = non_negative, requires = "ransac")]
    pub thresh: f64,
    #[arg(long, default_value = "0", requires = "ransac")]
    pub seed: u64,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct WarpArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Homography JSON mapping output pixels to input pixels
    #[arg(long = "h")]
    pub homography: PathBuf,
    /// Treat the homography as mapping input pixels to output pixels
    #[arg(long)]
    pub forward: bool,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    #[arg(long, default_value = "0", value_parser = non_negative)]
    pub fill: f64,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseImgArgs {
    #[arg(long)]
    pub rgb: PathBuf,
    #[arg(long)]
    pub ir: PathBuf,
    /// Weight of the visible image
    #[arg(long, default_value = "0.5", value_parser = unit_interval)]
    pub weight: f64,
    #[arg(long, default_value = "gray")]
    pub colormap: Colormap,
    /// Fixed lower end of the thermal range (requires --ir-max)
    #[arg(long, requires = "ir_max")]
    pub ir_min: Option<f64>,
    /// Fixed upper end of the thermal range (requires --ir-min)
    #[arg(long, requires = "ir_min")]
    pub ir_max: Option<f64>,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

/// Parses `args` (including the program name), runs the command and
/// returns its exit status.
pub fn run<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return usage_status(&e);
        }
    };
    match execute(&cli) {
        Ok(line) => {
            println!("{line}");
            ExitStatus::Success
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.status
        }
    }
}

/// `--help` and `--version` surface as parse errors that are not failures.
fn usage_status(e: &clap::Error) -> ExitStatus {
    if e.use_stderr() {
        ExitStatus::Usage
    } else {
        ExitStatus::Success
    }
}

/// Runs a parsed command, returning its stdout line.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n as usize)
                .build()
                .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(&cli.command))
        }
        None => dispatch(&cli.command),
    }
}

fn dispatch(command: &Command) -> Result<String, CliError> {
    match command {
        Command::FuseDets(a) => cmd_fuse_dets(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Register(a) => cmd_register(a),
        Command::Warp(a) => cmd_warp(a),
        Command::FuseImg(a) => cmd_fuse_img(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn box_format(normalized: bool) -> BoxFormat {
    if normalized {
        BoxFormat::NormalizedCenter
    } else {
        BoxFormat::PixelTopLeft
    }
}

#[derive(Serialize)]
struct AuditEntry {
    source: &'static str,
    baseline_index: Option<usize>,
    thermal_index: Option<usize>,
}

#[derive(Serialize)]
struct AuditImage<'a> {
    id: &'a str,
    detections: Vec<AuditEntry>,
}

#[derive(Serialize)]
struct AuditConfig {
    gamma: f64,
    class_gamma: Vec<(String, f64)>,
    tau_iou: f64,
    tau_nms: f64,
    class_agnostic_nms: bool,
}

#[derive(Serialize)]
struct Audit<'a> {
    config: AuditConfig,
    images: Vec<AuditImage<'a>>,
}

pub fn cmd_fuse_dets(a: &FuseDetsArgs) -> Result<String, CliError> {
    let registry = ClassRegistry::canonical();
    let mut cfg = FusionConfig::new(a.gamma, a.iou, a.nms)?;
    for (code, g) in &a.class_gamma {
        let class = registry
            .by_code(code)
            .ok_or_else(|| CliError::validation(format!("unknown class '{code}' in --class-gamma")))?;
        cfg = cfg.with_class_gamma(class.id, *g)?;
    }
    if a.class_agnostic_nms {
        cfg = cfg.with_nms_scope(NmsScope::ClassAgnostic);
    }
    let format = box_format(a.from_normalized_center);
    let baseline = detections::load_detections_with(&a.baseline, &registry, format)?;
    let thermal = detections::load_detections_with(&a.thermal, &registry, format)?;
    let outputs = ensemble_corpus(&baseline, &thermal, &cfg)?;

    let sets: Vec<DetectionSet> = outputs.iter().map(|o| o.set.clone()).collect();
    let text = detections_to_string(&sets, &registry)?;
    if let Some(audit_path) = &a.audit {
        let audit = Audit {
            config: AuditConfig {
                gamma: cfg.gamma(),
                class_gamma: a.class_gamma.clone(),
                tau_iou: cfg.tau_iou(),
                tau_nms: cfg.tau_nms(),
                class_agnostic_nms: a.class_agnostic_nms,
            },
            images: outputs
                .iter()
                .map(|o| AuditImage {
                    id: &o.set.image_id,
                    detections: o
                        .provenance
                        .iter()
                        .map(|p| AuditEntry {
                            source: p.source(),
                            baseline_index: p.baseline_index(),
                            thermal_index: p.thermal_index(),
                        })
                        .collect(),
                })
                .collect(),
        };
        let mut audit_text = serde_json::to_string_pretty(&audit).expect("audit serialize");
        audit_text.push('\n');
        write_output(audit_path, audit_text.as_bytes())?;
    }
    write_output(&a.output, text.as_bytes())?;

    let total: usize = sets.iter().map(|s| s.len()).sum();
    let fused = outputs
        .iter()
        .flat_map(|o| &o.provenance)
        .filter(|p| p.source() == "fused")
        .count();
    Ok(format!("images={} detections={total} fused={fused}", sets.len()))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<String, CliError> {
    let registry = ClassRegistry::canonical();
    let format = box_format(a.from_normalized_center);
    let preds = detections::load_detections_with(&a.pred, &registry, format)?;
    let gts = detections::load_ground_truth_with(&a.gt, &registry, format)?;
    let policy = match a.f1_threshold {
        Some(t) => F1Policy::Fixed(t),
        None => F1Policy::MaxOverThresholds,
    };
    let cfg = EvalConfig::default().with_f1_policy(policy)?;
    let report = evaluate_with(&preds, &gts, &cfg, &registry)?;
    write_output(&a.output, report.to_json().as_bytes())?;
    Ok(report.summary_line())
}

pub fn cmd_register(a: &RegisterArgs) -> Result<String, CliError> {
    let corrs = registration::read_correspondences(&a.points)?;
    let params = a.ransac.then_some(RansacParams {
        iterations: a.iters,
        inlier_threshold: a.thresh,
        seed: a.seed,
    });
    let h = estimate_homography(&corrs, params.as_ref())?;
    let errors: Vec<f64> = corrs
        .iter()
        .map(|c| h.apply(c.src).map(|p| p.distance(&c.dst)).unwrap_or(f64::INFINITY))
        .collect();
    let max_err = errors.iter().copied().fold(0.0, f64::max);
    let inliers = match params {
        Some(p) => errors.iter().filter(|&&e| e <= p.inlier_threshold).count(),
        None => corrs.len(),
    };
    write_output(&a.output, registration::homography_to_json(&h).as_bytes())?;
    Ok(format!(
        "points={} inliers={inliers} max_reprojection_error={max_err:.6e}",
        corrs.len()
    ))
}

pub fn cmd_warp(a: &WarpArgs) -> Result<String, CliError> {
    let data = std::fs::read(&a.input).map_err(|e| CliError::io(format!("{}: {e}", a.input.display())))?;
    let src = decode_pnm(&data)?;
    let mut h = registration::read_homography(&a.homography)?;
    if a.forward {
        h = h.inverse()?;
    }
    let out = warp(&src, &h, a.width, a.height, a.fill);
    write_output(&a.output, &encode_pnm(&out))?;
    // where the output centre lands in the source, as a sanity check
    let centre = h
        .apply(Point2::new(a.width as f64 / 2.0, a.height as f64 / 2.0))
        .map(|p| format!("{:.3},{:.3}", p.x, p.y))
        .unwrap_or_else(|_| "inf".into());
    Ok(format!(
        "width={} height={} channels={} centre_in_source={centre}",
        out.width(),
        out.height(),
        out.channels()
    ))
}

pub fn cmd_fuse_img(a: &FuseImgArgs) -> Result<String, CliError> {
    let rgb = registration::read_pnm(&a.rgb)?;
    let ir = registration::read_pnm(&a.ir)?;
    let normalization = match (a.ir_min, a.ir_max) {
        (Some(lo), Some(hi)) => IrNormalization::Fixed { lo, hi },
        _ => IrNormalization::MinMax,
    };
    let fused = fuse_images(&rgb, &ir, a.weight, a.colormap, normalization)?;
    write_output(&a.output, &encode_pnm(&fused))?;
    Ok(format!(
        "width={} height={} weight={} colormap={}",
        fused.width(),
        fused.height(),
        a.weight,
        a.colormap.name()
    ))
}

pub fn cmd_synth(a: &SynthArgs) -> Result<String, CliError> {
    let cfg = SynthConfig::load(&a.config)?;
    let exp = run_experiment(&cfg, &a.output)?;
    eprintln!(
        "synth: {} images, seed {}, outputs in {}",
        cfg.n_images,
        cfg.seed,
        a.output.display()
    );
    Ok(exp.summary_line())
}
