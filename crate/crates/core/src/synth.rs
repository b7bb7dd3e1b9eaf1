//! Synthetic scenes and parametric detector models.
//!
//! Ground truth is drawn per image from uniform object counts, sizes and
//! positions. A [`DetectorProfile`] turns ground truth into detections:
//! each object is missed with a per-class probability, otherwise its
//! corners are jittered with Gaussian noise and it gets a confidence from
//! a clamped Gaussian; Poisson-many false positives with random class and
//! geometry are added on top.
//!
//! Every image draws from its own ChaCha8 stream (`seed`, stream number
//! derived from the image index and role), so generation is reproducible
//! and independent of how images are scheduled across threads.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detections::{
    detections_to_string, ground_truth_to_string, ClassId, ClassRegistry, Detection, DetectionError, DetectionSet,
    GroundTruthObject, GroundTruthSet,
};
use crate::ensemble::{ensemble_corpus, EnsembleError, FusionConfig};
use crate::geometry::BoundingBox;
use crate::metrics::{evaluate, EvalConfig, EvalReport, MetricsError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Detections(#[from] DetectionError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Mean and standard deviation of a Gaussian clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceModel {
    pub mean: f64,
    pub std: f64,
}

impl ConfidenceModel {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let v = Normal::new(self.mean, self.std).expect("validated").sample(rng);
        v.clamp(0.0, 1.0)
    }
}

/// Noise model of one simulated detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorProfile {
    /// Miss probability per class code; absent classes are never missed.
    pub miss_rate: BTreeMap<String, f64>,
    /// Poisson mean of false positives per image.
    pub fp_per_image: f64,
    /// Standard deviation, in pixels, of the noise added to each box corner.
    pub jitter_sigma: f64,
    pub tp_conf: ConfidenceModel,
    pub fp_conf: ConfidenceModel,
}

impl DetectorProfile {
    /// Detects everything exactly with confidence 1 and no false positives.
    pub fn oracle() -> Self {
        Self {
            miss_rate: BTreeMap::new(),
            fp_per_image: 0.0,
            jitter_sigma: 0.0,
            tp_conf: ConfidenceModel { mean: 1.0, std: 0.0 },
            fp_conf: ConfidenceModel { mean: 0.0, std: 0.0 },
        }
    }

    fn validate(&self, name: &str, registry: &ClassRegistry) -> Result<(), SynthError> {
        let bad = |what: String| Err(SynthError::Config(format!("{name}: {what}")));
        for (code, &p) in &self.miss_rate {
            if registry.by_code(code).is_none() {
                return bad(format!("unknown class '{code}' in miss_rate"));
            }
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("miss_rate[{code}] = {p} outside [0, 1]"));
            }
        }
        if !(self.fp_per_image >= 0.0 && self.fp_per_image.is_finite()) {
            return bad(format!("fp_per_image = {}", self.fp_per_image));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return bad(format!("jitter_sigma = {}", self.jitter_sigma));
        }
        for (what, m) in [("tp_conf", &self.tp_conf), ("fp_conf", &self.fp_conf)] {
            if !(0.0..=1.0).contains(&m.mean) || !(m.std >= 0.0 && m.std.is_finite()) {
                return bad(format!("{what} = ({}, {})", m.mean, m.std));
            }
        }
        Ok(())
    }

    fn miss(&self, code: &str) -> f64 {
        self.miss_rate.get(code).copied().unwrap_or(0.0)
    }
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span(pub u32, pub u32);

/// Scene and detector parameters for one synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_images: usize,
    pub image_w: u32,
    pub image_h: u32,
    /// Per class code, objects per image drawn uniformly from the span.
    pub objects_per_image: BTreeMap<String, Span>,
    /// Box side lengths in pixels, drawn uniformly from the span.
    pub box_size: Span,
    pub seed: u64,
    pub baseline_profile: DetectorProfile,
    pub thermal_profile: DetectorProfile,
}

fn per_class<T: Copy>(values: [T; 3]) -> BTreeMap<String, T> {
    ["C1", "C2", "C3"].into_iter().map(str::to_owned).zip(values).collect()
}

impl SynthConfig {
    /// The shipped complementary pair: a general detector that is weak on
    /// overheating and a thermal specialist that is weak on everything
    /// else. The numbers are synthetic, chosen to make the specialisation
    /// pronounced.
    pub fn complementary(seed: u64, n_images: usize) -> Self {
        Self {
            n_images,
            image_w: 640,
            image_h: 512,
            objects_per_image: per_class([Span(0, 2); 3]),
            box_size: Span(24, 96),
            seed,
            baseline_profile: DetectorProfile {
                miss_rate: per_class([0.1, 0.1, 0.6]),
                fp_per_image: 0.5,
                jitter_sigma: 2.0,
                tp_conf: ConfidenceModel { mean: 0.75, std: 0.12 },
                fp_conf: ConfidenceModel { mean: 0.35, std: 0.15 },
            },
            thermal_profile: DetectorProfile {
                miss_rate: per_class([0.5, 0.5, 0.05]),
                fp_per_image: 0.5,
                jitter_sigma: 2.0,
                tp_conf: ConfidenceModel { mean: 0.75, std: 0.12 },
                fp_conf: ConfidenceModel { mean: 0.35, std: 0.15 },
            },
        }
    }

    /// Both detectors are perfect.
    pub fn zero_noise(seed: u64, n_images: usize) -> Self {
        Self {
            baseline_profile: DetectorProfile::oracle(),
            thermal_profile: DetectorProfile::oracle(),
            ..Self::complementary(seed, n_images)
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SynthError::Config(e.to_string()))?;
        cfg.validate(&ClassRegistry::canonical())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|source| SynthError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serialize");
        text.push('\n');
        text
    }

    pub fn validate(&self, registry: &ClassRegistry) -> Result<(), SynthError> {
        let bad = |what: String| Err(SynthError::Config(what));
        if self.n_images == 0 {
            return bad("n_images must be at least 1".into());
        }
        if self.image_w == 0 || self.image_h == 0 {
            return bad(format!("image size {}x{}", self.image_w, self.image_h));
        }
        let Span(lo, hi) = self.box_size;
        if lo == 0 || lo > hi || hi > self.image_w.min(self.image_h) {
            return bad(format!(
                "box_size [{lo}, {hi}] does not fit a {}x{} image",
                self.image_w, self.image_h
            ));
        }
        for (code, span) in &self.objects_per_image {
            if registry.by_code(code).is_none() {
                return bad(format!("unknown class '{code}' in objects_per_image"));
            }
            if span.0 > span.1 {
                return bad(format!("objects_per_image[{code}] = [{}, {}]", span.0, span.1));
            }
        }
        self.baseline_profile.validate("baseline_profile", registry)?;
        self.thermal_profile.validate("thermal_profile", registry)?;
        Ok(())
    }
}

/// Random stream roles within one image.
#[derive(Debug, Clone, Copy)]
pub enum StreamRole {
    Scene = 0,
    Baseline = 1,
    Thermal = 2,
}

/// The ChaCha8 substream for one image and role.
pub fn image_stream(seed: u64, image: usize, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(image as u64 * 4 + role as u64);
    rng
}

/// Same-class objects in one scene overlap at most this much, so that a
/// perfect detector survives NMS intact.
pub const MAX_SAME_CLASS_IOU: f64 = 0.3;
const PLACEMENT_ATTEMPTS: usize = 20;

fn image_id(index: usize) -> String {
    format!("img_{index:05}")
}

fn scene_classes(cfg: &SynthConfig, registry: &ClassRegistry) -> Vec<(ClassId, Span)> {
    registry
        .classes()
        .iter()
        .filter_map(|c| cfg.objects_per_image.get(&c.code).map(|&s| (c.id, s)))
        .collect()
}

fn generate_scene(cfg: &SynthConfig, classes: &[(ClassId, Span)], index: usize) -> GroundTruthSet {
    let mut rng = image_stream(cfg.seed, index, StreamRole::Scene);
    let mut objects = Vec::new();
    for &(class, Span(lo, hi)) in classes {
        let count = rng.random_range(lo..=hi);
        for _ in 0..count {
            let w = rng.random_range(cfg.box_size.0..=cfg.box_size.1);
            let h = rng.random_range(cfg.box_size.0..=cfg.box_size.1);
            for _ in 0..PLACEMENT_ATTEMPTS {
                let x = rng.random_range(0..=cfg.image_w - w);
                let y = rng.random_range(0..=cfg.image_h - h);
                let Some(bbox) = BoundingBox::new(x as f64, y as f64, w as f64, h as f64)
                    .ok()
                    .and_then(|b| b.clip_to(cfg.image_w as f64, cfg.image_h as f64))
                else {
                    continue;
                };
                let crowded = objects
                    .iter()
                    .any(|o: &GroundTruthObject| o.class == class && o.bbox.iou(&bbox) > MAX_SAME_CLASS_IOU);
                if !crowded {
                    objects.push(GroundTruthObject { class, bbox });
                    break;
                }
            }
        }
    }
    GroundTruthSet {
        image_id: image_id(index),
        width: cfg.image_w,
        height: cfg.image_h,
        objects,
    }
}

/// Draws the ground truth of every image.
pub fn generate_ground_truth(cfg: &SynthConfig) -> Result<Vec<GroundTruthSet>, SynthError> {
    let registry = ClassRegistry::canonical();
    cfg.validate(&registry)?;
    let classes = scene_classes(cfg, &registry);
    Ok((0..cfg.n_images)
        .into_par_iter()
        .map(|i| generate_scene(cfg, &classes, i))
        .collect())
}

/// Runs one simulated detector over one image.
///
/// `fp_size` bounds the side lengths of false-positive boxes, and false
/// positives pick their class uniformly from `registry`.
pub fn simulate_detector<R: Rng>(
    gt: &GroundTruthSet,
    profile: &DetectorProfile,
    fp_size: Span,
    registry: &ClassRegistry,
    rng: &mut R,
) -> DetectionSet {
    let (img_w, img_h) = (gt.width as f64, gt.height as f64);
    let jitter = Normal::new(0.0, profile.jitter_sigma).expect("validated sigma");
    let mut detections = Vec::new();

    for obj in &gt.objects {
        let code = registry.code(obj.class).unwrap_or_default();
        let missed = rng.random::<f64>() < profile.miss(code);
        let noise: [f64; 4] = std::array::from_fn(|_| jitter.sample(rng));
        let conf = profile.tp_conf.sample(rng);
        if missed {
            continue;
        }
        let b = obj.bbox;
        let jittered = BoundingBox::from_corners(
            b.x() + noise[0],
            b.y() + noise[1],
            b.right() + noise[2],
            b.bottom() + noise[3],
        )
        .ok()
        .and_then(|b| b.clip_to(img_w, img_h));
        if let Some(bbox) = jittered {
            detections.push(Detection::new(obj.class, bbox, conf).expect("clamped confidence"));
        }
    }

    let fp_count = if profile.fp_per_image > 0.0 {
        Poisson::new(profile.fp_per_image).expect("validated rate").sample(rng) as usize
    } else {
        0
    };
    let classes: Vec<ClassId> = registry.ids().collect();
    let Span(lo, hi) = fp_size;
    for _ in 0..fp_count {
        let class = classes[rng.random_range(0..classes.len())];
        let w = rng.random_range(lo..=hi) as f64;
        let h = rng.random_range(lo..=hi) as f64;
        let x = rng.random::<f64>() * (img_w - w).max(0.0);
        let y = rng.random::<f64>() * (img_h - h).max(0.0);
        let conf = profile.fp_conf.sample(rng);
        if let Some(bbox) = BoundingBox::new(x, y, w, h).ok().and_then(|b| b.clip_to(img_w, img_h)) {
            detections.push(Detection::new(class, bbox, conf).expect("clamped confidence"));
        }
    }

    DetectionSet {
        image_id: gt.image_id.clone(),
        width: gt.width,
        height: gt.height,
        detections,
    }
}

/// Everything one synthetic experiment produces.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub ground_truth: Vec<GroundTruthSet>,
    pub baseline: Vec<DetectionSet>,
    pub thermal: Vec<DetectionSet>,
    pub fused: Vec<DetectionSet>,
    pub baseline_report: EvalReport,
    pub thermal_report: EvalReport,
    pub ensemble_report: EvalReport,
}

impl Experiment {
    /// Ensemble mean AP@0.5 minus the better single model's.
    pub fn uplift(&self) -> f64 {
        self.ensemble_report.mean.ap50 - self.baseline_report.mean.ap50.max(self.thermal_report.mean.ap50)
    }

    /// `baseline_map50=... thermal_map50=... ensemble_map50=... uplift=...`
    pub fn summary_line(&self) -> String {
        format!(
            "baseline_map50={:.6} thermal_map50={:.6} ensemble_map50={:.6} uplift={:.6}",
            self.baseline_report.mean.ap50,
            self.thermal_report.mean.ap50,
            self.ensemble_report.mean.ap50,
            self.uplift()
        )
    }
}

/// Generates scenes, simulates both detectors, ensembles them with the
/// default fusion settings and evaluates all three.
pub fn simulate_experiment(cfg: &SynthConfig) -> Result<Experiment, SynthError> {
    let registry = ClassRegistry::canonical();
    let ground_truth = generate_ground_truth(cfg)?;
    let detect = |role: StreamRole, profile: &DetectorProfile| -> Vec<DetectionSet> {
        ground_truth
            .par_iter()
            .enumerate()
            .map(|(i, gt)| {
                let mut rng = image_stream(cfg.seed, i, role);
                simulate_detector(gt, profile, cfg.box_size, &registry, &mut rng)
            })
            .collect()
    };
    let baseline = detect(StreamRole::Baseline, &cfg.baseline_profile);
    let thermal = detect(StreamRole::Thermal, &cfg.thermal_profile);
    let fused: Vec<DetectionSet> = ensemble_corpus(&baseline, &thermal, &FusionConfig::default())?
        .into_iter()
        .map(|o| o.set)
        .collect();
    let eval_cfg = EvalConfig::default();
    Ok(Experiment {
        baseline_report: evaluate(&baseline, &ground_truth, &eval_cfg)?,
        thermal_report: evaluate(&thermal, &ground_truth, &eval_cfg)?,
        ensemble_report: evaluate(&fused, &ground_truth, &eval_cfg)?,
        ground_truth,
        baseline,
        thermal,
        fused,
    })
}

/// Output files written by [`run_experiment`], in write order.
pub const EXPERIMENT_FILES: [&str; 7] = [
    "gt.json",
    "baseline.json",
    "thermal.json",
    "fused.json",
    "report_baseline.json",
    "report_thermal.json",
    "report_ensemble.json",
];

/// [`simulate_experiment`] plus writing every artifact into `out_dir`.
pub fn run_experiment(cfg: &SynthConfig, out_dir: &Path) -> Result<Experiment, SynthError> {
    let exp = simulate_experiment(cfg)?;
    let registry = ClassRegistry::canonical();
    std::fs::create_dir_all(out_dir).map_err(|source| SynthError::Io {
        path: out_dir.to_owned(),
        source,
    })?;
    let contents = [
        ground_truth_to_string(&exp.ground_truth, &registry)?,
        detections_to_string(&exp.baseline, &registry)?,
        detections_to_string(&exp.thermal, &registry)?,
        detections_to_string(&exp.fused, &registry)?,
        exp.baseline_report.to_json(),
        exp.thermal_report.to_json(),
        exp.ensemble_report.to_json(),
    ];
    for (name, text) in EXPERIMENT_FILES.iter().zip(&contents) {
        let path = out_dir.join(name);
        crate::io::write_atomic(&path, text.as_bytes()).map_err(|source| SynthError::Io { path, source })?;
    }
    Ok(exp)
}
