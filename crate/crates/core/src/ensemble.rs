//! Two-model bounding-box ensembling.
//!
//! A baseline detector and a thermal-specialist detector each produce a
//! [`DetectionSet`] for the same image. Same-class detections that overlap
//! by at least `tau_iou` are merged into one box whose confidence and
//! geometry are the `gamma`-weighted convex combination of the pair
//! (thermal weighted by `gamma`, baseline by `1 - gamma`). Detections that
//! find no partner are carried over unchanged, and the combined list is
//! pruned with greedy non-maximum suppression at `tau_nms`.
//!
//! Matching is first-match greedy: each baseline detection, visited in
//! canonical order, takes the first still-unmerged thermal detection (also
//! in canonical order) that qualifies. Canonical order is descending
//! confidence with ties broken by ascending input index.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::detections::{ClassId, Detection, DetectionSet};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("cannot fuse detections of different classes ({baseline} vs {thermal})")]
    ClassMismatch { baseline: ClassId, thermal: ClassId },
    #[error("image id mismatch: baseline '{baseline}' vs thermal '{thermal}'")]
    ImageMismatch { baseline: String, thermal: String },
    #[error("image '{image_id}': sizes differ ({bw}x{bh} vs {tw}x{th})")]
    SizeMismatch {
        image_id: String,
        bw: u32,
        bh: u32,
        tw: u32,
        th: u32,
    },
    #[error("{name} = {value} is outside {range}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

/// Which detections may suppress each other during NMS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmsScope {
    /// Only same-class overlaps are suppressed.
    #[default]
    ClassAware,
    /// Any overlap is suppressed regardless of class.
    ClassAgnostic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    gamma: f64,
    tau_iou: f64,
    tau_nms: f64,
    class_gamma: BTreeMap<ClassId, f64>,
    nms_scope: NmsScope,
}

impl Default for FusionConfig {
    /// `gamma = 0.5`, `tau_iou = 0.5`, `tau_nms = 0.5`, class-aware NMS.
    fn default() -> Self {
        Self {
            gamma: 0.5,
            tau_iou: 0.5,
            tau_nms: 0.5,
            class_gamma: BTreeMap::new(),
            nms_scope: NmsScope::ClassAware,
        }
    }
}

fn check_gamma(value: f64) -> Result<f64, EnsembleError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(EnsembleError::InvalidParameter {
            name: "gamma",
            value,
            range: "[0, 1]",
        })
    }
}

fn check_threshold(name: &'static str, value: f64) -> Result<f64, EnsembleError> {
    if value > 0.0 && value <= 1.0 {
        Ok(value)
    } else {
        Err(EnsembleError::InvalidParameter {
            name,
            value,
            range: "(0, 1]",
        })
    }
}

impl FusionConfig {
    pub fn new(gamma: f64, tau_iou: f64, tau_nms: f64) -> Result<Self, EnsembleError> {
        Ok(Self {
            gamma: check_gamma(gamma)?,
            tau_iou: check_threshold("tau_iou", tau_iou)?,
            tau_nms: check_threshold("tau_nms", tau_nms)?,
            ..Self::default()
        })
    }

    /// Overrides `gamma` for one class.
    pub fn with_class_gamma(mut self, class: ClassId, gamma: f64) -> Result<Self, EnsembleError> {
        self.class_gamma.insert(class, check_gamma(gamma)?);
        Ok(self)
    }

    pub fn with_nms_scope(mut self, scope: NmsScope) -> Self {
        self.nms_scope = scope;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_for(&self, class: ClassId) -> f64 {
        self.class_gamma.get(&class).copied().unwrap_or(self.gamma)
    }

    pub fn tau_iou(&self) -> f64 {
        self.tau_iou
    }

    pub fn tau_nms(&self) -> f64 {
        self.tau_nms
    }

    pub fn nms_scope(&self) -> NmsScope {
        self.nms_scope
    }

    pub fn class_gammas(&self) -> &BTreeMap<ClassId, f64> {
        &self.class_gamma
    }
}

/// Where an ensemble output came from. Indices are positions in the
/// original (unsorted) input lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Baseline(usize),
    Thermal(usize),
    Fused { baseline: usize, thermal: usize },
}

impl Provenance {
    pub fn baseline_index(&self) -> Option<usize> {
        match *self {
            Provenance::Baseline(i) | Provenance::Fused { baseline: i, .. } => Some(i),
            Provenance::Thermal(_) => None,
        }
    }

    pub fn thermal_index(&self) -> Option<usize> {
        match *self {
            Provenance::Thermal(j) | Provenance::Fused { thermal: j, .. } => Some(j),
            Provenance::Baseline(_) => None,
        }
    }

    pub fn source(&self) -> &'static str {
        match self {
            Provenance::Baseline(_) => "baseline",
            Provenance::Thermal(_) => "thermal",
            Provenance::Fused { .. } => "fused",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedDetection {
    pub detection: Detection,
    pub provenance: Provenance,
}

#[inline]
fn mix(gamma: f64, thermal: f64, baseline: f64) -> f64 {
    gamma * thermal + (1.0 - gamma) * baseline
}

/// Weighted merge of a baseline and a thermal detection of the same class.
///
/// Confidence and each of `x`, `y`, `w`, `h` become
/// `gamma * thermal + (1 - gamma) * baseline`, so `gamma = 0` returns the
/// baseline detection and `gamma = 1` the thermal one, bit for bit.
pub fn fuse_pair(baseline: &Detection, thermal: &Detection, gamma: f64) -> Result<Detection, EnsembleError> {
    check_gamma(gamma)?;
    if baseline.class() != thermal.class() {
        return Err(EnsembleError::ClassMismatch {
            baseline: baseline.class(),
            thermal: thermal.class(),
        });
    }
    let (b, t) = (baseline.bbox(), thermal.bbox());
    // convex combinations of positive extents stay positive
    let bbox = BoundingBox::new(
        mix(gamma, t.x(), b.x()),
        mix(gamma, t.y(), b.y()),
        mix(gamma, t.w(), b.w()),
        mix(gamma, t.h(), b.h()),
    )
    .expect("convex combination of valid boxes");
    let conf = mix(gamma, thermal.conf(), baseline.conf()).clamp(0.0, 1.0);
    Ok(Detection::new(baseline.class(), bbox, conf).expect("confidence clamped"))
}

fn by_confidence_desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Indices of `dets` sorted by descending confidence, ties by ascending index.
pub fn canonical_order(dets: &[Detection]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    // stable sort keeps ascending index among equal confidences
    idx.sort_by(|&a, &b| by_confidence_desc(dets[a].conf(), dets[b].conf()));
    idx
}

/// Output of the matching stage, before NMS.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchOutcome {
    pub fused: Vec<FusedDetection>,
    pub unmerged: Vec<FusedDetection>,
}

impl MatchOutcome {
    /// Fused detections followed by unmerged ones.
    pub fn combined(&self) -> impl Iterator<Item = &FusedDetection> {
        self.fused.iter().chain(self.unmerged.iter())
    }
}

fn check_same_image(baseline: &DetectionSet, thermal: &DetectionSet) -> Result<(), EnsembleError> {
    if baseline.image_id != thermal.image_id {
        return Err(EnsembleError::ImageMismatch {
            baseline: baseline.image_id.clone(),
            thermal: thermal.image_id.clone(),
        });
    }
    if (baseline.width, baseline.height) != (thermal.width, thermal.height) {
        return Err(EnsembleError::SizeMismatch {
            image_id: baseline.image_id.clone(),
            bw: baseline.width,
            bh: baseline.height,
            tw: thermal.width,
            th: thermal.height,
        });
    }
    Ok(())
}

/// The matching double loop: pairs same-class detections with
/// `iou >= tau_iou` first-match greedily and fuses each pair. Every input
/// detection ends up in exactly one output, fused or unmerged.
pub fn match_and_fuse(
    baseline: &DetectionSet,
    thermal: &DetectionSet,
    cfg: &FusionConfig,
) -> Result<MatchOutcome, EnsembleError> {
    check_same_image(baseline, thermal)?;
    let (ys, ts) = (&baseline.detections, &thermal.detections);
    let thermal_order = canonical_order(ts);
    let mut thermal_merged = vec![false; ts.len()];
    let mut out = MatchOutcome::default();

    for i in canonical_order(ys) {
        let d_i = &ys[i];
        let partner = thermal_order.iter().copied().find(|&j| {
            !thermal_merged[j] && ts[j].class() == d_i.class() && d_i.bbox().iou(ts[j].bbox()) >= cfg.tau_iou
        });
        match partner {
            Some(j) => {
                thermal_merged[j] = true;
                out.fused.push(FusedDetection {
                    detection: fuse_pair(d_i, &ts[j], cfg.gamma_for(d_i.class()))?,
                    provenance: Provenance::Fused {
                        baseline: i,
                        thermal: j,
                    },
                });
            }
            None => out.unmerged.push(FusedDetection {
                detection: *d_i,
                provenance: Provenance::Baseline(i),
            }),
        }
    }
    for j in thermal_order {
        if !thermal_merged[j] {
            out.unmerged.push(FusedDetection {
                detection: ts[j],
                provenance: Provenance::Thermal(j),
            });
        }
    }
    Ok(out)
}

/// Greedy NMS returning indices into `dets` of the survivors, in
/// descending confidence order. A detection is suppressed when its IoU
/// with an already kept detection (of the same class, under
/// [`NmsScope::ClassAware`]) is strictly greater than `tau_nms`.
pub fn nms_indices(dets: &[Detection], tau_nms: f64, scope: NmsScope) -> Vec<usize> {
    debug_assert!(tau_nms > 0.0 && tau_nms <= 1.0);
    let mut kept: Vec<usize> = Vec::new();
    for i in canonical_order(dets) {
        let d = &dets[i];
        let suppressed = kept.iter().any(|&k| {
            let k = &dets[k];
            (scope == NmsScope::ClassAgnostic || k.class() == d.class()) && k.bbox().iou(d.bbox()) > tau_nms
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept
}

/// Class-aware greedy NMS.
pub fn nms(dets: &[Detection], tau_nms: f64) -> Vec<Detection> {
    nms_with_scope(dets, tau_nms, NmsScope::ClassAware)
}

pub fn nms_with_scope(dets: &[Detection], tau_nms: f64, scope: NmsScope) -> Vec<Detection> {
    nms_indices(dets, tau_nms, scope).into_iter().map(|i| dets[i]).collect()
}

/// Ensembled detections of one image plus per-detection provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutput {
    pub set: DetectionSet,
    pub provenance: Vec<Provenance>,
}

/// Full ensemble for one image: match, fuse, carry over, then NMS.
pub fn ensemble_fuse(
    baseline: &DetectionSet,
    thermal: &DetectionSet,
    cfg: &FusionConfig,
) -> Result<EnsembleOutput, EnsembleError> {
    let outcome = match_and_fuse(baseline, thermal, cfg)?;
    let combined: Vec<FusedDetection> = outcome.combined().copied().collect();
    let plain: Vec<Detection> = combined.iter().map(|f| f.detection).collect();
    let keep = nms_indices(&plain, cfg.tau_nms, cfg.nms_scope);
    Ok(EnsembleOutput {
        set: DetectionSet {
            image_id: baseline.image_id.clone(),
            width: baseline.width,
            height: baseline.height,
            detections: keep.iter().map(|&k| plain[k]).collect(),
        },
        provenance: keep.iter().map(|&k| combined[k].provenance).collect(),
    })
}

/// Joins two corpora by image id and ensembles every image in parallel.
///
/// Output follows the baseline's image order, followed by images that
/// only the thermal corpus contains (in its order). An image present on
/// one side only is fused against an empty set.
pub fn ensemble_corpus(
    baseline: &[DetectionSet],
    thermal: &[DetectionSet],
    cfg: &FusionConfig,
) -> Result<Vec<EnsembleOutput>, EnsembleError> {
    let thermal_by_id: BTreeMap<&str, &DetectionSet> = thermal.iter().map(|s| (s.image_id.as_str(), s)).collect();
    let baseline_ids: std::collections::HashSet<&str> = baseline.iter().map(|s| s.image_id.as_str()).collect();

    let mut jobs: Vec<(DetectionSet, DetectionSet)> = Vec::with_capacity(baseline.len());
    for b in baseline {
        let t = match thermal_by_id.get(b.image_id.as_str()) {
            Some(t) => (*t).clone(),
            None => DetectionSet::empty(b.image_id.clone(), b.width, b.height),
        };
        jobs.push((b.clone(), t));
    }
    for t in thermal {
        if !baseline_ids.contains(t.image_id.as_str()) {
            jobs.push((DetectionSet::empty(t.image_id.clone(), t.width, t.height), t.clone()));
        }
    }
    jobs.par_iter().map(|(b, t)| ensemble_fuse(b, t, cfg)).collect()
}
