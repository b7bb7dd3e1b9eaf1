//! Detection evaluation: AP at a fixed IoU and averaged over an IoU range,
//! precision, recall and F1.
//!
//! Predictions are labelled TP/FP per class by greedy matching in
//! descending confidence order; each prediction claims the unmatched
//! ground-truth box it overlaps most, provided the IoU reaches the
//! threshold. AP is the 101-point interpolated area under the resulting
//! precision/recall curve.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use thiserror::Error;

use crate::detections::{ClassId, ClassRegistry, Detection, DetectionSet, GroundTruthSet};
use crate::ensemble::canonical_order;
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("image '{0}' has predictions but no ground truth entry")]
    UnknownImage(String),
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
}

/// How the F1 operating point is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum F1Policy {
    /// Sweep every distinct confidence and keep the F1-maximizing one.
    #[default]
    MaxOverThresholds,
    /// Count predictions with confidence at or above the given value.
    Fixed(f64),
}

impl Serialize for F1Policy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            F1Policy::MaxOverThresholds => s.serialize_str("max"),
            F1Policy::Fixed(t) => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("fixed", t)?;
                m.end()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalConfig {
    iou_fixed: f64,
    iou_range: Vec<f64>,
    f1_policy: F1Policy,
}

impl Default for EvalConfig {
    /// IoU 0.5, range 0.50:0.05:0.95, max-F1 operating point.
    fn default() -> Self {
        Self {
            iou_fixed: 0.5,
            iou_range: coco_range(),
            f1_policy: F1Policy::MaxOverThresholds,
        }
    }
}

fn coco_range() -> Vec<f64> {
    // k / 100 is the correctly rounded value of each threshold
    (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

impl EvalConfig {
    pub fn new(iou_fixed: f64, iou_range: Vec<f64>, f1_policy: F1Policy) -> Result<Self, MetricsError> {
        let valid = |t: f64| t > 0.0 && t <= 1.0;
        if !valid(iou_fixed) {
            return Err(MetricsError::InvalidConfig(format!(
                "iou_fixed {iou_fixed} outside (0, 1]"
            )));
        }
        if iou_range.is_empty() || !iou_range.iter().all(|&t| valid(t)) {
            return Err(MetricsError::InvalidConfig(
                "iou_range must be non-empty within (0, 1]".into(),
            ));
        }
        if iou_range.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MetricsError::InvalidConfig(
                "iou_range must be strictly increasing".into(),
            ));
        }
        if let F1Policy::Fixed(t) = f1_policy {
            if !(0.0..=1.0).contains(&t) {
                return Err(MetricsError::InvalidConfig(format!("F1 threshold {t} outside [0, 1]")));
            }
        }
        Ok(Self {
            iou_fixed,
            iou_range,
            f1_policy,
        })
    }

    pub fn with_f1_policy(self, f1_policy: F1Policy) -> Result<Self, MetricsError> {
        Self::new(self.iou_fixed, self.iou_range, f1_policy)
    }

    pub fn iou_fixed(&self) -> f64 {
        self.iou_fixed
    }

    pub fn iou_range(&self) -> &[f64] {
        &self.iou_range
    }

    pub fn f1_policy(&self) -> F1Policy {
        self.f1_policy
    }
}

/// Outcome of matching one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchLabel {
    Tp,
    Fp,
}

/// A prediction's confidence with its TP/FP label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredLabel {
    pub conf: f64,
    pub tp: bool,
}

/// Greedy matching of a single class on a single image at `iou_thr`.
/// The returned labels are aligned with `preds`.
pub fn match_predictions(preds: &[Detection], gts: &[BoundingBox], iou_thr: f64) -> Vec<MatchLabel> {
    let order = canonical_order(preds);
    let ious: Vec<Vec<f64>> = order
        .iter()
        .map(|&p| gts.iter().map(|g| preds[p].bbox().iou(g)).collect())
        .collect();
    let tps = greedy_match(&ious, gts.len(), iou_thr);
    let mut labels = vec![MatchLabel::Fp; preds.len()];
    for (rank, &p) in order.iter().enumerate() {
        if tps[rank] {
            labels[p] = MatchLabel::Tp;
        }
    }
    labels
}

/// `ious[rank][g]` for predictions already in canonical order.
fn greedy_match(ious: &[Vec<f64>], num_gt: usize, iou_thr: f64) -> Vec<bool> {
    let mut taken = vec![false; num_gt];
    ious.iter()
        .map(|row| {
            let mut best: Option<(usize, f64)> = None;
            for (g, &v) in row.iter().enumerate() {
                if !taken[g] && v >= iou_thr && best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
                true
            } else {
                false
            }
        })
        .collect()
}

/// 101-point interpolated AP over labels sorted by descending confidence.
///
/// With `num_gt == 0` the result is `1.0` for an empty label list and
/// `0.0` otherwise.
pub fn average_precision(labels: &[ScoredLabel], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return if labels.is_empty() { 1.0 } else { 0.0 };
    }
    let n = num_gt as f64;
    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(labels.len());
    let mut precision = Vec::with_capacity(labels.len());
    for (k, l) in labels.iter().enumerate() {
        tp += l.tp as usize;
        recall.push(tp as f64 / n);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    // precision envelope: max precision at this or any later rank
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut sum = 0.0;
    let mut k = 0;
    for step in 0..=100u32 {
        let r = step as f64 / 100.0;
        while k < recall.len() && recall[k] < r {
            k += 1;
        }
        if k == recall.len() {
            break;
        }
        sum += precision[k];
    }
    sum / 101.0
}

/// Metrics of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub ap50: f64,
    pub ap50_95: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Confidence at which precision, recall and F1 were taken; `None`
    /// when the class has no predictions.
    pub f1_conf_threshold: Option<f64>,
    pub num_gt: usize,
    pub num_pred: usize,
}

/// Arithmetic means over the classes listed in `classes`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanMetrics {
    pub ap50: f64,
    pub ap50_95: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub num_gt: usize,
    pub num_pred: usize,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub config: EvalConfig,
    /// Per-class metrics keyed by class code, in registry order.
    pub classes: Vec<(String, ClassMetrics)>,
    pub mean: MeanMetrics,
}

struct ClassTable<'a>(&'a [(String, ClassMetrics)]);

impl Serialize for ClassTable<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (code, metrics) in self.0 {
            m.serialize_entry(code, metrics)?;
        }
        m.end()
    }
}

impl Serialize for EvalReport {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry("config", &self.config)?;
        m.serialize_entry("classes", &ClassTable(&self.classes))?;
        m.serialize_entry("mean", &self.mean)?;
        m.end()
    }
}

impl EvalReport {
    pub fn class(&self, code: &str) -> Option<&ClassMetrics> {
        self.classes.iter().find(|(c, _)| c == code).map(|(_, m)| m)
    }

    /// Canonical JSON text, newline-terminated.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialize");
        text.push('\n');
        text
    }

    /// `map50=... map50_95=... precision=... f1=...`
    pub fn summary_line(&self) -> String {
        format!(
            "map50={:.6} map50_95={:.6} precision={:.6} f1={:.6}",
            self.mean.ap50, self.mean.ap50_95, self.mean.precision, self.mean.f1
        )
    }
}

/// Per-prediction record pooled across images.
struct Pooled {
    conf: f64,
    image: usize,
    rank: usize,
    /// TP flag per evaluated IoU threshold.
    tp: Vec<bool>,
}

pub fn evaluate(preds: &[DetectionSet], gts: &[GroundTruthSet], cfg: &EvalConfig) -> Result<EvalReport, MetricsError> {
    evaluate_with(preds, gts, cfg, &ClassRegistry::canonical())
}

pub fn evaluate_with(
    preds: &[DetectionSet],
    gts: &[GroundTruthSet],
    cfg: &EvalConfig,
    registry: &ClassRegistry,
) -> Result<EvalReport, MetricsError> {
    let gt_index: HashMap<&str, usize> = gts.iter().enumerate().map(|(i, g)| (g.image_id.as_str(), i)).collect();
    let mut pred_for_gt: Vec<Option<&DetectionSet>> = vec![None; gts.len()];
    for p in preds {
        let &g = gt_index
            .get(p.image_id.as_str())
            .ok_or_else(|| MetricsError::UnknownImage(p.image_id.clone()))?;
        pred_for_gt[g] = Some(p);
    }

    // thresholds[0] is iou_fixed, the rest are the averaging range
    let thresholds: Vec<f64> = std::iter::once(cfg.iou_fixed)
        .chain(cfg.iou_range.iter().copied())
        .collect();
    let classes: Vec<ClassId> = registry.ids().collect();

    // per image, per class: pooled records plus gt count
    let per_image: Vec<Vec<(Vec<Pooled>, usize)>> = gts
        .par_iter()
        .zip(pred_for_gt.par_iter())
        .enumerate()
        .map(|(image, (gt, pred))| {
            classes
                .iter()
                .map(|&class| match_image_class(image, gt, *pred, class, &thresholds))
                .collect()
        })
        .collect();

    let mut table = Vec::with_capacity(classes.len());
    for (ci, &class) in classes.iter().enumerate() {
        let mut pooled: Vec<&Pooled> = Vec::new();
        let mut num_gt = 0;
        for img in &per_image {
            pooled.extend(img[ci].0.iter());
            num_gt += img[ci].1;
        }
        pooled.sort_by(|a, b| {
            b.conf
                .partial_cmp(&a.conf)
                .unwrap_or(Ordering::Equal)
                .then(a.image.cmp(&b.image))
                .then(a.rank.cmp(&b.rank))
        });
        let code = registry.code(class).expect("registry class").to_owned();
        table.push((code, class_metrics(&pooled, num_gt, cfg)));
    }

    let mean = mean_metrics(&table);
    Ok(EvalReport {
        config: cfg.clone(),
        classes: table,
        mean,
    })
}

fn match_image_class(
    image: usize,
    gt: &GroundTruthSet,
    pred: Option<&DetectionSet>,
    class: ClassId,
    thresholds: &[f64],
) -> (Vec<Pooled>, usize) {
    let gt_boxes: Vec<BoundingBox> = gt.objects.iter().filter(|o| o.class == class).map(|o| o.bbox).collect();
    let dets: Vec<Detection> = pred
        .map(|p| p.detections.iter().filter(|d| d.class() == class).copied().collect())
        .unwrap_or_default();
    let order = canonical_order(&dets);
    let ious: Vec<Vec<f64>> = order
        .iter()
        .map(|&p| gt_boxes.iter().map(|g| dets[p].bbox().iou(g)).collect())
        .collect();
    let per_threshold: Vec<Vec<bool>> = thresholds
        .iter()
        .map(|&t| greedy_match(&ious, gt_boxes.len(), t))
        .collect();
    let pooled = order
        .iter()
        .enumerate()
        .map(|(rank, &p)| Pooled {
            conf: dets[p].conf(),
            image,
            rank,
            tp: per_threshold.iter().map(|tps| tps[rank]).collect(),
        })
        .collect();
    (pooled, gt_boxes.len())
}

fn labels_at(pooled: &[&Pooled], t: usize) -> Vec<ScoredLabel> {
    pooled
        .iter()
        .map(|p| ScoredLabel {
            conf: p.conf,
            tp: p.tp[t],
        })
        .collect()
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn class_metrics(pooled: &[&Pooled], num_gt: usize, cfg: &EvalConfig) -> ClassMetrics {
    let num_pred = pooled.len();
    let ap50 = average_precision(&labels_at(pooled, 0), num_gt);
    let ap50_95 = (1..=cfg.iou_range.len())
        .map(|t| average_precision(&labels_at(pooled, t), num_gt))
        .sum::<f64>()
        / cfg.iou_range.len() as f64;

    if num_gt == 0 {
        let (precision, f1) = if num_pred == 0 { (1.0, 1.0) } else { (0.0, 0.0) };
        let threshold = match cfg.f1_policy {
            F1Policy::Fixed(t) => Some(t),
            F1Policy::MaxOverThresholds => pooled.last().map(|p| p.conf),
        };
        return ClassMetrics {
            ap50,
            ap50_95,
            precision,
            recall: 1.0,
            f1,
            f1_conf_threshold: threshold,
            num_gt,
            num_pred,
        };
    }

    let n = num_gt as f64;
    let at_count = |k: usize| -> (f64, f64) {
        let tp = pooled[..k].iter().filter(|p| p.tp[0]).count() as f64;
        let precision = if k == 0 { 0.0 } else { tp / k as f64 };
        (precision, tp / n)
    };

    let (precision, recall, threshold) = match cfg.f1_policy {
        F1Policy::Fixed(t) => {
            let k = pooled.iter().take_while(|p| p.conf >= t).count();
            let (p, r) = at_count(k);
            (p, r, Some(t))
        }
        F1Policy::MaxOverThresholds => {
            let mut best: Option<(f64, f64, f64, f64)> = None;
            let mut tp = 0usize;
            for k in 0..num_pred {
                tp += pooled[k].tp[0] as usize;
                // only evaluate at the end of a run of equal confidences
                if k + 1 < num_pred && pooled[k + 1].conf == pooled[k].conf {
                    continue;
                }
                let p = tp as f64 / (k + 1) as f64;
                let r = tp as f64 / n;
                let f = f1_of(p, r);
                if best.is_none_or(|(bf, ..)| f > bf) {
                    best = Some((f, p, r, pooled[k].conf));
                }
            }
            match best {
                Some((_, p, r, c)) => (p, r, Some(c)),
                None => (0.0, 0.0, None),
            }
        }
    };

    ClassMetrics {
        ap50,
        ap50_95,
        precision,
        recall,
        f1: f1_of(precision, recall),
        f1_conf_threshold: threshold,
        num_gt,
        num_pred,
    }
}

/// Averages over classes present in the ground truth; when no class has
/// any ground truth, over all classes.
fn mean_metrics(table: &[(String, ClassMetrics)]) -> MeanMetrics {
    let present: Vec<&(String, ClassMetrics)> = table.iter().filter(|(_, m)| m.num_gt > 0).collect();
    let used: Vec<&(String, ClassMetrics)> = if present.is_empty() {
        table.iter().collect()
    } else {
        present
    };
    let count = used.len().max(1) as f64;
    let avg = |f: fn(&ClassMetrics) -> f64| used.iter().map(|(_, m)| f(m)).sum::<f64>() / count;
    MeanMetrics {
        ap50: avg(|m| m.ap50),
        ap50_95: avg(|m| m.ap50_95),
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        f1: avg(|m| m.f1),
        num_gt: table.iter().map(|(_, m)| m.num_gt).sum(),
        num_pred: table.iter().map(|(_, m)| m.num_pred).sum(),
        classes: used.iter().map(|(c, _)| c.clone()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detections::{GroundTruthObject, CORROSION, CRACKS};

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn det(x: f64, conf: f64) -> Detection {
        Detection::new(CRACKS, bb(x, 0.0, 10.0, 10.0), conf).unwrap()
    }

    fn lbl(conf: f64, tp: bool) -> ScoredLabel {
        ScoredLabel { conf, tp }
    }

    #[test]
    fn match_examples() {
        let gt = [bb(0.0, 0.0, 10.0, 10.0)];
        assert_eq!(match_predictions(&[det(0.5, 0.9)], &gt, 0.5), [MatchLabel::Tp]);
        assert_eq!(
            match_predictions(&[det(1.0, 0.8), det(0.0, 0.9)], &gt, 0.5),
            [MatchLabel::Fp, MatchLabel::Tp]
        );
        assert_eq!(
            match_predictions(&[det(0.0, 0.9), det(0.0, 0.3)], &[], 0.5),
            [MatchLabel::Fp, MatchLabel::Fp]
        );
    }

    #[test]
    fn match_picks_highest_iou_gt() {
        let gts = [bb(3.0, 0.0, 10.0, 10.0), bb(0.0, 0.0, 10.0, 10.0)];
        let preds = [det(0.0, 0.9), det(3.0, 0.8)];
        assert_eq!(match_predictions(&preds, &gts, 0.5), [MatchLabel::Tp, MatchLabel::Tp]);
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[lbl(0.9, true)], 1), 1.0);
        assert_eq!(average_precision(&[lbl(0.9, true), lbl(0.8, false)], 1), 1.0);
        let ap = average_precision(&[lbl(0.9, true), lbl(0.8, false)], 2);
        assert!((ap - 51.0 / 101.0).abs() < 1e-12);
        assert_eq!(average_precision(&[], 0), 1.0);
        assert_eq!(average_precision(&[lbl(0.9, false)], 0), 0.0);
        assert_eq!(average_precision(&[], 3), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(EvalConfig::new(0.0, vec![0.5], F1Policy::default()).is_err());
        assert!(EvalConfig::new(0.5, vec![], F1Policy::default()).is_err());
        assert!(EvalConfig::new(0.5, vec![0.6, 0.5], F1Policy::default()).is_err());
        assert!(EvalConfig::new(0.5, vec![0.5], F1Policy::Fixed(1.5)).is_err());
        assert_eq!(EvalConfig::default().iou_range().len(), 10);
        assert_eq!(EvalConfig::default().iou_range()[9], 0.95);
    }

    fn gt_set(id: &str, objects: Vec<(ClassId, BoundingBox)>) -> GroundTruthSet {
        GroundTruthSet {
            image_id: id.into(),
            width: 100,
            height: 100,
            objects: objects
                .into_iter()
                .map(|(class, bbox)| GroundTruthObject { class, bbox })
                .collect(),
        }
    }

    fn pred_set(id: &str, dets: Vec<Detection>) -> DetectionSet {
        DetectionSet {
            image_id: id.into(),
            width: 100,
            height: 100,
            detections: dets,
        }
    }

    #[test]
    fn oracle_predictions_score_one() {
        let objs = vec![
            (CRACKS, bb(0.0, 0.0, 10.0, 10.0)),
            (CORROSION, bb(30.0, 30.0, 5.0, 8.0)),
        ];
        let gts = vec![gt_set("a", objs.clone())];
        let preds = vec![pred_set(
            "a",
            objs.iter().map(|&(c, b)| Detection::new(c, b, 1.0).unwrap()).collect(),
        )];
        let r = evaluate(&preds, &gts, &EvalConfig::default()).unwrap();
        for v in [r.mean.ap50, r.mean.ap50_95, r.mean.precision, r.mean.recall, r.mean.f1] {
            assert_eq!(v, 1.0);
        }
        assert_eq!(r.mean.classes, ["C1", "C2"]);
        // C3 has no ground truth and no predictions
        assert_eq!(r.class("C3").unwrap().ap50, 1.0);
    }

    #[test]
    fn null_detector_scores_zero() {
        let gts = vec![gt_set("a", vec![(CRACKS, bb(0.0, 0.0, 10.0, 10.0))])];
        let r = evaluate(&[], &gts, &EvalConfig::default()).unwrap();
        let c1 = r.class("C1").unwrap();
        assert_eq!((c1.ap50, c1.recall, c1.f1), (0.0, 0.0, 0.0));
        assert_eq!(c1.f1_conf_threshold, None);
        assert_eq!(r.mean.ap50, 0.0);
    }

    #[test]
    fn pooled_51_over_101() {
        let gts = vec![gt_set(
            "a",
            vec![(CRACKS, bb(0.0, 0.0, 10.0, 10.0)), (CRACKS, bb(50.0, 50.0, 10.0, 10.0))],
        )];
        let preds = vec![pred_set("a", vec![det(0.0, 0.9), det(0.0, 0.8)])];
        let r = evaluate(&preds, &gts, &EvalConfig::default()).unwrap();
        let c1 = r.class("C1").unwrap();
        assert!((c1.ap50 - 51.0 / 101.0).abs() < 1e-12);
        assert_eq!(c1.f1_conf_threshold, Some(0.9));
        assert_eq!((c1.precision, c1.recall), (1.0, 0.5));
    }

    #[test]
    fn fixed_threshold_policy() {
        let gts = vec![gt_set("a", vec![(CRACKS, bb(0.0, 0.0, 10.0, 10.0))])];
        let preds = vec![pred_set("a", vec![det(0.0, 0.4), det(60.0, 0.9)])];
        let cfg = EvalConfig::default().with_f1_policy(F1Policy::Fixed(0.5)).unwrap();
        let c1 = evaluate(&preds, &gts, &cfg).unwrap().class("C1").copied().unwrap();
        assert_eq!((c1.precision, c1.recall, c1.f1), (0.0, 0.0, 0.0));
        assert_eq!(c1.f1_conf_threshold, Some(0.5));
        let cfg = EvalConfig::default().with_f1_policy(F1Policy::Fixed(0.3)).unwrap();
        let c1 = evaluate(&preds, &gts, &cfg).unwrap().class("C1").copied().unwrap();
        assert_eq!((c1.precision, c1.recall), (0.5, 1.0));
    }

    #[test]
    fn unknown_prediction_image_is_an_error() {
        let gts = vec![gt_set("a", vec![])];
        let preds = vec![pred_set("b", vec![])];
        assert_eq!(
            evaluate(&preds, &gts, &EvalConfig::default()),
            Err(MetricsError::UnknownImage("b".into()))
        );
    }

    #[test]
    fn report_json_layout() {
        let gts = vec![gt_set("a", vec![(CRACKS, bb(0.0, 0.0, 10.0, 10.0))])];
        let r = evaluate(&[], &gts, &EvalConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["config"]["f1_policy"], "max");
        assert_eq!(v["classes"]["C1"]["num_gt"], 1);
        assert!(v["classes"]["C1"]["f1_conf_threshold"].is_null());
        assert_eq!(v["mean"]["ap50"], 0.0);
        assert!(r.to_json().find("\"C1\"").unwrap() < r.to_json().find("\"C3\"").unwrap());
    }
}
