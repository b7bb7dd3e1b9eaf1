//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use fusekit::detections::{ClassId, Detection, DetectionSet};
use fusekit::geometry::BoundingBox;
use num_rational::Ratio;
use rand::Rng;

/// Integer box as (x, y, w, h).
pub type IBox = [i64; 4];

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn to_box(b: IBox) -> BoundingBox {
    BoundingBox::new(b[0] as f64, b[1] as f64, b[2] as f64, b[3] as f64).unwrap()
}

pub fn det(class: ClassId, b: IBox, conf: f64) -> Detection {
    Detection::new(class, to_box(b), conf).unwrap()
}

pub fn set(id: &str, dets: Vec<Detection>) -> DetectionSet {
    DetectionSet {
        image_id: id.into(),
        width: 200,
        height: 200,
        detections: dets,
    }
}

/// Exact IoU of two integer boxes.
pub fn rational_iou(a: IBox, b: IBox) -> Ratio<i64> {
    let iw = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
    let ih = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
    let inter = if iw > 0 && ih > 0 { iw * ih } else { 0 };
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    Ratio::new(inter, union)
}

/// IoU by counting unit cells of the pixel lattice.
pub fn lattice_iou(a: IBox, b: IBox) -> f64 {
    let inside = |r: IBox, x: i64, y: i64| x >= r[0] && x < r[0] + r[2] && y >= r[1] && y < r[1] + r[3];
    let x0 = a[0].min(b[0]);
    let y0 = a[1].min(b[1]);
    let x1 = (a[0] + a[2]).max(b[0] + b[2]);
    let y1 = (a[1] + a[3]).max(b[1] + b[3]);
    let (mut inter, mut union) = (0u64, 0u64);
    for y in y0..y1 {
        for x in x0..x1 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    inter as f64 / union as f64
}

pub fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Greedy evaluation matching with exact arithmetic. `preds` must already
/// be in evaluation order; each one takes the free ground-truth box of
/// highest IoU (lowest index on ties) if that IoU reaches `thr`.
pub fn oracle_match(preds: &[IBox], gts: &[IBox], thr: Ratio<i64>) -> Vec<bool> {
    let mut taken = vec![false; gts.len()];
    preds
        .iter()
        .map(|p| {
            let mut best: Option<(usize, Ratio<i64>)> = None;
            for (g, gt) in gts.iter().enumerate() {
                let v = rational_iou(*p, *gt);
                if taken[g] || v < thr {
                    continue;
                }
                if best.is_none() || v > best.unwrap().1 {
                    best = Some((g, v));
                }
            }
            match best {
                Some((g, _)) => {
                    taken[g] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// 101-point interpolated AP by enumerating every point of the PR curve:
/// at recall level k/100 take the best precision among ranks whose recall
/// reaches it. Comparisons are done on integers.
pub fn oracle_ap(tp: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return if tp.is_empty() { 1.0 } else { 0.0 };
    }
    let mut cum = Vec::with_capacity(tp.len());
    let mut c = 0usize;
    for &t in tp {
        c += t as usize;
        cum.push(c);
    }
    let mut total = Ratio::new(0i64, 1);
    for k in 0..=100usize {
        let best = cum
            .iter()
            .enumerate()
            .filter(|(_, &c)| c * 100 >= k * num_gt)
            .map(|(j, &c)| Ratio::new(c as i64, j as i64 + 1))
            .max();
        if let Some(p) = best {
            total += p;
        }
    }
    ratio_to_f64(total / 101)
}

pub fn random_box<R: Rng>(rng: &mut R, max: i64) -> IBox {
    let w = rng.random_range(1..=max / 2);
    let h = rng.random_range(1..=max / 2);
    [rng.random_range(0..=max - w), rng.random_range(0..=max - h), w, h]
}

/// A box near `b`, shifted and resized by a few units.
pub fn jittered<R: Rng>(rng: &mut R, b: IBox, spread: i64) -> IBox {
    let w = (b[2] + rng.random_range(-spread..=spread)).max(1);
    let h = (b[3] + rng.random_range(-spread..=spread)).max(1);
    [
        b[0] + rng.random_range(-spread..=spread),
        b[1] + rng.random_range(-spread..=spread),
        w,
        h,
    ]
}

pub fn assert_sets_close(got: &[DetectionSet], want: &[DetectionSet], tol: f64) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("{} images, expected {}", got.len(), want.len()));
    }
    for (g, w) in got.iter().zip(want) {
        if (g.image_id.as_str(), g.width, g.height) != (w.image_id.as_str(), w.width, w.height) {
            return Err(format!("image {} vs {}", g.image_id, w.image_id));
        }
        if g.len() != w.len() {
            return Err(format!("{}: {} detections, expected {}", g.image_id, g.len(), w.len()));
        }
        for (k, (a, b)) in g.detections.iter().zip(&w.detections).enumerate() {
            let fa = [a.bbox().x(), a.bbox().y(), a.bbox().w(), a.bbox().h(), a.conf()];
            let fb = [b.bbox().x(), b.bbox().y(), b.bbox().w(), b.bbox().h(), b.conf()];
            let close = fa.iter().zip(&fb).all(|(x, y)| (x - y).abs() <= tol);
            if a.class() != b.class() || !close {
                return Err(format!("{}[{k}]: {a:?} vs {b:?}", g.image_id));
            }
        }
    }
    Ok(())
}
