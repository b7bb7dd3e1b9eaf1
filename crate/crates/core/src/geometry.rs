//! Axis-aligned boxes in pixel units.
//!
//! Boxes are stored as `(x, y, w, h)` with `(x, y)` the top-left corner.
//! Center-normalized detector outputs are converted with
//! [`BoundingBox::from_normalized_center`] at the ingest boundary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid box (x={x}, y={y}, w={w}, h={h}): extents must be positive and finite")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },
    #[error("invalid image size {width}x{height}")]
    InvalidImageSize { width: f64, height: f64 },
    #[error("normalized coordinate {name}={value} outside [0, 1]")]
    NotNormalized { name: &'static str, value: f64 },
}

/// Axis-aligned box with top-left corner `(x, y)` and extent `(w, h)`.
///
/// A `BoundingBox` always has finite fields and strictly positive extent;
/// the constructor enforces this, so `area` and `iou` never see a
/// degenerate box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        let finite = x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite();
        if !finite || w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::InvalidBox { x, y, w, h });
        }
        Ok(Self { x, y, w, h })
    }

    /// Builds a box from corner coordinates `(x1, y1)`–`(x2, y2)`.
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        Self::new(x1, y1, x2 - x1, y2 - y1)
    }

    /// Converts a center-format box normalized to the image size into pixel
    /// top-left form.
    pub fn from_normalized_center(
        cx: f64,
        cy: f64,
        w: f64,
        h: f64,
        img_w: f64,
        img_h: f64,
    ) -> Result<Self, GeometryError> {
        if !(img_w.is_finite() && img_h.is_finite() && img_w > 0.0 && img_h > 0.0) {
            return Err(GeometryError::InvalidImageSize {
                width: img_w,
                height: img_h,
            });
        }
        for (name, value) in [("cx", cx), ("cy", cy), ("w", w), ("h", h)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(GeometryError::NotNormalized { name, value });
            }
        }
        Self::new((cx - w / 2.0) * img_w, (cy - h / 2.0) * img_h, w * img_w, h * img_h)
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn w(&self) -> f64 {
        self.w
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    #[inline]
    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Intersection over union. Symmetric, in `[0, 1]`, and exactly `1.0`
    /// for a box against itself.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter == 0.0 {
            return 0.0;
        }
        let union = self.edge_area() + other.edge_area() - inter;
        (inter / union).clamp(0.0, 1.0)
    }

    // Area from edge differences, consistent with `intersection_area`.
    fn edge_area(&self) -> f64 {
        (self.right() - self.x) * (self.bottom() - self.y)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self, GeometryError> {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    pub fn scaled(&self, s: f64) -> Result<Self, GeometryError> {
        Self::new(self.x * s, self.y * s, self.w * s, self.h * s)
    }

    /// Clips the box to `[0, width] x [0, height]`. Returns `None` when
    /// nothing with positive extent remains.
    pub fn clip_to(&self, width: f64, height: f64) -> Option<Self> {
        let x1 = self.x.max(0.0);
        let y1 = self.y.max(0.0);
        let x2 = self.right().min(width);
        let y2 = self.bottom().min(height);
        Self::from_corners(x1, y1, x2, y2).ok()
    }
}

/// Free-function form of [`BoundingBox::iou`].
#[inline]
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.iou(b)
}

#[derive(Deserialize)]
struct RawBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawBox::deserialize(d)?;
        BoundingBox::new(raw.x, raw.y, raw.w, raw.h).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn area_examples() {
        assert_eq!(bb(0.0, 0.0, 2.0, 2.0).area(), 4.0);
        assert_eq!(bb(5.0, 5.0, 1.0, 3.0).area(), 3.0);
        assert_eq!(bb(0.0, 0.0, 0.5, 0.5).area(), 0.25);
    }

    #[test]
    fn rejects_degenerate_and_non_finite() {
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 1.0, -1.0).is_err());
        assert!(BoundingBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, f64::INFINITY, 1.0, 1.0).is_err());
    }

    #[test]
    fn iou_examples() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&bb(10.0, 10.0, 2.0, 2.0)), 0.0);
        assert!(close(a.iou(&bb(1.0, 1.0, 2.0, 2.0)), 1.0 / 7.0));
        // touching edges share no area
        assert_eq!(a.iou(&bb(2.0, 0.0, 2.0, 2.0)), 0.0);
    }

    /// Counts covered cells of a `res`-per-pixel lattice.
    fn lattice_iou(a: &BoundingBox, b: &BoundingBox, res: usize) -> f64 {
        let step = 1.0 / res as f64;
        let (mut inter, mut union) = (0u64, 0u64);
        for i in 0..(4 * res) {
            for j in 0..(4 * res) {
                let (px, py) = ((i as f64 + 0.5) * step, (j as f64 + 0.5) * step);
                let ina = px >= a.x() && px < a.right() && py >= a.y() && py < a.bottom();
                let inb = px >= b.x() && px < b.right() && py >= b.y() && py < b.bottom();
                inter += (ina && inb) as u64;
                union += (ina || inb) as u64;
            }
        }
        inter as f64 / union as f64
    }

    #[test]
    fn iou_matches_lattice_oracle() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        let b = bb(1.0, 1.0, 2.0, 2.0);
        let oracle = lattice_iou(&a, &b, 64);
        assert!((oracle - 1.0 / 7.0).abs() < 1e-12);
        assert!(close(a.iou(&b), oracle));
    }

    #[test]
    fn from_normalized_center_examples() {
        assert_eq!(
            BoundingBox::from_normalized_center(0.5, 0.5, 1.0, 1.0, 100.0, 100.0).unwrap(),
            bb(0.0, 0.0, 100.0, 100.0)
        );
        assert_eq!(
            BoundingBox::from_normalized_center(0.5, 0.5, 0.5, 0.5, 100.0, 200.0).unwrap(),
            bb(25.0, 50.0, 50.0, 100.0)
        );
        assert!(matches!(
            BoundingBox::from_normalized_center(0.1, 0.1, 0.0, 0.1, 100.0, 100.0),
            Err(GeometryError::InvalidBox { .. })
        ));
        assert!(BoundingBox::from_normalized_center(1.2, 0.1, 0.1, 0.1, 100.0, 100.0).is_err());
        assert!(BoundingBox::from_normalized_center(0.5, 0.5, 0.1, 0.1, 0.0, 100.0).is_err());
    }

    #[test]
    fn clip() {
        let b = bb(-5.0, 10.0, 20.0, 100.0);
        assert_eq!(b.clip_to(50.0, 50.0), Some(bb(0.0, 10.0, 15.0, 40.0)));
        assert_eq!(bb(60.0, 0.0, 5.0, 5.0).clip_to(50.0, 50.0), None);
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-100.0..100.0f64, -100.0..100.0f64, 0.01..80.0f64, 0.01..80.0f64).prop_map(|(x, y, w, h)| bb(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = a.iou(&b);
            prop_assert_eq!(ab, b.iou(&a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(a.iou(&a), 1.0);
        }

        #[test]
        fn iou_translation_invariant(
            a in (-50i32..50, -50i32..50, 1i32..40, 1i32..40),
            b in (-50i32..50, -50i32..50, 1i32..40, 1i32..40),
            t in (-1000i32..1000, -1000i32..1000),
        ) {
            // integer coordinates keep the shifted arithmetic exact
            let a = bb(a.0 as f64, a.1 as f64, a.2 as f64, a.3 as f64);
            let b = bb(b.0 as f64, b.1 as f64, b.2 as f64, b.3 as f64);
            let (dx, dy) = (t.0 as f64, t.1 as f64);
            let shifted = a.translated(dx, dy).unwrap().iou(&b.translated(dx, dy).unwrap());
            prop_assert!(close(shifted, a.iou(&b)));
        }

        #[test]
        fn iou_scale_invariant(a in arb_box(), b in arb_box(), s in 0.01..100.0f64) {
            let scaled = a.scaled(s).unwrap().iou(&b.scaled(s).unwrap());
            prop_assert!(close(scaled, a.iou(&b)));
        }
    }
}
