//! Multispectral detection toolkit.
//!
//! * [`geometry`]: axis-aligned boxes and IoU.
//! * [`detections`]: per-image detection/ground-truth sets and their JSON files.
//! * [`ensemble`]: weighted fusion of a baseline and a thermal detector, with NMS.
//! * [`metrics`]: AP@0.5, AP@0.5:0.95, precision, recall and F1.
//! * [`registration`]: homography estimation, warping and visible/thermal image fusion.
//! * [`synth`]: synthetic scenes and detector models for desk-scale experiments.
//! * [`cli`]: the `fusekit` executable.
//!
//! ```
//! use fusekit::detections::{Detection, DetectionSet, CRACKS};
//! use fusekit::ensemble::{ensemble_fuse, FusionConfig};
//! use fusekit::geometry::BoundingBox;
//!
//! let det = |x, conf| Detection::new(CRACKS, BoundingBox::new(x, 0.0, 10.0, 10.0).unwrap(), conf).unwrap();
//! let baseline = DetectionSet { image_id: "a".into(), width: 64, height: 64, detections: vec![det(0.0, 0.9)] };
//! let thermal = DetectionSet { detections: vec![det(1.0, 0.7)], ..baseline.clone() };
//!
//! let out = ensemble_fuse(&baseline, &thermal, &FusionConfig::default()).unwrap();
//! assert_eq!(out.set.len(), 1);
//! assert_eq!(out.set.detections[0].bbox().x(), 0.5);
//! ```

pub mod cli;
pub mod detections;
pub mod ensemble;
pub mod geometry;
mod io;
pub mod metrics;
pub mod registration;
pub mod synth;

pub use io::write_atomic;

// Guide chapters are compiled as doctests so their snippets stay in sync.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/ensemble.md")]
    mod ensemble {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/registration.md")]
    mod registration {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
