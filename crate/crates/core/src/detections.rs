//! Per-image detection and ground-truth sets, and their JSON files.
//!
//! One schema serves model outputs, fused outputs and ground truth:
//!
//! ```text
//! {"images": [{"id": "...", "width": 640, "height": 512,
//!   "detections": [{"class": "C1", "x": 10.0, "y": 20.0, "w": 30.0, "h": 40.0, "conf": 0.85}]}]}
//! ```
//!
//! Ground truth uses `"objects"` instead of `"detections"` and has no
//! `"conf"`. Serialization is canonical: fixed key order, shortest
//! round-trip float formatting, two-space indentation, trailing newline.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BoundingBox;
use crate::io::write_atomic;

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("image '{image_id}'{}: {reason}", fmt_index(*.index))]
    Validation {
        image_id: String,
        index: Option<usize>,
        reason: String,
    },
    #[error("class code '{0}' is already registered")]
    DuplicateClassCode(String),
    #[error("class id {0} is already registered")]
    DuplicateClassId(u16),
}

fn fmt_index(index: Option<usize>) -> String {
    index.map(|i| format!(" entry {i}")).unwrap_or_default()
}

impl DetectionError {
    fn invalid(image_id: &str, index: Option<usize>, reason: impl Into<String>) -> Self {
        Self::Validation {
            image_id: image_id.to_owned(),
            index,
            reason: reason.into(),
        }
    }
}

/// Numeric class identifier. Canonical classes use ids 1, 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassId(pub u16);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A defect category: the file code (`"C1"`) and a human name (`"cracks"`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefectClass {
    pub id: ClassId,
    pub code: String,
    pub name: String,
}

pub const CRACKS: ClassId = ClassId(1);
pub const CORROSION: ClassId = ClassId(2);
pub const OVERHEATING: ClassId = ClassId(3);

/// Maps class codes used in files to [`ClassId`]s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassRegistry {
    classes: Vec<DefectClass>,
}

impl Default for ClassRegistry {
    fn default() -> Self {
        Self::canonical()
    }
}

impl ClassRegistry {
    /// C1 = cracks, C2 = corrosion, C3 = overheating.
    pub fn canonical() -> Self {
        let mk = |id, code: &str, name: &str| DefectClass {
            id,
            code: code.to_owned(),
            name: name.to_owned(),
        };
        Self {
            classes: vec![
                mk(CRACKS, "C1", "cracks"),
                mk(CORROSION, "C2", "corrosion"),
                mk(OVERHEATING, "C3", "overheating"),
            ],
        }
    }

    pub fn register(&mut self, id: u16, code: &str, name: &str) -> Result<ClassId, DetectionError> {
        if self.classes.iter().any(|c| c.id.0 == id) {
            return Err(DetectionError::DuplicateClassId(id));
        }
        if self.by_code(code).is_some() {
            return Err(DetectionError::DuplicateClassCode(code.to_owned()));
        }
        self.classes.push(DefectClass {
            id: ClassId(id),
            code: code.to_owned(),
            name: name.to_owned(),
        });
        Ok(ClassId(id))
    }

    pub fn by_code(&self, code: &str) -> Option<&DefectClass> {
        self.classes.iter().find(|c| c.code == code)
    }

    pub fn get(&self, id: ClassId) -> Option<&DefectClass> {
        self.classes.iter().find(|c| c.id == id)
    }

    pub fn code(&self, id: ClassId) -> Option<&str> {
        self.get(id).map(|c| c.code.as_str())
    }

    /// Registered classes in registration order.
    pub fn classes(&self) -> &[DefectClass] {
        &self.classes
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes.iter().map(|c| c.id)
    }
}

/// One model output `(class, box, confidence)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    class: ClassId,
    bbox: BoundingBox,
    conf: f64,
}

impl Detection {
    /// Fails with the offending value when `conf` is outside `[0, 1]`.
    pub fn new(class: ClassId, bbox: BoundingBox, conf: f64) -> Result<Self, f64> {
        if !(0.0..=1.0).contains(&conf) {
            return Err(conf);
        }
        Ok(Self { class, bbox, conf })
    }

    #[inline]
    pub fn class(&self) -> ClassId {
        self.class
    }

    #[inline]
    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    #[inline]
    pub fn conf(&self) -> f64 {
        self.conf
    }

    pub fn with_conf(&self, conf: f64) -> Result<Self, f64> {
        Self::new(self.class, self.bbox, conf)
    }
}

/// One annotated object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthObject {
    pub class: ClassId,
    pub bbox: BoundingBox,
}

/// Detections of one model on one image. List order is meaningful: it is
/// the tie-breaker wherever confidences are equal.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn empty(image_id: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            image_id: image_id.into(),
            width,
            height,
            detections: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn validate(&self, registry: &ClassRegistry) -> Result<(), DetectionError> {
        check_dims(&self.image_id, self.width, self.height)?;
        for (i, d) in self.detections.iter().enumerate() {
            check_class(registry, &self.image_id, i, d.class)?;
            check_bounds(&self.image_id, i, self.width, self.height, &d.bbox)?;
        }
        Ok(())
    }
}

/// Annotated objects of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSet {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<GroundTruthObject>,
}

impl GroundTruthSet {
    pub fn validate(&self, registry: &ClassRegistry) -> Result<(), DetectionError> {
        check_dims(&self.image_id, self.width, self.height)?;
        for (i, o) in self.objects.iter().enumerate() {
            check_class(registry, &self.image_id, i, o.class)?;
            check_bounds(&self.image_id, i, self.width, self.height, &o.bbox)?;
        }
        Ok(())
    }
}

fn check_dims(image_id: &str, width: u32, height: u32) -> Result<(), DetectionError> {
    if width == 0 || height == 0 {
        return Err(DetectionError::invalid(
            image_id,
            None,
            format!("image size {width}x{height} must be positive"),
        ));
    }
    Ok(())
}

fn check_class(registry: &ClassRegistry, image_id: &str, index: usize, class: ClassId) -> Result<(), DetectionError> {
    if registry.get(class).is_none() {
        return Err(DetectionError::invalid(
            image_id,
            Some(index),
            format!("class {class} is not registered"),
        ));
    }
    Ok(())
}

/// Boxes may overflow the image by up to one image size on each side.
fn check_bounds(image_id: &str, index: usize, width: u32, height: u32, b: &BoundingBox) -> Result<(), DetectionError> {
    let (w, h) = (width as f64, height as f64);
    if b.x() < -w || b.y() < -h || b.right() > 2.0 * w || b.bottom() > 2.0 * h {
        return Err(DetectionError::invalid(
            image_id,
            Some(index),
            format!(
                "box ({}, {}, {}, {}) lies outside the admissible region of a {width}x{height} image",
                b.x(),
                b.y(),
                b.w(),
                b.h()
            ),
        ));
    }
    Ok(())
}

/// How box coordinates in a file are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoxFormat {
    /// `x, y` top-left corner, `w, h` extent, all in pixels.
    #[default]
    PixelTopLeft,
    /// `x, y` box center and `w, h` extent, all as fractions of the image size.
    NormalizedCenter,
}

// ---- wire format ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireDetection<'a> {
    class: std::borrow::Cow<'a, str>,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    conf: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireObject<'a> {
    class: std::borrow::Cow<'a, str>,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireImage<'a, T> {
    id: std::borrow::Cow<'a, str>,
    width: u32,
    height: u32,
    detections: Vec<T>,
}

#[derive(Serialize)]
struct WireGtImage<'a> {
    id: &'a str,
    width: u32,
    height: u32,
    objects: Vec<WireObject<'a>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireGtImageIn<'a> {
    #[serde(borrow)]
    id: std::borrow::Cow<'a, str>,
    width: u32,
    height: u32,
    objects: Vec<WireObject<'a>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireFile<T> {
    images: Vec<T>,
}

fn read_file(path: &Path) -> Result<String, DetectionError> {
    std::fs::read_to_string(path).map_err(|source| DetectionError::Io {
        path: path.to_owned(),
        source,
    })
}

fn parse_error(path: &Path, e: serde_json::Error) -> DetectionError {
    DetectionError::Parse {
        path: path.to_owned(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

#[allow(clippy::too_many_arguments)]
fn make_box(
    format: BoxFormat,
    image_id: &str,
    index: usize,
    width: u32,
    height: u32,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
) -> Result<BoundingBox, DetectionError> {
    let made = match format {
        BoxFormat::PixelTopLeft => BoundingBox::new(x, y, w, h),
        BoxFormat::NormalizedCenter => BoundingBox::from_normalized_center(x, y, w, h, width as f64, height as f64),
    };
    made.map_err(|e| DetectionError::invalid(image_id, Some(index), e.to_string()))
}

fn lookup(registry: &ClassRegistry, image_id: &str, index: usize, code: &str) -> Result<ClassId, DetectionError> {
    registry
        .by_code(code)
        .map(|c| c.id)
        .ok_or_else(|| DetectionError::invalid(image_id, Some(index), format!("unknown class '{code}'")))
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), DetectionError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(DetectionError::invalid(id, None, "duplicate image id"));
        }
    }
    Ok(())
}

/// Parses a detections document from a string.
pub fn parse_detections(
    text: &str,
    origin: &Path,
    registry: &ClassRegistry,
    format: BoxFormat,
) -> Result<Vec<DetectionSet>, DetectionError> {
    let file: WireFile<WireImage<'_, WireDetection<'_>>> =
        serde_json::from_str(text).map_err(|e| parse_error(origin, e))?;
    check_unique(file.images.iter().map(|i| i.id.as_ref()))?;
    file.images
        .into_iter()
        .map(|img| {
            let id = img.id.as_ref();
            check_dims(id, img.width, img.height)?;
            let detections = img
                .detections
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let class = lookup(registry, id, i, &d.class)?;
                    let bbox = make_box(format, id, i, img.width, img.height, d.x, d.y, d.w, d.h)?;
                    check_bounds(id, i, img.width, img.height, &bbox)?;
                    Detection::new(class, bbox, d.conf)
                        .map_err(|c| DetectionError::invalid(id, Some(i), format!("confidence {c} outside [0, 1]")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(DetectionSet {
                image_id: id.to_owned(),
                width: img.width,
                height: img.height,
                detections,
            })
        })
        .collect()
}

/// Parses a ground-truth document from a string.
pub fn parse_ground_truth(
    text: &str,
    origin: &Path,
    registry: &ClassRegistry,
    format: BoxFormat,
) -> Result<Vec<GroundTruthSet>, DetectionError> {
    let file: WireFile<WireGtImageIn<'_>> = serde_json::from_str(text).map_err(|e| parse_error(origin, e))?;
    check_unique(file.images.iter().map(|i| i.id.as_ref()))?;
    file.images
        .into_iter()
        .map(|img| {
            let id = img.id.as_ref();
            check_dims(id, img.width, img.height)?;
            let objects = img
                .objects
                .iter()
                .enumerate()
                .map(|(i, o)| {
                    let class = lookup(registry, id, i, &o.class)?;
                    let bbox = make_box(format, id, i, img.width, img.height, o.x, o.y, o.w, o.h)?;
                    check_bounds(id, i, img.width, img.height, &bbox)?;
                    Ok(GroundTruthObject { class, bbox })
                })
                .collect::<Result<Vec<_>, DetectionError>>()?;
            Ok(GroundTruthSet {
                image_id: id.to_owned(),
                width: img.width,
                height: img.height,
                objects,
            })
        })
        .collect()
}

/// Loads a detections file using the canonical class registry and
/// pixel top-left boxes.
pub fn load_detections(path: &Path) -> Result<Vec<DetectionSet>, DetectionError> {
    load_detections_with(path, &ClassRegistry::canonical(), BoxFormat::PixelTopLeft)
}

pub fn load_detections_with(
    path: &Path,
    registry: &ClassRegistry,
    format: BoxFormat,
) -> Result<Vec<DetectionSet>, DetectionError> {
    parse_detections(&read_file(path)?, path, registry, format)
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthSet>, DetectionError> {
    load_ground_truth_with(path, &ClassRegistry::canonical(), BoxFormat::PixelTopLeft)
}

pub fn load_ground_truth_with(
    path: &Path,
    registry: &ClassRegistry,
    format: BoxFormat,
) -> Result<Vec<GroundTruthSet>, DetectionError> {
    parse_ground_truth(&read_file(path)?, path, registry, format)
}

fn finish(mut text: String) -> String {
    text.push('\n');
    text
}

fn code_of<'a>(
    registry: &'a ClassRegistry,
    image_id: &str,
    index: usize,
    class: ClassId,
) -> Result<&'a str, DetectionError> {
    registry
        .code(class)
        .ok_or_else(|| DetectionError::invalid(image_id, Some(index), format!("class {class} is not registered")))
}

/// Canonical text of a detections document.
pub fn detections_to_string(sets: &[DetectionSet], registry: &ClassRegistry) -> Result<String, DetectionError> {
    let images = sets
        .iter()
        .map(|s| {
            s.validate(registry)?;
            let detections = s
                .detections
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    Ok(WireDetection {
                        class: code_of(registry, &s.image_id, i, d.class)?.into(),
                        x: d.bbox.x(),
                        y: d.bbox.y(),
                        w: d.bbox.w(),
                        h: d.bbox.h(),
                        conf: d.conf,
                    })
                })
                .collect::<Result<Vec<_>, DetectionError>>()?;
            Ok(WireImage {
                id: s.image_id.as_str().into(),
                width: s.width,
                height: s.height,
                detections,
            })
        })
        .collect::<Result<Vec<_>, DetectionError>>()?;
    Ok(finish(
        serde_json::to_string_pretty(&WireFile { images }).expect("detections serialize"),
    ))
}

/// Canonical text of a ground-truth document.
pub fn ground_truth_to_string(sets: &[GroundTruthSet], registry: &ClassRegistry) -> Result<String, DetectionError> {
    let images = sets
        .iter()
        .map(|s| {
            s.validate(registry)?;
            let objects = s
                .objects
                .iter()
                .enumerate()
                .map(|(i, o)| {
                    Ok(WireObject {
                        class: code_of(registry, &s.image_id, i, o.class)?.into(),
                        x: o.bbox.x(),
                        y: o.bbox.y(),
                        w: o.bbox.w(),
                        h: o.bbox.h(),
                    })
                })
                .collect::<Result<Vec<_>, DetectionError>>()?;
            Ok(WireGtImage {
                id: &s.image_id,
                width: s.width,
                height: s.height,
                objects,
            })
        })
        .collect::<Result<Vec<_>, DetectionError>>()?;
    Ok(finish(
        serde_json::to_string_pretty(&WireFile { images }).expect("ground truth serialize"),
    ))
}

pub fn save_detections(sets: &[DetectionSet], path: &Path) -> Result<(), DetectionError> {
    save_detections_with(sets, &ClassRegistry::canonical(), path)
}

pub fn save_detections_with(
    sets: &[DetectionSet],
    registry: &ClassRegistry,
    path: &Path,
) -> Result<(), DetectionError> {
    let text = detections_to_string(sets, registry)?;
    write_atomic(path, text.as_bytes()).map_err(|source| DetectionError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn save_ground_truth(sets: &[GroundTruthSet], path: &Path) -> Result<(), DetectionError> {
    save_ground_truth_with(sets, &ClassRegistry::canonical(), path)
}

pub fn save_ground_truth_with(
    sets: &[GroundTruthSet],
    registry: &ClassRegistry,
    path: &Path,
) -> Result<(), DetectionError> {
    let text = ground_truth_to_string(sets, registry)?;
    write_atomic(path, text.as_bytes()).map_err(|source| DetectionError::Io {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Vec<DetectionSet>, DetectionError> {
        parse_detections(
            text,
            Path::new("test.json"),
            &ClassRegistry::canonical(),
            BoxFormat::PixelTopLeft,
        )
    }

    #[test]
    fn registry_has_three_canonical_classes() {
        let reg = ClassRegistry::canonical();
        let names: Vec<_> = reg
            .classes()
            .iter()
            .map(|c| (c.code.as_str(), c.name.as_str()))
            .collect();
        assert_eq!(names, [("C1", "cracks"), ("C2", "corrosion"), ("C3", "overheating")]);
    }

    #[test]
    fn registry_rejects_duplicates() {
        let mut reg = ClassRegistry::canonical();
        assert!(matches!(
            reg.register(1, "C9", "x"),
            Err(DetectionError::DuplicateClassId(1))
        ));
        assert!(matches!(
            reg.register(9, "C1", "x"),
            Err(DetectionError::DuplicateClassCode(_))
        ));
        assert_eq!(reg.register(4, "C4", "erosion").unwrap(), ClassId(4));
        assert_eq!(reg.by_code("C4").unwrap().name, "erosion");
    }

    #[test]
    fn loads_single_detection() {
        let sets = parse(
            r#"{"images": [{"id": "img0", "width": 100, "height": 100,
                "detections": [{"class": "C1", "x": 10, "y": 20, "w": 30, "h": 40, "conf": 0.85}]}]}"#,
        )
        .unwrap();
        assert_eq!(sets.len(), 1);
        let d = sets[0].detections[0];
        assert_eq!(d.class(), CRACKS);
        assert_eq!(*d.bbox(), BoundingBox::new(10.0, 20.0, 30.0, 40.0).unwrap());
        assert_eq!(d.conf(), 0.85);
    }

    #[test]
    fn rejects_out_of_range_confidence() {
        let err = parse(
            r#"{"images": [{"id": "a", "width": 100, "height": 100,
                "detections": [{"class": "C1", "x": 1, "y": 1, "w": 3, "h": 3, "conf": 1.5}]}]}"#,
        )
        .unwrap_err();
        match err {
            DetectionError::Validation { image_id, index, .. } => {
                assert_eq!(image_id, "a");
                assert_eq!(index, Some(0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_class_and_bad_box() {
        let unknown = r#"{"images": [{"id": "a", "width": 10, "height": 10,
            "detections": [{"class": "C7", "x": 1, "y": 1, "w": 3, "h": 3, "conf": 0.5}]}]}"#;
        assert!(matches!(parse(unknown), Err(DetectionError::Validation { .. })));
        let flat = r#"{"images": [{"id": "a", "width": 10, "height": 10,
            "detections": [{"class": "C1", "x": 1, "y": 1, "w": 0, "h": 3, "conf": 0.5}]}]}"#;
        assert!(matches!(parse(flat), Err(DetectionError::Validation { .. })));
        let far = r#"{"images": [{"id": "a", "width": 10, "height": 10,
            "detections": [{"class": "C1", "x": 25, "y": 1, "w": 3, "h": 3, "conf": 0.5}]}]}"#;
        assert!(matches!(parse(far), Err(DetectionError::Validation { .. })));
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = parse("{\"images\": [\n  {\"id\": \"a\",,}\n]}").unwrap_err();
        match err {
            DetectionError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_image_ids_rejected() {
        let text = r#"{"images": [{"id": "a", "width": 10, "height": 10, "detections": []},
                                  {"id": "a", "width": 10, "height": 10, "detections": []}]}"#;
        assert!(parse(text).is_err());
    }

    #[test]
    fn empty_document() {
        let text = detections_to_string(&[], &ClassRegistry::canonical()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v, serde_json::json!({"images": []}));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn normalized_center_ingest() {
        let sets = parse_detections(
            r#"{"images": [{"id": "a", "width": 100, "height": 200,
                "detections": [{"class": "C2", "x": 0.5, "y": 0.5, "w": 0.5, "h": 0.5, "conf": 0.5}]}]}"#,
            Path::new("t"),
            &ClassRegistry::canonical(),
            BoxFormat::NormalizedCenter,
        )
        .unwrap();
        assert_eq!(
            *sets[0].detections[0].bbox(),
            BoundingBox::new(25.0, 50.0, 50.0, 100.0).unwrap()
        );
    }

    #[test]
    fn ground_truth_has_no_conf() {
        let gt = parse_ground_truth(
            r#"{"images": [{"id": "a", "width": 10, "height": 10,
                "objects": [{"class": "C3", "x": 1, "y": 1, "w": 3, "h": 3}]}]}"#,
            Path::new("t"),
            &ClassRegistry::canonical(),
            BoxFormat::PixelTopLeft,
        )
        .unwrap();
        assert_eq!(gt[0].objects[0].class, OVERHEATING);
        let text = ground_truth_to_string(&gt, &ClassRegistry::canonical()).unwrap();
        assert!(text.contains("\"objects\""));
        assert!(!text.contains("conf"));
    }

    fn arb_sets() -> impl Strategy<Value = Vec<DetectionSet>> {
        let det = (
            1u16..=3,
            0.0..90.0f64,
            0.0..90.0f64,
            0.001..50.0f64,
            0.001..50.0f64,
            0.0..=1.0f64,
        )
            .prop_map(|(c, x, y, w, h, p)| {
                Detection::new(ClassId(c), BoundingBox::new(x, y, w, h).unwrap(), p).unwrap()
            });
        prop::collection::vec(prop::collection::vec(det, 0..6), 0..4).prop_map(|imgs| {
            imgs.into_iter()
                .enumerate()
                .map(|(i, detections)| DetectionSet {
                    image_id: format!("img{i}"),
                    width: 100,
                    height: 100,
                    detections,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn save_load_roundtrip_is_exact(sets in arb_sets()) {
            let reg = ClassRegistry::canonical();
            let text = detections_to_string(&sets, &reg).unwrap();
            let back = parse_detections(&text, Path::new("t"), &reg, BoxFormat::PixelTopLeft).unwrap();
            prop_assert_eq!(&back, &sets);
            prop_assert_eq!(detections_to_string(&back, &reg).unwrap(), text);
        }
    }
}
