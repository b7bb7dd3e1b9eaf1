//! Thermal-to-visible registration and image fusion.
//!
//! The visible frame is the reference. A homography estimated from point
//! correspondences maps visible pixel coordinates into the thermal frame;
//! [`warp`] resamples the thermal image onto the visible grid, and
//! [`fuse_images`] blends the two.

mod colormap;
mod fusion;
mod homography;
mod raster;
mod warp;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use colormap::Colormap;
pub use fusion::{fuse_images, fuse_images_with, IrNormalization, PixelFusion, WeightedBlend};
pub use homography::{
    dlt, estimate_homography, ransac, Correspondence, Homography, Point2, RansacParams, COLLINEAR_AREA,
    MIN_DENOMINATOR, MIN_DETERMINANT,
};
pub use raster::{decode_pnm, encode_pnm, read_pnm, write_pnm, Depth, PnmError, Raster, RasterError, Samples};
pub use warp::warp;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistrationError {
    #[error("at least 4 correspondences are required, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("RANSAC found no consensus set (best had {inliers} inliers)")]
    NoConsensus { inliers: usize },
    #[error("point ({x}, {y}) maps to infinity")]
    PointAtInfinity { x: f64, y: f64 },
    #[error("singular homography: {0}")]
    Singular(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Failures reading or writing correspondence and homography files.
#[derive(Debug, Error)]
pub enum RegistrationFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct CsvRow {
    src_x: f64,
    src_y: f64,
    dst_x: f64,
    dst_y: f64,
}

/// Reads a `src_x,src_y,dst_x,dst_y` CSV file.
pub fn read_correspondences(path: &Path) -> Result<Vec<Correspondence>, RegistrationFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| RegistrationFileError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_correspondences(&text).map_err(|message| RegistrationFileError::Format {
        path: path.to_owned(),
        message,
    })
}

pub fn parse_correspondences(text: &str) -> Result<Vec<Correspondence>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().collect::<Vec<_>>() != ["src_x", "src_y", "dst_x", "dst_y"] {
        return Err(format!(
            "expected header src_x,src_y,dst_x,dst_y, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        ));
    }
    reader
        .deserialize::<CsvRow>()
        .map(|row| {
            let r = row.map_err(|e| e.to_string())?;
            Ok(Correspondence::new((r.src_x, r.src_y), (r.dst_x, r.dst_y)))
        })
        .collect()
}

pub fn read_homography(path: &Path) -> Result<Homography, RegistrationFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| RegistrationFileError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| RegistrationFileError::Format {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

/// Canonical `{"h": [[...], [...], [...]]}` text, newline-terminated.
pub fn homography_to_json(h: &Homography) -> String {
    let mut text = serde_json::to_string_pretty(h).expect("homography serialize");
    text.push('\n');
    text
}

pub fn write_homography(h: &Homography, path: &Path) -> Result<(), RegistrationFileError> {
    crate::io::write_atomic(path, homography_to_json(h).as_bytes()).map_err(|source| RegistrationFileError::Io {
        path: path.to_owned(),
        source,
    })
}
