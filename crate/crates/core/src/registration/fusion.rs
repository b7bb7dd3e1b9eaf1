//! Per-pixel fusion of a visible image with an aligned thermal image.

use rayon::prelude::*;

use super::colormap::Colormap;
use super::raster::{Raster, Samples};
use super::RegistrationError;

/// How thermal samples are brought to `[0, 1]` before fusion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum IrNormalization {
    /// Per-image min-max; a constant image maps to 0.
    #[default]
    MinMax,
    /// `(v - lo) / (hi - lo)` clamped to `[0, 1]`.
    Fixed { lo: f64, hi: f64 },
}

/// A pixel fusion function: visible RGB (0..=255) and normalized thermal
/// value in, RGB on the 0..=255 scale out. Learned or otherwise custom
/// fusion plugs in here.
pub trait PixelFusion: Sync {
    fn fuse(&self, rgb: [f64; 3], ir: f64) -> [f64; 3];
}

/// `weight * rgb + (1 - weight) * colormap(ir)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedBlend {
    pub weight: f64,
    pub colormap: Colormap,
}

impl PixelFusion for WeightedBlend {
    #[inline]
    fn fuse(&self, rgb: [f64; 3], ir: f64) -> [f64; 3] {
        let c = self.colormap.map(ir);
        let w = self.weight;
        [
            w * rgb[0] + (1.0 - w) * c[0],
            w * rgb[1] + (1.0 - w) * c[1],
            w * rgb[2] + (1.0 - w) * c[2],
        ]
    }
}

fn normalizer(ir: &Raster, mode: IrNormalization) -> Result<impl Fn(f64) -> f64 + Sync, RegistrationError> {
    let (lo, hi) = match mode {
        IrNormalization::MinMax => ir.min_max().unwrap_or((0.0, 0.0)),
        IrNormalization::Fixed { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(RegistrationError::InvalidParameter(format!(
                    "fixed thermal range [{lo}, {hi}]"
                )));
            }
            (lo, hi)
        }
    };
    let span = hi - lo;
    Ok(move |v: f64| {
        if span > 0.0 {
            ((v - lo) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    })
}

/// Fuses with an arbitrary [`PixelFusion`]. Output is always 8-bit RGB,
/// rounded half away from zero and clamped.
pub fn fuse_images_with<F: PixelFusion>(
    rgb: &Raster,
    ir: &Raster,
    normalization: IrNormalization,
    fusion: &F,
) -> Result<Raster, RegistrationError> {
    if rgb.channels() != 3 || ir.channels() != 1 {
        return Err(RegistrationError::DimensionMismatch(format!(
            "expected 3-channel visible and 1-channel thermal images, got {} and {}",
            rgb.channels(),
            ir.channels()
        )));
    }
    if (rgb.width(), rgb.height()) != (ir.width(), ir.height()) {
        return Err(RegistrationError::DimensionMismatch(format!(
            "visible {}x{} vs thermal {}x{}",
            rgb.width(),
            rgb.height(),
            ir.width(),
            ir.height()
        )));
    }
    let norm = normalizer(ir, normalization)?;
    let width = rgb.width();
    let mut out = vec![0u8; width * rgb.height() * 3];
    out.par_chunks_mut((width * 3).max(1)).enumerate().for_each(|(y, row)| {
        for x in 0..width {
            let px = [rgb.get(x, y, 0), rgb.get(x, y, 1), rgb.get(x, y, 2)];
            let fused = fusion.fuse(px, norm(ir.get(x, y, 0)));
            for c in 0..3 {
                row[x * 3 + c] = fused[c].round().clamp(0.0, 255.0) as u8;
            }
        }
    });
    Ok(Raster::new(width, rgb.height(), 3, Samples::U8(out)).expect("fusion output layout"))
}

/// Weighted blend of the visible image with the colour-mapped thermal image.
pub fn fuse_images(
    rgb: &Raster,
    ir: &Raster,
    weight: f64,
    colormap: Colormap,
    normalization: IrNormalization,
) -> Result<Raster, RegistrationError> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(RegistrationError::InvalidParameter(format!(
            "weight {weight} outside [0, 1]"
        )));
    }
    fuse_images_with(rgb, ir, normalization, &WeightedBlend { weight, colormap })
}
