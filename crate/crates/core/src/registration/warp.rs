//! Inverse-mapping warps with bilinear sampling.

use rayon::prelude::*;

use super::homography::{Homography, Point2};
use super::raster::{Depth, Raster, Samples};

/// Resamples `src` onto an `out_w x out_h` grid.
///
/// `h` maps output coordinates to source coordinates. Pixel centres sit at
/// `(i + 0.5, j + 0.5)`, so output pixel `(x, y)` reads the source at
/// `h(x + 0.5, y + 0.5) - 0.5` with bilinear interpolation. Neighbours
/// outside the source, and output pixels whose preimage lies at infinity,
/// take `fill`. Results are rounded half away from zero and clamped to the
/// sample range; depth and channel count are preserved.
pub fn warp(src: &Raster, h: &Homography, out_w: usize, out_h: usize, fill: f64) -> Raster {
    let ch = src.channels();
    let max = src.depth().max_value();
    let fill = fill.clamp(0.0, max);
    let row_len = out_w * ch;
    let mut values = vec![0.0f64; out_h * row_len];

    values.par_chunks_mut(row_len.max(1)).enumerate().for_each(|(y, row)| {
        for x in 0..out_w {
            let out = &mut row[x * ch..(x + 1) * ch];
            match h.apply(Point2::new(x as f64 + 0.5, y as f64 + 0.5)) {
                Ok(p) => sample_bilinear(src, p.x - 0.5, p.y - 0.5, fill, out),
                Err(_) => out.fill(fill),
            }
        }
    });

    let quantize = |v: f64| v.round().clamp(0.0, max);
    let samples = match src.depth() {
        Depth::Eight => Samples::U8(values.iter().map(|&v| quantize(v) as u8).collect()),
        Depth::Sixteen => Samples::U16(values.iter().map(|&v| quantize(v) as u16).collect()),
    };
    Raster::new(out_w, out_h, ch, samples).expect("warp output layout")
}

fn sample_bilinear(src: &Raster, sx: f64, sy: f64, fill: f64, out: &mut [f64]) {
    if !(sx.is_finite() && sy.is_finite()) {
        out.fill(fill);
        return;
    }
    let (x0, y0) = (sx.floor(), sy.floor());
    let (fx, fy) = (sx - x0, sy - y0);
    let (w, h) = (src.width() as f64, src.height() as f64);
    let taps = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1.0, y0, fx * (1.0 - fy)),
        (x0, y0 + 1.0, (1.0 - fx) * fy),
        (x0 + 1.0, y0 + 1.0, fx * fy),
    ];
    for (c, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for &(tx, ty, wt) in &taps {
            if wt == 0.0 {
                continue;
            }
            let v = if tx >= 0.0 && ty >= 0.0 && tx < w && ty < h {
                src.get(tx as usize, ty as usize, c)
            } else {
                fill
            };
            acc += wt * v;
        }
        *o = acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_warp_is_exact() {
        let data: Vec<u8> = (0..60).map(|i| (i * 37 % 256) as u8).collect();
        let src = Raster::rgb8(5, 4, data).unwrap();
        assert_eq!(warp(&src, &Homography::identity(), 5, 4, 0.0), src);
        let src16 = Raster::gray16(3, 2, vec![0, 65535, 1234, 4321, 7, 60000]).unwrap();
        assert_eq!(warp(&src16, &Homography::identity(), 3, 2, 0.0), src16);
    }

    #[test]
    fn integer_translation() {
        let src = Raster::gray8(3, 1, vec![10, 20, 30]).unwrap();
        // output x reads source x - 1
        let out = warp(&src, &Homography::translation(-1.0, 0.0), 3, 1, 0.0);
        assert_eq!(out.samples(), &Samples::U8(vec![0, 10, 20]));
    }

    #[test]
    fn half_pixel_shift_interpolates() {
        let src = Raster::gray8(3, 1, vec![10, 20, 30]).unwrap();
        let out = warp(&src, &Homography::translation(0.5, 0.0), 3, 1, 0.0);
        // 15, 25, then half of 30 blended with fill 0
        assert_eq!(out.samples(), &Samples::U8(vec![15, 25, 15]));
    }

    #[test]
    fn fill_outside_source() {
        let src = Raster::gray8(2, 2, vec![1, 2, 3, 4]).unwrap();
        let out = warp(&src, &Homography::translation(100.0, 0.0), 2, 2, 9.0);
        assert_eq!(out.samples(), &Samples::U8(vec![9; 4]));
    }
}
