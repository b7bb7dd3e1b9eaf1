//! In-memory images and binary PGM/PPM files.

use std::path::Path;

use thiserror::Error;

/// Sample storage. 16-bit samples are only used for single-channel data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Samples {
    U8(Vec<u8>),
    U16(Vec<u16>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::U8(v) => v.len(),
            Samples::U16(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    Eight,
    Sixteen,
}

impl Depth {
    pub fn max_value(self) -> f64 {
        match self {
            Depth::Eight => 255.0,
            Depth::Sixteen => 65535.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RasterError {
    #[error("sample count {actual} does not match {width}x{height}x{channels}")]
    SizeMismatch {
        width: usize,
        height: usize,
        channels: usize,
        actual: usize,
    },
    #[error("unsupported layout: {0}")]
    Unsupported(String),
}

/// Row-major, channel-interleaved image with 1 (thermal) or 3 (RGB)
/// channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    samples: Samples,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, samples: Samples) -> Result<Self, RasterError> {
        if channels != 1 && channels != 3 {
            return Err(RasterError::Unsupported(format!("{channels} channels")));
        }
        if channels == 3 && matches!(samples, Samples::U16(_)) {
            return Err(RasterError::Unsupported("16-bit RGB".into()));
        }
        let expected = width * height * channels;
        if samples.len() != expected {
            return Err(RasterError::SizeMismatch {
                width,
                height,
                channels,
                actual: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn gray8(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        Self::new(width, height, 1, Samples::U8(data))
    }

    pub fn gray16(width: usize, height: usize, data: Vec<u16>) -> Result<Self, RasterError> {
        Self::new(width, height, 1, Samples::U16(data))
    }

    pub fn rgb8(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        Self::new(width, height, 3, Samples::U8(data))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn depth(&self) -> Depth {
        match self.samples {
            Samples::U8(_) => Depth::Eight,
            Samples::U16(_) => Depth::Sixteen,
        }
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    pub fn into_samples(self) -> Samples {
        self.samples
    }

    /// Sample at column `x`, row `y`, channel `c`.
    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        let i = (y * self.width + x) * self.channels + c;
        match &self.samples {
            Samples::U8(v) => v[i] as f64,
            Samples::U16(v) => v[i] as f64,
        }
    }

    /// Smallest and largest sample over all channels.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        fn mm<T: Copy + Ord + Into<f64>>(v: &[T]) -> Option<(f64, f64)> {
            let lo = v.iter().copied().min()?;
            let hi = v.iter().copied().max()?;
            Some((lo.into(), hi.into()))
        }
        match &self.samples {
            Samples::U8(v) => mm(v),
            Samples::U16(v) => mm(v),
        }
    }
}

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a binary PGM/PPM file (magic {0:?})")]
    BadMagic(String),
    #[error("truncated header")]
    TruncatedHeader,
    #[error("invalid header field '{0}'")]
    BadHeader(String),
    #[error("unsupported maxval {0} (expected 255, or 65535 for PGM)")]
    UnsupportedMaxval(u32),
    #[error("pixel data too short: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

fn header_tokens(data: &[u8], count: usize) -> Result<(Vec<&[u8]>, usize), PnmError> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        // skip whitespace and comments
        loop {
            match data.get(i) {
                Some(b) if b.is_ascii_whitespace() => i += 1,
                Some(b'#') => {
                    while data.get(i).is_some_and(|&b| b != b'\n' && b != b'\r') {
                        i += 1;
                    }
                }
                Some(_) => break,
                None => return Err(PnmError::TruncatedHeader),
            }
        }
        let start = i;
        while data.get(i).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            i += 1;
        }
        tokens.push(&data[start..i]);
    }
    // exactly one whitespace byte separates maxval from the raster
    match data.get(i) {
        Some(b) if b.is_ascii_whitespace() => Ok((tokens, i + 1)),
        _ => Err(PnmError::TruncatedHeader),
    }
}

fn number(token: &[u8]) -> Result<u32, PnmError> {
    let text = std::str::from_utf8(token).map_err(|_| PnmError::BadHeader(format!("{token:?}")))?;
    text.parse().map_err(|_| PnmError::BadHeader(text.to_owned()))
}

/// Decodes P5 (maxval 255 or 65535, big-endian 16-bit) or P6 (maxval 255).
pub fn decode_pnm(data: &[u8]) -> Result<Raster, PnmError> {
    let (tokens, offset) = header_tokens(data, 4)?;
    let channels = match tokens[0] {
        b"P5" => 1,
        b"P6" => 3,
        other => return Err(PnmError::BadMagic(String::from_utf8_lossy(other).into_owned())),
    };
    let width = number(tokens[1])? as usize;
    let height = number(tokens[2])? as usize;
    let maxval = number(tokens[3])?;
    let body = &data[offset..];
    let count = width * height * channels;
    match (maxval, channels) {
        (255, _) => {
            if body.len() < count {
                return Err(PnmError::TruncatedData {
                    expected: count,
                    found: body.len(),
                });
            }
            Ok(Raster::new(
                width,
                height,
                channels,
                Samples::U8(body[..count].to_vec()),
            )?)
        }
        (65535, 1) => {
            if body.len() < 2 * count {
                return Err(PnmError::TruncatedData {
                    expected: 2 * count,
                    found: body.len(),
                });
            }
            let samples = body[..2 * count]
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]))
                .collect();
            Ok(Raster::new(width, height, 1, Samples::U16(samples))?)
        }
        (m, _) => Err(PnmError::UnsupportedMaxval(m)),
    }
}

/// Encodes with a minimal header: `P5|P6\n<w> <h>\n<maxval>\n`.
pub fn encode_pnm(raster: &Raster) -> Vec<u8> {
    let magic = if raster.channels() == 3 { "P6" } else { "P5" };
    let maxval = raster.depth().max_value() as u32;
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", raster.width(), raster.height()).into_bytes();
    match raster.samples() {
        Samples::U8(v) => out.extend_from_slice(v),
        Samples::U16(v) => out.extend(v.iter().flat_map(|s| s.to_be_bytes())),
    }
    out
}

pub fn read_pnm(path: &Path) -> Result<Raster, PnmError> {
    let data = std::fs::read(path).map_err(|source| PnmError::Io {
        path: path.to_owned(),
        source,
    })?;
    decode_pnm(&data)
}

pub fn write_pnm(raster: &Raster, path: &Path) -> Result<(), PnmError> {
    crate::io::write_atomic(path, &encode_pnm(raster)).map_err(|source| PnmError::Io {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_validation() {
        assert!(Raster::gray8(2, 2, vec![0; 3]).is_err());
        assert!(Raster::new(1, 1, 3, Samples::U16(vec![0; 3])).is_err());
        assert!(Raster::new(1, 1, 2, Samples::U8(vec![0; 2])).is_err());
    }

    #[test]
    fn header_with_comments() {
        let mut data = b"P5\n# made by hand\n3 1 # width height\n255\n".to_vec();
        data.extend([10, 20, 30]);
        let r = decode_pnm(&data).unwrap();
        assert_eq!(r, Raster::gray8(3, 1, vec![10, 20, 30]).unwrap());
    }

    #[test]
    fn sixteen_bit_is_big_endian() {
        let mut data = b"P5 2 1 65535\n".to_vec();
        data.extend([0x01, 0x02, 0xff, 0x00]);
        let r = decode_pnm(&data).unwrap();
        assert_eq!(r.samples(), &Samples::U16(vec![0x0102, 0xff00]));
        assert_eq!(encode_pnm(&r)[encode_pnm(&r).len() - 4..], [0x01, 0x02, 0xff, 0x00]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(decode_pnm(b"P3\n1 1\n255\n1 2 3"), Err(PnmError::BadMagic(_))));
        assert!(matches!(
            decode_pnm(b"P6\n1 1\n65535\n"),
            Err(PnmError::UnsupportedMaxval(65535))
        ));
        assert!(matches!(
            decode_pnm(b"P6\n2 1\n255\n\x01\x02"),
            Err(PnmError::TruncatedData { .. })
        ));
        assert!(matches!(decode_pnm(b"P5\n2"), Err(PnmError::TruncatedHeader)));
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip(w in 1usize..6, h in 1usize..6, rgb in any::<bool>(), seed in any::<u8>()) {
            let ch = if rgb { 3 } else { 1 };
            let data: Vec<u8> = (0..w * h * ch).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
            let r = Raster::new(w, h, ch, Samples::U8(data)).unwrap();
            prop_assert_eq!(decode_pnm(&encode_pnm(&r)).unwrap(), r);
        }
    }
}
