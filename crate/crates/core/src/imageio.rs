//! Grayscale image and raw float map I/O.
//!
//! Supported inputs: binary/ASCII PGM (`P5`/`P2`, 8- or 16-bit), grayscale
//! PNG, and the `SCF1` raw float format. Maps are written as 8-bit `P5` PGM
//! (or PNG, chosen by extension) after min-max normalisation, or as `SCF1`
//! when bit-exact values are needed.
//!
//! `SCF1` layout: magic `b"SCF1"`, height and width as little-endian `u32`,
//! four zero bytes, then `height * width` little-endian IEEE-754 `f64`
//! values in row-major order.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{FieldMap, GridDims, LabelMap, ProbabilityMap};

pub const SCF_MAGIC: &[u8; 4] = b"SCF1";
const SCF_HEADER_LEN: usize = 16;

/// Decoded grayscale image with its native sample range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub dims: GridDims,
    pub maxval: u16,
    pub levels: Vec<u16>,
}

impl GrayImage {
    pub fn from_u8(dims: GridDims, levels: &[u8]) -> Self {
        GrayImage {
            dims,
            maxval: 255,
            levels: levels.iter().map(|&v| u16::from(v)).collect(),
        }
    }

    pub fn to_probabilities(&self) -> Result<ProbabilityMap> {
        let max = f64::from(self.maxval);
        ProbabilityMap::new(
            self.dims,
            self.levels.iter().map(|&v| f64::from(v) / max).collect(),
        )
    }

    /// Binarises at `level > threshold * maxval`. Without a threshold the
    /// midpoint is used (`> 127` for 8-bit images).
    pub fn to_labels(&self, threshold: Option<f64>, strict: bool) -> Result<LabelMap> {
        if strict {
            if let Some(index) = self
                .levels
                .iter()
                .position(|&v| v != 0 && v != self.maxval)
            {
                return Err(Error::ValueOutOfRange {
                    index,
                    value: f64::from(self.levels[index]),
                    range: "{0, maxval} (ground truth must be binary)",
                });
            }
        }
        let cut = match threshold {
            Some(t) => t * f64::from(self.maxval),
            None => f64::from(self.maxval / 2),
        };
        LabelMap::binary(
            self.dims,
            self.levels
                .iter()
                .map(|&v| u32::from(f64::from(v) > cut))
                .collect(),
        )
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default()
}

fn is_scf(path: &Path) -> bool {
    matches!(extension(path).as_str(), "scf" | "scf1" | "f64")
}

pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        return decode_pgm(&bytes).map_err(|m| Error::format(path, m));
    }
    decode_png(&bytes).map_err(|m| Error::format(path, m))
}

/// Probability map from a grayscale image (`v / maxval`) or an `SCF1` file.
pub fn read_probability_map(path: &Path) -> Result<ProbabilityMap> {
    if is_scf(path) {
        let field = read_scf(path)?;
        return ProbabilityMap::new(field.dims(), field.into_values());
    }
    read_gray(path)?.to_probabilities()
}

pub fn read_label_map(path: &Path, threshold: Option<f64>, strict: bool) -> Result<LabelMap> {
    read_gray(path)?.to_labels(threshold, strict)
}

fn decode_png(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| e.to_string())?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let dims = GridDims::new(height, width).map_err(|e| e.to_string())?;
    let sixteen = matches!(
        img.color(),
        image::ColorType::L16 | image::ColorType::La16 | image::ColorType::Rgb16 | image::ColorType::Rgba16
    );
    Ok(if sixteen {
        GrayImage {
            dims,
            maxval: u16::MAX,
            levels: img.into_luma16().into_raw(),
        }
    } else {
        GrayImage::from_u8(dims, &img.into_luma8().into_raw())
    })
}

/// Header tokens of a PNM file: whitespace separated, `#` comments to end of line.
struct PnmTokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PnmTokens<'a> {
    fn next_token(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'#') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn next_number(&mut self, what: &str) -> std::result::Result<usize, String> {
        let tok = self
            .next_token()
            .ok_or_else(|| format!("truncated PGM header: missing {what}"))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("invalid {what} in PGM header"))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut tokens = PnmTokens { bytes, pos: 0 };
    let magic = tokens.next_token().ok_or("empty file")?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err("not a PGM file (expected P5 or P2)".into()),
    };
    let width = tokens.next_number("width")?;
    let height = tokens.next_number("height")?;
    let maxval = tokens.next_number("maxval")?;
    if maxval == 0 || maxval > u16::MAX as usize {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    let dims = GridDims::new(height, width).map_err(|e| e.to_string())?;
    let n = dims.len();
    let levels: Vec<u16> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = tokens.pos + 1;
        let wide = maxval > 255;
        let need = n * if wide { 2 } else { 1 };
        let raster = bytes
            .get(start..start + need)
            .ok_or_else(|| format!("truncated raster: need {need} bytes"))?;
        if wide {
            raster
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        } else {
            raster.iter().map(|&v| u16::from(v)).collect()
        }
    } else {
        (0..n)
            .map(|_| tokens.next_number("sample").map(|v| v as u16))
            .collect::<std::result::Result<_, _>>()?
    };
    if let Some(v) = levels.iter().find(|&&v| usize::from(v) > maxval) {
        return Err(format!("sample {v} exceeds maxval {maxval}"));
    }
    Ok(GrayImage {
        dims,
        maxval: maxval as u16,
        levels,
    })
}

/// 8-bit binary PGM bytes.
pub fn encode_pgm(dims: GridDims, levels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", dims.width, dims.height).into_bytes();
    out.extend_from_slice(levels);
    out
}

pub fn write_gray8(path: &Path, dims: GridDims, levels: &[u8]) -> Result<()> {
    if extension(path) == "png" {
        let img = image::GrayImage::from_raw(dims.width as u32, dims.height as u32, levels.to_vec())
            .expect("buffer matches dims");
        return img.save(path).map_err(|e| Error::format(path, e.to_string()));
    }
    fs::write(path, encode_pgm(dims, levels)).map_err(|e| Error::io(path, e))
}

/// Display scale applied by [`normalize_u8`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Scale {
    pub min: f64,
    pub max: f64,
}

/// Min-max normalises a field to `0..=255`. A flat field maps to zero.
pub fn normalize_u8(field: &FieldMap) -> (Vec<u8>, Scale) {
    let (min, max) = field.min_max();
    (normalize_with(field, Scale { min, max }), Scale { min, max })
}

/// Normalises with an externally chosen scale, clipping outside values.
pub fn normalize_with(field: &FieldMap, scale: Scale) -> Vec<u8> {
    let span = scale.max - scale.min;
    field
        .values()
        .iter()
        .map(|&v| {
            if span > 0.0 {
                (((v - scale.min) / span).clamp(0.0, 1.0) * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect()
}

/// Probabilities scaled by 255 and rounded.
pub fn probabilities_u8(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

pub fn encode_scf(field: &FieldMap) -> Vec<u8> {
    let dims = field.dims();
    let mut out = Vec::with_capacity(SCF_HEADER_LEN + 8 * dims.len());
    out.extend_from_slice(SCF_MAGIC);
    out.extend_from_slice(&(dims.height as u32).to_le_bytes());
    out.extend_from_slice(&(dims.width as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_scf(bytes: &[u8]) -> std::result::Result<FieldMap, String> {
    if bytes.len() < SCF_HEADER_LEN || &bytes[..4] != SCF_MAGIC {
        return Err("not an SCF1 file".into());
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (height, width) = (word(4), word(8));
    if bytes[12..16] != [0; 4] {
        return Err("SCF1 padding bytes must be zero".into());
    }
    let dims = GridDims::new(height, width).map_err(|e| e.to_string())?;
    let body = &bytes[SCF_HEADER_LEN..];
    if body.len() != 8 * dims.len() {
        return Err(format!(
            "SCF1 body has {} bytes, expected {} for {dims}",
            body.len(),
            8 * dims.len()
        ));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FieldMap::new(dims, values).map_err(|e| e.to_string())
}

pub fn read_scf(path: &Path) -> Result<FieldMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_scf(&bytes).map_err(|m| Error::format(path, m))
}

pub fn write_scf(path: &Path, field: &FieldMap) -> Result<()> {
    fs::write(path, encode_scf(field)).map_err(|e| Error::io(path, e))
}

/// Writes `field` raw (`SCF1`) or as a normalised 8-bit image; returns the
/// display scale used (identity range for raw output).
pub fn write_field(path: &Path, field: &FieldMap, raw: bool) -> Result<Scale> {
    if raw {
        write_scf(path, field)?;
        let (min, max) = field.min_max();
        return Ok(Scale { min, max });
    }
    let (levels, scale) = normalize_u8(field);
    write_gray8(path, field.dims(), &levels)?;
    Ok(scale)
}
