//! File formats: binary PGM/PPM (8-bit), the `IAQT` raw tensor, and the
//! importance-map JSON document.
//!
//! `IAQT` layout: `b"IAQT"`, then `H`, `W`, `C` as little-endian `u32`, then
//! `H·W·C` little-endian `f32` values in `(row, col, channel)` order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{IaqError, Result};
use crate::model::{ImageTensor, ImportanceMap};

pub const RAW_MAGIC: &[u8; 4] = b"IAQT";

/// Decodes a PGM (P5), PPM (P6) or raw tensor from bytes, sniffing the magic.
pub fn decode_image(bytes: &[u8]) -> Result<ImageTensor> {
    if bytes.starts_with(RAW_MAGIC) {
        decode_raw(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else {
        Err(IaqError::InvalidImage("unrecognized image magic".into()))
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    decode_image(&fs::read(path)?)
}

/// Writes `.pgm`/`.ppm` as 8-bit PNM (values rounded and clamped to 0..=255),
/// anything else as a raw tensor.
pub fn write_image(path: impl AsRef<Path>, image: &ImageTensor) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let bytes = match ext.as_deref() {
        Some("pgm") | Some("ppm") | Some("pnm") => encode_pnm(image)?,
        _ => encode_raw(image),
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn decode_raw(bytes: &[u8]) -> Result<ImageTensor> {
    if bytes.len() < 16 || &bytes[..4] != RAW_MAGIC {
        return Err(IaqError::InvalidImage("raw tensor header too short".into()));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let count = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| IaqError::InvalidImage("raw tensor dimensions overflow".into()))?;
    let body = &bytes[16..];
    if body.len() != count * 4 {
        return Err(IaqError::InvalidImage(format!(
            "raw tensor body has {} bytes, expected {}",
            body.len(),
            count * 4
        )));
    }
    let pixels = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    ImageTensor::new(h, w, c, pixels)
}

pub fn encode_raw(image: &ImageTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * image.len());
    out.extend_from_slice(RAW_MAGIC);
    for d in [image.height(), image.width(), image.channels()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for p in image.pixels() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_pnm(bytes: &[u8]) -> Result<ImageTensor> {
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(IaqError::InvalidImage("not a binary PGM/PPM".into())),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IaqError::InvalidImage("malformed PNM header".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(IaqError::InvalidImage(format!(
            "only 8-bit PNM is supported (maxval {maxval})"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(IaqError::InvalidImage("malformed PNM header".into()));
    }
    pos += 1;
    let count = width * height * channels;
    let raster = bytes
        .get(pos..pos + count)
        .ok_or_else(|| IaqError::InvalidImage("PNM raster truncated".into()))?;
    ImageTensor::new(
        height,
        width,
        channels,
        raster.iter().map(|&b| f32::from(b)).collect(),
    )
}

pub fn encode_pnm(image: &ImageTensor) -> Result<Vec<u8>> {
    let magic = match image.channels() {
        1 => "P5",
        3 => "P6",
        c => {
            return Err(IaqError::InvalidImage(format!(
                "PNM output needs 1 or 3 channels, image has {c}"
            )))
        }
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.pixels().iter().map(|p| p.round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

/// On-disk importance map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceFile {
    pub n_patches: usize,
    pub grid: [usize; 2],
    pub scores: Vec<f64>,
}

impl ImportanceFile {
    pub fn into_map(self) -> Result<ImportanceMap> {
        if self.scores.len() != self.n_patches {
            return Err(IaqError::InvalidImportanceMap(format!(
                "n_patches = {} but {} scores given",
                self.n_patches,
                self.scores.len()
            )));
        }
        ImportanceMap::new(self.grid[0], self.grid[1], self.scores)
    }

    pub fn from_map(map: &ImportanceMap) -> Self {
        let (rows, cols) = map.grid();
        Self {
            n_patches: map.len(),
            grid: [rows, cols],
            scores: map.scores().to_vec(),
        }
    }
}

pub fn parse_importance(json: &str) -> Result<ImportanceMap> {
    serde_json::from_str::<ImportanceFile>(json)?.into_map()
}

pub fn read_importance(path: impl AsRef<Path>) -> Result<ImportanceMap> {
    parse_importance(&fs::read_to_string(path)?)
}

pub fn write_importance(path: impl AsRef<Path>, map: &ImportanceMap) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(&ImportanceFile::from_map(map))?)?;
    Ok(())
}
