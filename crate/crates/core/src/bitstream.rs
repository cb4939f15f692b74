//! Image-level quantization into a [`Bitstream`] and the `IAQB` container.
//!
//! Container layout (integers little-endian):
//!
//! | field        | type            |
//! |--------------|-----------------|
//! | magic        | `b"IAQB"`       |
//! | version      | `u8` (= 1)      |
//! | H, W, C      | `u32` each      |
//! | P            | `u16`           |
//! | M_max        | `u8`            |
//! | u_min, u_max | `f32` each      |
//!
//! followed by one bit string: N fields of ⌈log2(M_max+1)⌉ bits holding M_i,
//! then the payload, MSB first, zero-padded to a byte boundary.

use bitvec::prelude::*;
use rayon::prelude::*;

use crate::error::{IaqError, Result};
use crate::model::{depth_field_bits, BitAllocation, ImageTensor, PatchPartition};
use crate::quantizer::{push_index, read_index, Bits, Codebook};

pub const CONTAINER_MAGIC: &[u8; 4] = b"IAQB";
pub const CONTAINER_VERSION: u8 = 1;
const HEADER_LEN: usize = 28;

/// Quantizer side information plus the packed payload `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitstream {
    pub partition: PatchPartition,
    pub m_max: u8,
    pub u_min: f32,
    pub u_max: f32,
    pub depths: Vec<u8>,
    pub payload: Bits,
}

impl Bitstream {
    /// P²C·ΣM_i for the carried bit depths.
    pub fn expected_payload_len(&self) -> usize {
        self.partition.pixels_per_patch() * self.depths.iter().map(|&m| m as usize).sum::<usize>()
    }

    pub fn allocation(&self) -> BitAllocation {
        BitAllocation::new(self.depths.clone(), self.partition.pixels_per_patch())
    }

    pub fn codebook(&self, patch: usize) -> Result<Codebook> {
        Codebook::new(self.depths[patch], f64::from(self.u_min), f64::from(self.u_max))
    }

    /// Serializes to the `IAQB` container.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let p = &self.partition;
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len() / 8 + 8);
        out.extend_from_slice(CONTAINER_MAGIC);
        out.push(CONTAINER_VERSION);
        for d in [p.height, p.width, p.channels] {
            let d = u32::try_from(d)
                .map_err(|_| IaqError::InvalidStream(format!("dimension {d} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        let ps = u16::try_from(p.patch_size)
            .map_err(|_| IaqError::InvalidStream("patch size exceeds u16".into()))?;
        out.extend_from_slice(&ps.to_le_bytes());
        out.push(self.m_max);
        out.extend_from_slice(&self.u_min.to_le_bytes());
        out.extend_from_slice(&self.u_max.to_le_bytes());

        let field = depth_field_bits(self.m_max) as u8;
        let mut body = Bits::with_capacity(self.depths.len() * field as usize + self.payload.len());
        for &m in &self.depths {
            push_index(&mut body, u32::from(m), field)?;
        }
        body.extend_from_bitslice(&self.payload);
        body.set_uninitialized(false);
        out.extend_from_slice(body.as_raw_slice());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(IaqError::TruncatedStream(format!(
                "{} bytes is shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[..4] != CONTAINER_MAGIC {
            return Err(IaqError::InvalidStream("bad magic".into()));
        }
        if bytes[4] != CONTAINER_VERSION {
            return Err(IaqError::InvalidStream(format!("unsupported version {}", bytes[4])));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let (h, w, c) = (u32_at(5), u32_at(9), u32_at(13));
        let patch_size = u16::from_le_bytes([bytes[17], bytes[18]]) as usize;
        let m_max = bytes[19];
        let (u_min, u_max) = (f32_at(20), f32_at(24));
        let partition = PatchPartition::new(h, w, c, patch_size)
            .map_err(|e| IaqError::InvalidStream(format!("bad geometry: {e}")))?;
        if m_max == 0 {
            return Err(IaqError::InvalidStream("M_max of zero".into()));
        }

        let body = BitSlice::<u8, Msb0>::from_slice(&bytes[HEADER_LEN..]);
        let field = depth_field_bits(m_max) as usize;
        let n = partition.n_patches();
        if body.len() < n * field {
            return Err(IaqError::TruncatedStream("side information cut short".into()));
        }
        let depths: Vec<u8> = body[..n * field]
            .chunks(field)
            .map(|f| read_index(f) as u8)
            .collect();
        if let Some(m) = depths.iter().find(|&&m| m > m_max) {
            return Err(IaqError::InvalidStream(format!(
                "bit depth {m} exceeds M_max = {m_max}"
            )));
        }
        let payload_len =
            partition.pixels_per_patch() * depths.iter().map(|&m| m as usize).sum::<usize>();
        let available = body.len() - n * field;
        if available < payload_len {
            return Err(IaqError::TruncatedStream(format!(
                "payload needs {payload_len} bits, {available} present"
            )));
        }
        if available - payload_len >= 8 {
            return Err(IaqError::InvalidStream(format!(
                "{} trailing bits after a {payload_len}-bit payload",
                available - payload_len
            )));
        }
        let payload = body[n * field..n * field + payload_len].to_bitvec();
        let stream = Self {
            partition,
            m_max,
            u_min,
            u_max,
            depths,
            payload,
        };
        stream.validate()?;
        Ok(stream)
    }

    fn validate(&self) -> Result<()> {
        if self.depths.len() != self.partition.n_patches() {
            return Err(IaqError::InvalidStream(format!(
                "{} bit depths for {} patches",
                self.depths.len(),
                self.partition.n_patches()
            )));
        }
        if let Some(m) = self.depths.iter().find(|&&m| m > self.m_max) {
            return Err(IaqError::InvalidStream(format!(
                "bit depth {m} exceeds M_max = {}",
                self.m_max
            )));
        }
        if !(self.u_min.is_finite() && self.u_max.is_finite() && self.u_min <= self.u_max) {
            return Err(IaqError::InvalidStream(format!(
                "bad range [{}, {}]",
                self.u_min, self.u_max
            )));
        }
        let expected = self.expected_payload_len();
        if self.payload.len() != expected {
            return Err(IaqError::LengthMismatch {
                expected,
                actual: self.payload.len(),
            });
        }
        Ok(())
    }
}

/// Quantizes every patch of `image` at its allocated depth. The payload is the
/// patch-major, pixel-minor concatenation of the per-pixel codes.
pub fn quantize_image(
    image: &ImageTensor,
    allocation: &BitAllocation,
    partition: &PatchPartition,
    m_max: u8,
) -> Result<Bitstream> {
    partition.check(image)?;
    if allocation.len() != partition.n_patches() {
        return Err(IaqError::GeometryMismatch(format!(
            "allocation has {} entries for {} patches",
            allocation.len(),
            partition.n_patches()
        )));
    }
    if allocation.pixels_per_patch != partition.pixels_per_patch() {
        return Err(IaqError::GeometryMismatch(format!(
            "allocation counts {} slots per patch, partition {}",
            allocation.pixels_per_patch,
            partition.pixels_per_patch()
        )));
    }
    if let Some(m) = allocation.bits.iter().find(|&&m| m > m_max) {
        return Err(IaqError::InvalidParameter(format!(
            "bit depth {m} exceeds M_max = {m_max}"
        )));
    }
    let (u_min, u_max) = image.pixel_range()?;
    let ppp = partition.pixels_per_patch();
    let pixels = image.pixels();

    let chunks: Vec<Bits> = allocation
        .bits
        .par_iter()
        .enumerate()
        .map(|(i, &m)| -> Result<Bits> {
            let cb = Codebook::new(m, f64::from(u_min), f64::from(u_max))?;
            let mut out = Bits::with_capacity(ppp * m as usize);
            for k in 0..ppp {
                let s = cb.index_of(f64::from(pixels[partition.pixel_index(i, k)]));
                push_index(&mut out, s, m)?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut payload = Bits::with_capacity(allocation.payload_bits() as usize);
    for c in &chunks {
        payload.extend_from_bitslice(c);
    }
    Ok(Bitstream {
        partition: *partition,
        m_max,
        u_min,
        u_max,
        depths: allocation.bits.clone(),
        payload,
    })
}

/// Reconstructs the image from (possibly corrupted) payload bits.
pub fn dequantize_image(stream: &Bitstream) -> Result<ImageTensor> {
    stream.validate()?;
    let partition = &stream.partition;
    let ppp = partition.pixels_per_patch();
    let mut pixels = vec![0.0f32; partition.n_values()];
    let mut offset = 0;
    for (i, &m) in stream.depths.iter().enumerate() {
        let cb = stream.codebook(i)?;
        let width = m as usize;
        for k in 0..ppp {
            let s = read_index(&stream.payload[offset..offset + width]);
            offset += width;
            pixels[partition.pixel_index(i, k)] = cb.level(s) as f32;
        }
    }
    ImageTensor::new(partition.height, partition.width, partition.channels, pixels)
}
