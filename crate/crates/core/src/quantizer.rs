//! Uniform mid-rise quantizer over a shared `[u_min, u_max]` range and its
//! natural-binary index code (MSB first).

use bitvec::prelude::*;

use crate::error::{IaqError, Result};

pub type Bits = BitVec<u8, Msb0>;

/// The 2^M reconstruction points `u_min + (s + 1/2)·Δ`, Δ = (u_max − u_min)/2^M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Codebook {
    bits: u8,
    u_min: f64,
    u_max: f64,
}

impl Codebook {
    pub fn new(bits: u8, u_min: f64, u_max: f64) -> Result<Self> {
        if bits > 24 {
            return Err(IaqError::InvalidParameter(format!(
                "{bits}-bit codebooks are not supported"
            )));
        }
        if !(u_min.is_finite() && u_max.is_finite() && u_min <= u_max) {
            return Err(IaqError::InvalidParameter(format!(
                "invalid range [{u_min}, {u_max}]"
            )));
        }
        Ok(Self { bits, u_min, u_max })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn n_levels(&self) -> u32 {
        1 << self.bits
    }

    pub fn step(&self) -> f64 {
        (self.u_max - self.u_min) / f64::from(self.n_levels())
    }

    pub fn level(&self, index: u32) -> f64 {
        self.u_min + (f64::from(index) + 0.5) * self.step()
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.n_levels()).map(|s| self.level(s)).collect()
    }

    /// Index of the nearest level. Inputs are clamped into the range first;
    /// a value exactly between two levels takes the lower index.
    pub fn index_of(&self, u: f64) -> u32 {
        let span = self.u_max - self.u_min;
        if span <= 0.0 || self.bits == 0 {
            return 0;
        }
        let u = u.clamp(self.u_min, self.u_max);
        let t = (u - self.u_min) / span * f64::from(self.n_levels());
        (t.ceil() as i64 - 1).clamp(0, i64::from(self.n_levels()) - 1) as u32
    }
}

/// Quantizer output `(s, ū)` for one pixel.
pub fn quantize_pixel(u: f64, codebook: &Codebook) -> (u32, f64) {
    let s = codebook.index_of(u);
    (s, codebook.level(s))
}

/// Natural binary code of `index` in `bits` bits, most significant bit first.
pub fn encode_index(index: u32, bits: u8) -> Result<Bits> {
    let mut out = Bits::with_capacity(bits as usize);
    push_index(&mut out, index, bits)?;
    Ok(out)
}

pub(crate) fn push_index(out: &mut Bits, index: u32, bits: u8) -> Result<()> {
    if bits < 32 && index >> bits != 0 {
        return Err(IaqError::IndexOutOfRange { index, bits });
    }
    for t in (0..bits).rev() {
        out.push((index >> t) & 1 == 1);
    }
    Ok(())
}

pub(crate) fn read_index(bits: &BitSlice<u8, Msb0>) -> u32 {
    bits.iter().fold(0u32, |acc, b| (acc << 1) | u32::from(*b))
}

/// Reconstruction value of a received codeword.
pub fn decode_bits(bits: &BitSlice<u8, Msb0>, codebook: &Codebook) -> Result<f64> {
    if bits.len() != codebook.bits as usize {
        return Err(IaqError::LengthMismatch {
            expected: codebook.bits as usize,
            actual: bits.len(),
        });
    }
    Ok(codebook.level(read_index(bits)))
}
