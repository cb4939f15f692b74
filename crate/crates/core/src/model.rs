//! Shared data model: images, patch geometry, importance maps, bit budgets
//! and the bit accounting that ties them together.
//!
//! Patches are ordered row-major over the patch grid. Inside a patch, pixel
//! slots are ordered row-major over `(row, col, channel)`.

use serde::{Deserialize, Serialize};

use crate::error::{IaqError, Result};

/// H×W×C grid of real pixel values stored row-major in `(row, col, channel)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f32>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(IaqError::EmptyImage);
        }
        let expected = height * width * channels;
        if pixels.len() != expected {
            return Err(IaqError::InvalidImage(format!(
                "{height}x{width}x{channels} image needs {expected} values, got {}",
                pixels.len()
            )));
        }
        if let Some(pos) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(IaqError::InvalidImage(format!(
                "pixel {pos} is not finite"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.pixels[self.index(row, col, channel)]
    }

    /// Minimum and maximum pixel value over the whole image.
    pub fn pixel_range(&self) -> Result<(f32, f32)> {
        pixel_range(&self.pixels)
    }
}

/// Minimum and maximum of a non-empty slice of finite values.
pub fn pixel_range(pixels: &[f32]) -> Result<(f32, f32)> {
    let first = *pixels.first().ok_or(IaqError::EmptyImage)?;
    Ok(pixels
        .iter()
        .fold((first, first), |(lo, hi), &p| (lo.min(p), hi.max(p))))
}

/// Partition of an H×W×C image into N = HW/P² square patches of P²C slots each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchPartition {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub patch_size: usize,
}

impl PatchPartition {
    pub fn new(height: usize, width: usize, channels: usize, patch_size: usize) -> Result<Self> {
        if patch_size == 0 {
            return Err(IaqError::InvalidParameter("patch size must be positive".into()));
        }
        if height == 0 || width == 0 || channels == 0 {
            return Err(IaqError::EmptyImage);
        }
        if !height.is_multiple_of(patch_size) {
            return Err(IaqError::DimensionNotDivisible {
                axis: "height",
                size: height,
                patch_size,
            });
        }
        if !width.is_multiple_of(patch_size) {
            return Err(IaqError::DimensionNotDivisible {
                axis: "width",
                size: width,
                patch_size,
            });
        }
        Ok(Self {
            height,
            width,
            channels,
            patch_size,
        })
    }

    /// Partition matching the geometry of `image`.
    pub fn of(image: &ImageTensor, patch_size: usize) -> Result<Self> {
        Self::new(image.height, image.width, image.channels, patch_size)
    }

    pub fn grid_rows(&self) -> usize {
        self.height / self.patch_size
    }

    pub fn grid_cols(&self) -> usize {
        self.width / self.patch_size
    }

    pub fn n_patches(&self) -> usize {
        self.grid_rows() * self.grid_cols()
    }

    /// P²C, the number of pixel slots (and therefore bits per unit of M_i) in a patch.
    pub fn pixels_per_patch(&self) -> usize {
        self.patch_size * self.patch_size * self.channels
    }

    /// Total number of scalar values H·W·C.
    pub fn n_values(&self) -> usize {
        self.height * self.width * self.channels
    }

    /// Flat image index of slot `k` inside patch `patch`.
    pub fn pixel_index(&self, patch: usize, k: usize) -> usize {
        let p = self.patch_size;
        let c = self.channels;
        let (grid_row, grid_col) = (patch / self.grid_cols(), patch % self.grid_cols());
        let (local_row, rest) = (k / (p * c), k % (p * c));
        let (local_col, channel) = (rest / c, rest % c);
        let row = grid_row * p + local_row;
        let col = grid_col * p + local_col;
        (row * self.width + col) * c + channel
    }

    pub fn matches(&self, image: &ImageTensor) -> bool {
        self.height == image.height && self.width == image.width && self.channels == image.channels
    }

    /// Flattened patches `u_p`, one `Vec` of P²C values per patch.
    pub fn split(&self, image: &ImageTensor) -> Result<Vec<Vec<f32>>> {
        self.check(image)?;
        let ppp = self.pixels_per_patch();
        Ok((0..self.n_patches())
            .map(|i| (0..ppp).map(|k| image.pixels[self.pixel_index(i, k)]).collect())
            .collect())
    }

    /// Inverse of [`PatchPartition::split`].
    pub fn assemble(&self, patches: &[Vec<f32>]) -> Result<ImageTensor> {
        if patches.len() != self.n_patches() {
            return Err(IaqError::GeometryMismatch(format!(
                "expected {} patches, got {}",
                self.n_patches(),
                patches.len()
            )));
        }
        let ppp = self.pixels_per_patch();
        let mut pixels = vec![0.0f32; self.n_values()];
        for (i, patch) in patches.iter().enumerate() {
            if patch.len() != ppp {
                return Err(IaqError::GeometryMismatch(format!(
                    "patch {i} has {} values, expected {ppp}",
                    patch.len()
                )));
            }
            for (k, &v) in patch.iter().enumerate() {
                pixels[self.pixel_index(i, k)] = v;
            }
        }
        ImageTensor::new(self.height, self.width, self.channels, pixels)
    }

    pub(crate) fn check(&self, image: &ImageTensor) -> Result<()> {
        if self.matches(image) {
            Ok(())
        } else {
            Err(IaqError::GeometryMismatch(format!(
                "partition is {}x{}x{} but image is {}x{}x{}",
                self.height, self.width, self.channels, image.height, image.width, image.channels
            )))
        }
    }
}

/// Per-patch importance scores, non-negative and normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMap {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
}

impl ImportanceMap {
    /// Validates and normalizes raw scores laid out on a `rows × cols` patch grid.
    pub fn new(rows: usize, cols: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(IaqError::InvalidImportanceMap("no scores".into()));
        }
        if rows * cols != scores.len() {
            return Err(IaqError::InvalidImportanceMap(format!(
                "grid {rows}x{cols} does not hold {} scores",
                scores.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite() || *s < 0.0) {
            return Err(IaqError::InvalidImportanceMap(format!(
                "score {i} = {} is negative or not finite",
                scores[i]
            )));
        }
        let total: f64 = scores.iter().sum();
        if total <= 0.0 {
            return Err(IaqError::InvalidImportanceMap("scores sum to zero".into()));
        }
        Ok(Self {
            rows,
            cols,
            scores: scores.into_iter().map(|s| s / total).collect(),
        })
    }

    /// Scores on a single-row grid.
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        let n = scores.len();
        Self::new(1, n, scores)
    }

    pub fn uniform(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![1.0; rows * cols])
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                (lo.min(s), hi.max(s))
            })
    }

    /// Checks that the map lines up with a patch partition.
    pub fn check(&self, partition: &PatchPartition) -> Result<()> {
        if self.len() != partition.n_patches() {
            return Err(IaqError::GeometryMismatch(format!(
                "importance map has {} scores, partition has {} patches",
                self.len(),
                partition.n_patches()
            )));
        }
        Ok(())
    }
}

/// Bits needed to signal the quantizer: per-patch bit depths plus 8+8 bits for the range.
pub fn side_info_bits(n_patches: usize, m_max: u8) -> u64 {
    depth_field_bits(m_max) as u64 * n_patches as u64 + 16
}

/// ⌈log2(M_max + 1)⌉, the width of one per-patch bit-depth field.
pub fn depth_field_bits(m_max: u8) -> u32 {
    u8::BITS - m_max.leading_zeros()
}

/// Total bit budget with its side-information overhead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub target_bits: u64,
    pub m_max: u8,
    pub n_patches: usize,
    pub pixels_per_patch: usize,
}

impl Budget {
    pub fn new(target_bits: u64, m_max: u8, n_patches: usize, pixels_per_patch: usize) -> Result<Self> {
        if m_max == 0 || m_max > 16 {
            return Err(IaqError::InvalidBudget(format!(
                "M_max = {m_max} must lie in 1..=16"
            )));
        }
        if n_patches == 0 || pixels_per_patch == 0 {
            return Err(IaqError::InvalidBudget("empty patch geometry".into()));
        }
        let budget = Self {
            target_bits,
            m_max,
            n_patches,
            pixels_per_patch,
        };
        let b_add = budget.side_info_bits();
        if target_bits <= b_add {
            return Err(IaqError::InvalidBudget(format!(
                "target of {target_bits} bits does not exceed the {b_add}-bit side information"
            )));
        }
        if budget.full_payload_bits() + b_add <= target_bits {
            return Err(IaqError::InvalidBudget(format!(
                "target of {target_bits} bits is not binding: every patch at M_max costs {}",
                budget.full_payload_bits() + b_add
            )));
        }
        Ok(budget)
    }

    /// Budget for the given partition.
    pub fn for_partition(target_bits: u64, m_max: u8, partition: &PatchPartition) -> Result<Self> {
        Self::new(
            target_bits,
            m_max,
            partition.n_patches(),
            partition.pixels_per_patch(),
        )
    }

    /// Budget from a target compression ratio, B_target = ⌊ρ·8HWC⌋.
    pub fn from_ratio(rho: f64, m_max: u8, partition: &PatchPartition) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(IaqError::InvalidBudget(format!("ratio {rho} must be positive")));
        }
        let target = (rho * 8.0 * partition.n_values() as f64).floor() as u64;
        Self::for_partition(target, m_max, partition)
    }

    /// B_add.
    pub fn side_info_bits(&self) -> u64 {
        side_info_bits(self.n_patches, self.m_max)
    }

    /// B̄ = B_target − B_add, the bits available for the payload.
    pub fn payload_capacity(&self) -> u64 {
        self.target_bits - self.side_info_bits()
    }

    /// ⌊B̄ / P²C⌋, the number of unit bit increments that fit in the payload.
    pub fn increments(&self) -> u64 {
        self.payload_capacity() / self.pixels_per_patch as u64
    }

    /// Q_max = 2^M_max.
    pub fn q_max(&self) -> f64 {
        f64::from(1u32 << self.m_max)
    }

    fn full_payload_bits(&self) -> u64 {
        (self.pixels_per_patch * self.n_patches) as u64 * u64::from(self.m_max)
    }
}

/// Per-patch bit depths M_i.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitAllocation {
    pub bits: Vec<u8>,
    pub pixels_per_patch: usize,
}

impl BitAllocation {
    pub fn new(bits: Vec<u8>, pixels_per_patch: usize) -> Self {
        Self {
            bits,
            pixels_per_patch,
        }
    }

    pub fn uniform(n_patches: usize, bits: u8, pixels_per_patch: usize) -> Self {
        Self::new(vec![bits; n_patches], pixels_per_patch)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn total_depth(&self) -> u64 {
        self.bits.iter().map(|&m| u64::from(m)).sum()
    }

    /// B = P²C·ΣM_i.
    pub fn payload_bits(&self) -> u64 {
        self.pixels_per_patch as u64 * self.total_depth()
    }

    /// True when every M_i ≤ M_max and B + B_add ≤ B_target.
    pub fn fits(&self, budget: &Budget) -> bool {
        self.bits.len() == budget.n_patches
            && self.bits.iter().all(|&m| m <= budget.m_max)
            && self.payload_bits() + budget.side_info_bits() <= budget.target_bits
    }

    pub fn check_against(&self, budget: &Budget) -> Result<()> {
        if self.bits.len() != budget.n_patches {
            return Err(IaqError::GeometryMismatch(format!(
                "allocation covers {} patches, budget {}",
                self.bits.len(),
                budget.n_patches
            )));
        }
        if let Some(m) = self.bits.iter().find(|&&m| m > budget.m_max) {
            return Err(IaqError::InvalidParameter(format!(
                "bit depth {m} exceeds M_max = {}",
                budget.m_max
            )));
        }
        Ok(())
    }
}

/// ρ = B / (8·H·W·C).
pub fn compression_ratio(allocation: &BitAllocation, partition: &PatchPartition) -> f64 {
    allocation.payload_bits() as f64 / (8.0 * partition.n_values() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_standard_vit_input() {
        let p = PatchPartition::new(224, 224, 3, 16).unwrap();
        assert_eq!(p.n_patches(), 196);
        assert_eq!(p.pixels_per_patch(), 768);
        assert_eq!(p.grid_rows(), 14);
    }

    #[test]
    fn partition_single_patch_and_indivisible() {
        assert_eq!(PatchPartition::new(16, 16, 1, 16).unwrap().n_patches(), 1);
        match PatchPartition::new(17, 16, 1, 16) {
            Err(IaqError::DimensionNotDivisible { axis, .. }) => assert_eq!(axis, "height"),
            other => panic!("unexpected {other:?}"),
        }
        match PatchPartition::new(16, 20, 1, 16) {
            Err(IaqError::DimensionNotDivisible { axis, .. }) => assert_eq!(axis, "width"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pixel_index_is_a_bijection() {
        let p = PatchPartition::new(8, 12, 2, 4).unwrap();
        let mut seen = vec![false; p.n_values()];
        for i in 0..p.n_patches() {
            for k in 0..p.pixels_per_patch() {
                let idx = p.pixel_index(i, k);
                assert!(!seen[idx]);
                seen[idx] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
        // patch 1 starts at column 4 of row 0
        assert_eq!(p.pixel_index(1, 0), 4 * 2);
        // second slot is channel 1 of the same pixel
        assert_eq!(p.pixel_index(0, 1), 1);
    }

    #[test]
    fn pixel_range_cases() {
        let img = ImageTensor::filled(2, 2, 1, 7.0).unwrap();
        assert_eq!(img.pixel_range().unwrap(), (7.0, 7.0));
        let img = ImageTensor::new(1, 3, 1, vec![128.0, 0.0, 255.0]).unwrap();
        assert_eq!(img.pixel_range().unwrap(), (0.0, 255.0));
        assert!(matches!(pixel_range(&[]), Err(IaqError::EmptyImage)));
    }

    #[test]
    fn rejects_non_finite_pixels() {
        assert!(ImageTensor::new(1, 2, 1, vec![0.0, f32::NAN]).is_err());
        assert!(ImageTensor::new(1, 2, 1, vec![0.0]).is_err());
    }

    #[test]
    fn side_info_examples() {
        assert_eq!(side_info_bits(196, 8), 800);
        assert_eq!(side_info_bits(1, 1), 17);
        assert_eq!(side_info_bits(196, 7), 604);
    }

    #[test]
    fn side_info_monotone() {
        for m in 1..16u8 {
            for n in 1..50 {
                assert!(side_info_bits(n, m) <= side_info_bits(n + 1, m));
                assert!(side_info_bits(n, m) <= side_info_bits(n, m + 1));
            }
        }
    }

    #[test]
    fn compression_ratio_examples() {
        let p = PatchPartition::new(224, 224, 3, 16).unwrap();
        let n = p.n_patches();
        let ppp = p.pixels_per_patch();
        assert_eq!(compression_ratio(&BitAllocation::uniform(n, 1, ppp), &p), 0.125);
        assert_eq!(compression_ratio(&BitAllocation::uniform(n, 0, ppp), &p), 0.0);
        assert_eq!(compression_ratio(&BitAllocation::uniform(n, 8, ppp), &p), 1.0);
        let p = PatchPartition::new(32, 48, 1, 8).unwrap();
        let a = BitAllocation::uniform(p.n_patches(), 1, p.pixels_per_patch());
        assert_eq!(compression_ratio(&a, &p), 0.125);
    }

    #[test]
    fn importance_map_normalizes() {
        let m = ImportanceMap::new(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s: f64 = m.scores().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(m.min_max(), (0.1, 0.4));
        assert!(ImportanceMap::new(1, 2, vec![1.0, -1.0]).is_err());
        assert!(ImportanceMap::new(1, 2, vec![0.0, 0.0]).is_err());
        assert!(ImportanceMap::new(1, 3, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn budget_validation() {
        // N = 4, P²C = 16: B_add = 4·4 + 16 = 32, full payload = 4·16·8 = 512.
        let b = Budget::new(100, 8, 4, 16).unwrap();
        assert_eq!(b.side_info_bits(), 32);
        assert_eq!(b.payload_capacity(), 68);
        assert_eq!(b.increments(), 4);
        assert!(Budget::new(32, 8, 4, 16).is_err());
        assert!(Budget::new(544, 8, 4, 16).is_err());
        assert!(Budget::new(543, 8, 4, 16).is_ok());
    }

    #[test]
    fn budget_from_ratio() {
        let p = PatchPartition::new(224, 224, 3, 16).unwrap();
        let b = Budget::from_ratio(0.25, 8, &p).unwrap();
        assert_eq!(b.target_bits, 2 * 224 * 224 * 3);
    }
}
