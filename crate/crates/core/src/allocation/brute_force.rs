use super::{check_lengths, objective};
use crate::distortion::DistortionParams;
use crate::error::{IaqError, Result};
use crate::model::{BitAllocation, Budget};

pub const BRUTE_FORCE_MAX_PATCHES: usize = 8;
pub const BRUTE_FORCE_MAX_BITS: u8 = 3;

/// Exhaustive minimum of the objective over all `(M_max+1)^N` depth vectors
/// that fit the budget. The first minimizer in lexicographic order wins.
pub fn brute_force_optimal(
    weights: &[f64],
    budget: &Budget,
    params: &DistortionParams,
) -> Result<BitAllocation> {
    check_lengths(weights, budget)?;
    let n = weights.len();
    if n > BRUTE_FORCE_MAX_PATCHES || budget.m_max > BRUTE_FORCE_MAX_BITS {
        return Err(IaqError::InstanceTooLarge(format!(
            "N = {n}, M_max = {} (limits {BRUTE_FORCE_MAX_PATCHES}, {BRUTE_FORCE_MAX_BITS})",
            budget.m_max
        )));
    }
    let radix = budget.m_max + 1;
    let limit = budget.increments();
    let mut bits = vec![0u8; n];
    let mut best: Option<(f64, Vec<u8>)> = None;
    loop {
        let total: u64 = bits.iter().map(|&m| u64::from(m)).sum();
        if total <= limit {
            let value = objective(&bits, weights, params);
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, bits.clone()));
            }
        }
        // odometer increment, least significant digit last
        let mut i = n;
        loop {
            if i == 0 {
                let (_, bits) = best.expect("the all-zero vector always fits");
                return Ok(BitAllocation::new(bits, budget.pixels_per_patch));
            }
            i -= 1;
            bits[i] += 1;
            if bits[i] < radix {
                break;
            }
            bits[i] = 0;
        }
    }
}
