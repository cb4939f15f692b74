use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::check_lengths;
use crate::distortion::{DistortionParams, MU_CONVEX_LIMIT};
use crate::error::{IaqError, Result};
use crate::model::{BitAllocation, Budget};

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    patch: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // larger gain first, then lower patch index
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| Reverse(self.patch).cmp(&Reverse(other.patch)))
    }
}

/// Greedy marginal-gain allocation: repeatedly give one more bit to the patch
/// whose weighted distortion drops the most, until the next P²C-bit increment
/// would break the budget or every patch sits at M_max. Optimal whenever
/// `D(2^M; μ)` is convex and decreasing in M, i.e. for `μ ≤ 3/13`.
pub fn allocate_incremental(
    weights: &[f64],
    budget: &Budget,
    params: &DistortionParams,
) -> Result<BitAllocation> {
    check_lengths(weights, budget)?;
    if params.mu() > MU_CONVEX_LIMIT {
        return Err(IaqError::RegimeViolation {
            mu: params.mu(),
            limit: MU_CONVEX_LIMIT,
        });
    }
    let table: Vec<f64> = (0..=budget.m_max).map(|m| params.at_bits(m)).collect();
    let gain = |patch: usize, m: u8| weights[patch] * (table[m as usize] - table[m as usize + 1]);

    let mut bits = vec![0u8; weights.len()];
    let mut heap: BinaryHeap<Candidate> = (0..weights.len())
        .map(|patch| Candidate {
            gain: gain(patch, 0),
            patch,
        })
        .collect();
    let steps = budget.increments().min((weights.len() * budget.m_max as usize) as u64);
    for _ in 0..steps {
        let Some(best) = heap.pop() else { break };
        let m = &mut bits[best.patch];
        *m += 1;
        if *m < budget.m_max {
            heap.push(Candidate {
                gain: gain(best.patch, *m),
                patch: best.patch,
            });
        }
    }
    Ok(BitAllocation::new(bits, budget.pixels_per_patch))
}
