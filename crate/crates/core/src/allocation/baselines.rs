//! Selection baselines: selected patches get M_max bits, the rest none.

use crate::error::{IaqError, Result};
use crate::model::{BitAllocation, Budget};

/// Every patch at the same depth.
pub fn allocate_fixed_q(n_patches: usize, depth: u8, pixels_per_patch: usize) -> BitAllocation {
    BitAllocation::uniform(n_patches, depth, pixels_per_patch)
}

/// Largest uniform depth whose payload fits the budget.
pub fn largest_uniform_depth(budget: &Budget) -> u8 {
    let per_level = (budget.n_patches * budget.pixels_per_patch) as u64;
    (budget.payload_capacity() / per_level).min(u64::from(budget.m_max)) as u8
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(IaqError::InvalidImportanceMap("no patches".into()));
    }
    if let Some(a) = scores.iter().find(|a| !a.is_finite()) {
        return Err(IaqError::InvalidImportanceMap(format!("non-finite score {a}")));
    }
    Ok(())
}

/// Patch indices by descending score, ties to the lower index.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn select(n: usize, chosen: impl IntoIterator<Item = usize>, m_max: u8, ppp: usize) -> BitAllocation {
    let mut bits = vec![0u8; n];
    for i in chosen {
        bits[i] = m_max;
    }
    BitAllocation::new(bits, ppp)
}

/// The `⌊k·N/100⌋` highest-scoring patches.
pub fn allocate_top_k(scores: &[f64], k: f64, m_max: u8, pixels_per_patch: usize) -> Result<BitAllocation> {
    check_scores(scores)?;
    if !(0.0..=100.0).contains(&k) {
        return Err(IaqError::InvalidParameter(format!("k = {k} must lie in [0, 100]")));
    }
    let n = scores.len();
    // guard against k·N/100 landing a hair below an integer
    let count = ((k * n as f64 / 100.0) + 1e-9).floor() as usize;
    let chosen = ranked(scores).into_iter().take(count.min(n));
    Ok(select(n, chosen, m_max, pixels_per_patch))
}

/// Patches with score strictly above δ.
pub fn allocate_threshold(scores: &[f64], delta: f64, m_max: u8, pixels_per_patch: usize) -> Result<BitAllocation> {
    check_scores(scores)?;
    if !delta.is_finite() {
        return Err(IaqError::InvalidParameter(format!("δ = {delta} must be finite")));
    }
    let chosen = (0..scores.len()).filter(|&i| scores[i] > delta);
    Ok(select(scores.len(), chosen, m_max, pixels_per_patch))
}

/// Patches in descending score order until the cumulative score exceeds δ_sum;
/// the patch that crosses the threshold is included.
pub fn allocate_sum_threshold(
    scores: &[f64],
    delta_sum: f64,
    m_max: u8,
    pixels_per_patch: usize,
) -> Result<BitAllocation> {
    check_scores(scores)?;
    if !delta_sum.is_finite() {
        return Err(IaqError::InvalidParameter(format!("δ_sum = {delta_sum} must be finite")));
    }
    let mut chosen = Vec::new();
    let mut total = 0.0;
    for i in ranked(scores) {
        chosen.push(i);
        total += scores[i];
        if total > delta_sum {
            break;
        }
    }
    Ok(select(scores.len(), chosen, m_max, pixels_per_patch))
}
