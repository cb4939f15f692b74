//! Bit allocation across patches.
//!
//! Every solver minimizes (exactly or approximately) the separable objective
//! `Σ_i w_i·D(2^{M_i}; μ)` subject to `P²C·ΣM_i + B_add ≤ B_target` and
//! `0 ≤ M_i ≤ M_max`.

mod baselines;
mod brute_force;
mod incremental;
mod waterfill;

pub use baselines::{allocate_fixed_q, allocate_sum_threshold, allocate_threshold, allocate_top_k, largest_uniform_depth};
pub use brute_force::{brute_force_optimal, BRUTE_FORCE_MAX_BITS, BRUTE_FORCE_MAX_PATCHES};
pub use incremental::allocate_incremental;
pub use waterfill::{
    adjust_by_marginal_gain, adjust_to_budget, AdjustOrder, allocate_waterfilling, allocate_waterfilling_modified, round_half_even,
    solve_continuous, solve_continuous_modified, ContinuousSolution, SolverConfig,
    WaterFillingOutcome,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distortion::DistortionParams;
use crate::error::{IaqError, Result};
use crate::model::{BitAllocation, Budget};

/// Σ_i w_i·D(2^{M_i}; μ).
pub fn objective(bits: &[u8], weights: &[f64], params: &DistortionParams) -> f64 {
    bits.iter()
        .zip(weights)
        .map(|(&m, &w)| w * params.at_bits(m))
        .sum()
}

/// Continuous objective Σ_i w_i·D(Q_i; μ) at real levels.
pub fn continuous_objective(levels: &[f64], weights: &[f64], params: &DistortionParams) -> f64 {
    levels
        .iter()
        .zip(weights)
        .map(|(&q, &w)| w * params.closed_form(q))
        .sum()
}

pub(crate) fn check_lengths(weights: &[f64], budget: &Budget) -> Result<()> {
    if weights.len() != budget.n_patches {
        return Err(IaqError::GeometryMismatch(format!(
            "{} weights for {} patches",
            weights.len(),
            budget.n_patches
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(IaqError::InvalidParameter(format!(
            "weights must be positive and finite, found {w}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Solver {
    /// Incremental allocation on the noiseless objective.
    #[serde(rename = "ia")]
    Incremental,
    /// Water filling on the noiseless objective.
    #[serde(rename = "wf")]
    WaterFilling,
    /// Incremental allocation on the channel-aware objective.
    #[serde(rename = "ia-mod")]
    IncrementalModified,
    /// Bisection + Newton water filling on the channel-aware objective.
    #[serde(rename = "wf-mod")]
    WaterFillingModified,
    #[serde(rename = "fixed-q")]
    FixedQ,
    #[serde(rename = "top-k")]
    TopK,
    #[serde(rename = "at")]
    Threshold,
    #[serde(rename = "ast")]
    SumThreshold,
}

impl Solver {
    pub const ALL: [Solver; 8] = [
        Solver::Incremental,
        Solver::WaterFilling,
        Solver::IncrementalModified,
        Solver::WaterFillingModified,
        Solver::FixedQ,
        Solver::TopK,
        Solver::Threshold,
        Solver::SumThreshold,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Solver::Incremental => "ia",
            Solver::WaterFilling => "wf",
            Solver::IncrementalModified => "ia-mod",
            Solver::WaterFillingModified => "wf-mod",
            Solver::FixedQ => "fixed-q",
            Solver::TopK => "top-k",
            Solver::Threshold => "at",
            Solver::SumThreshold => "ast",
        }
    }

    /// True for selection baselines that ignore the bit budget.
    pub fn ignores_budget(&self) -> bool {
        matches!(self, Solver::TopK | Solver::Threshold | Solver::SumThreshold)
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Solver {
    type Err = IaqError;
    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.id() == s)
            .ok_or_else(|| IaqError::InvalidParameter(format!("unknown solver `{s}`")))
    }
}

/// Parameters of the selection baselines.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BaselineParams {
    /// Fixed-Q level count (a power of two); `None` picks the largest uniform level within budget.
    pub q: Option<u32>,
    /// Top-k percentage.
    pub k: Option<f64>,
    /// Attention threshold δ.
    pub delta: Option<f64>,
    /// Cumulative attention threshold δ_sum.
    pub delta_sum: Option<f64>,
}

/// Runs `solver`. `params` carries the flip probability used by the modified
/// solvers; the unmodified ones always plan for a noiseless link.
pub fn allocate(
    solver: Solver,
    scores: &[f64],
    weights: &[f64],
    budget: &Budget,
    params: &DistortionParams,
    config: &SolverConfig,
    baseline: &BaselineParams,
) -> Result<BitAllocation> {
    let noiseless = params.with_mu(0.0)?;
    let missing = |name: &str| IaqError::InvalidParameter(format!("solver {solver} needs --{name}"));
    match solver {
        Solver::Incremental => allocate_incremental(weights, budget, &noiseless),
        Solver::IncrementalModified => allocate_incremental(weights, budget, params),
        Solver::WaterFilling => {
            Ok(allocate_waterfilling(weights, scores, budget, &noiseless, config.adjust)?.allocation)
        }
        Solver::WaterFillingModified => {
            Ok(allocate_waterfilling_modified(weights, scores, budget, params, config)?.allocation)
        }
        Solver::FixedQ => {
            let depth = match baseline.q {
                Some(q) => {
                    if !q.is_power_of_two() {
                        return Err(IaqError::InvalidParameter(format!(
                            "fixed-q level count {q} is not a power of two"
                        )));
                    }
                    q.trailing_zeros() as u8
                }
                None => largest_uniform_depth(budget),
            };
            if depth > budget.m_max {
                return Err(IaqError::InvalidParameter(format!(
                    "fixed-q depth {depth} exceeds M_max = {}",
                    budget.m_max
                )));
            }
            Ok(allocate_fixed_q(budget.n_patches, depth, budget.pixels_per_patch))
        }
        Solver::TopK => allocate_top_k(
            scores,
            baseline.k.ok_or_else(|| missing("k"))?,
            budget.m_max,
            budget.pixels_per_patch,
        ),
        Solver::Threshold => allocate_threshold(
            scores,
            baseline.delta.ok_or_else(|| missing("delta"))?,
            budget.m_max,
            budget.pixels_per_patch,
        ),
        Solver::SumThreshold => allocate_sum_threshold(
            scores,
            baseline.delta_sum.ok_or_else(|| missing("delta-sum"))?,
            budget.m_max,
            budget.pixels_per_patch,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_examples() {
        let p = DistortionParams::new(16, 2.0, 0.0).unwrap();
        let d0 = p.d0();
        assert!((objective(&[0, 0, 0], &[0.2, 0.3, 0.5], &p) - d0).abs() < 1e-12);
        let v = objective(&[2, 0], &[1.0, 0.1], &p);
        assert!((v - 0.1625 * d0).abs() < 1e-12 * d0);
        // noiseless channel-aware objective is the quantization-only objective
        for bits in [[0u8, 1, 2], [3, 3, 1], [8, 0, 5]] {
            let direct: f64 = bits
                .iter()
                .zip([0.4, 0.5, 0.1])
                .map(|(&m, w)| w * d0 * 4f64.powi(-i32::from(m)))
                .sum();
            assert!((objective(&bits, &[0.4, 0.5, 0.1], &p) - direct).abs() < 1e-12 * d0);
        }
    }

    #[test]
    fn solver_ids_round_trip() {
        for s in Solver::ALL {
            assert_eq!(s.id().parse::<Solver>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.id()));
        }
        assert!("greedy".parse::<Solver>().is_err());
    }
}
