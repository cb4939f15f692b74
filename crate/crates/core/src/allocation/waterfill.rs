//! Water filling over relaxed, real-valued quantization levels.
//!
//! For a multiplier ν every patch takes the level `Q_i(ν)` at which its
//! marginal `h(Q; w_i, μ)` equals ν, clipped to `[1, Q_max]`; ν is then tuned
//! until `Σ log2 Q_i = B̄/P²C`. A noiseless link admits the explicit inverse
//! `Q_i = sqrt(w_i·ln2·(u_max−u_min)²/(2ν))`. Otherwise each `Q_i(ν)` comes
//! from Newton–Raphson inside a bisection on ν. Real levels are finally
//! rounded to integer depths and moved onto the budget, either by weighted
//! marginal gain ([`adjust_by_marginal_gain`], the default) or in attention
//! score order ([`adjust_to_budget`]).

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::check_lengths;
use crate::distortion::DistortionParams;
use crate::error::{IaqError, Result};
use crate::model::{BitAllocation, Budget};

/// How rounded depths are moved onto the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AdjustOrder {
    /// One bit at a time to the patch with the largest weighted distortion
    /// drop, or from the patch with the smallest weighted increase.
    #[default]
    #[serde(rename = "gain")]
    MarginalGain,
    /// Passes over patches in attention-score order.
    #[serde(rename = "score")]
    Score,
}

impl std::str::FromStr for AdjustOrder {
    type Err = IaqError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gain" => Ok(AdjustOrder::MarginalGain),
            "score" => Ok(AdjustOrder::Score),
            other => Err(IaqError::InvalidParameter(format!("unknown adjustment order `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// S_max, bisection steps on ν.
    pub max_bisections: usize,
    /// T_max, Newton steps per patch and bisection step.
    pub max_newton: usize,
    /// τ_q, Newton stops once a step moves the level by less than this.
    pub level_tolerance: f64,
    /// τ_b in bits; `None` means one patch-bit (P²C).
    pub budget_tolerance: Option<f64>,
    /// Initial (ν_min, ν_max); `None` derives it from the marginal at the level bounds.
    pub multiplier_bracket: Option<(f64, f64)>,
    pub adjust: AdjustOrder,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_bisections: 10,
            max_newton: 5,
            level_tolerance: 1e-4,
            budget_tolerance: None,
            multiplier_bracket: None,
            adjust: AdjustOrder::default(),
        }
    }
}

impl SolverConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(IaqError::InvalidParameter(m));
        if self.max_bisections == 0 || self.max_newton == 0 {
            return bad("S_max and T_max must be at least 1".into());
        }
        if !(self.level_tolerance > 0.0) {
            return bad(format!("τ_q = {} must be positive", self.level_tolerance));
        }
        if let Some(t) = self.budget_tolerance {
            if !(t >= 0.0) {
                return bad(format!("τ_b = {t} must be non-negative"));
            }
        }
        if let Some((lo, hi)) = self.multiplier_bracket {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return bad(format!("multiplier bracket ({lo}, {hi}) must satisfy 0 < ν_min < ν_max"));
            }
        }
        Ok(())
    }

    fn budget_tolerance(&self, budget: &Budget) -> f64 {
        self.budget_tolerance
            .unwrap_or(budget.pixels_per_patch as f64)
    }
}

/// Relaxed solution before rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSolution {
    /// Q*_i ∈ [1, Q_max].
    pub levels: Vec<f64>,
    /// Final multiplier ν*.
    pub multiplier: f64,
    /// Bisection steps taken.
    pub iterations: usize,
    /// |B − B̄| fell below τ_b.
    pub converged: bool,
    /// Per patch: the level is on a bound or Newton met τ_q.
    pub level_converged: Vec<bool>,
    /// P²C·Σ log2 Q*_i − B̄ in bits.
    pub budget_gap: f64,
}

impl ContinuousSolution {
    pub fn log_levels(&self) -> Vec<f64> {
        self.levels.iter().map(|q| q.log2()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterFillingOutcome {
    pub continuous: ContinuousSolution,
    /// Depths after rounding, before adjustment.
    pub rounded: Vec<u8>,
    pub allocation: BitAllocation,
}

/// Scale-free copy for degenerate (constant) images where D0 vanishes; the
/// optimal levels do not depend on the pixel range.
fn solver_params(params: &DistortionParams) -> Result<DistortionParams> {
    if params.range() > 0.0 {
        Ok(*params)
    } else {
        DistortionParams::new(params.pixels_per_patch(), 1.0, params.mu())
    }
}

fn payload_target(budget: &Budget) -> f64 {
    budget.payload_capacity() as f64 / budget.pixels_per_patch as f64
}

/// Noiseless relaxed optimum via the explicit inverse marginal and a
/// log-domain bisection on ν run to floating-point resolution.
pub fn solve_continuous(
    weights: &[f64],
    budget: &Budget,
    params: &DistortionParams,
) -> Result<ContinuousSolution> {
    check_lengths(weights, budget)?;
    let params = solver_params(&params.with_mu(0.0)?)?;
    let q_max = budget.q_max();
    let target = payload_target(budget);
    let r2 = params.range() * params.range();
    let scale: Vec<f64> = weights.iter().map(|w| w * LN_2 * r2 / 2.0).collect();
    let levels_at = |nu: f64| -> Vec<f64> {
        scale
            .iter()
            .map(|c| (c / nu).sqrt().clamp(1.0, q_max))
            .collect()
    };
    let spent = |levels: &[f64]| levels.iter().map(|q| q.log2()).sum::<f64>();

    // h(1; w, 0) = c and h(Q_max; w, 0) = c/Q_max²
    let c_max = scale.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let c_min = scale.iter().cloned().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = ((0.5 * c_min / (q_max * q_max)).ln(), c_max.ln());
    let mut iterations = 0;
    while iterations < 256 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if spent(&levels_at(mid.exp())) < target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let nu = (0.5 * (lo + hi)).exp();
    let levels = levels_at(nu);
    let gap = budget.pixels_per_patch as f64 * (spent(&levels) - target);
    Ok(ContinuousSolution {
        level_converged: vec![true; levels.len()],
        levels,
        multiplier: nu,
        iterations,
        converged: gap.abs() < SolverConfig::default().budget_tolerance(budget),
        budget_gap: gap,
    })
}

struct MarginalSolver<'a> {
    params: &'a DistortionParams,
    m_max: f64,
    q_max: f64,
    config: &'a SolverConfig,
}

impl MarginalSolver<'_> {
    /// Log-level `log2 Q` at which `h(Q; w) = ν`, warm-started from `start`.
    ///
    /// Newton runs on `φ(m) = ln h(2^m) − ln ν`, whose slope stays between
    /// `x·ln2` and `(x+2)·ln2`; the step uses `φ' = h'(Q)·Q·ln2 / h(Q)`.
    fn solve(&self, weight: f64, nu: f64, start: f64) -> (f64, bool) {
        let p = self.params;
        if nu >= p.h_unchecked(1.0, weight) {
            return (0.0, true);
        }
        if nu <= p.h_unchecked(self.q_max, weight) {
            return (self.m_max, true);
        }
        let ln_nu = nu.ln();
        let mut m = start.clamp(0.0, self.m_max);
        for _ in 0..self.config.max_newton {
            let q = m.exp2();
            let h = p.h_unchecked(q, weight);
            let slope = p.h_prime_unchecked(q, weight) * q * LN_2 / h;
            let next = (m - (h.ln() - ln_nu) / slope).clamp(0.0, self.m_max);
            let moved = (next.exp2() - q).abs();
            m = next;
            if moved < self.config.level_tolerance {
                return (m, true);
            }
        }
        (m, false)
    }
}

/// Relaxed optimum of the channel-aware problem by bisection on ν with an
/// inner Newton–Raphson per patch. A noiseless link uses [`solve_continuous`].
///
/// Without convergence inside S_max steps the iterate closest to the budget
/// is returned with `converged == false`.
pub fn solve_continuous_modified(
    weights: &[f64],
    budget: &Budget,
    params: &DistortionParams,
    config: &SolverConfig,
) -> Result<ContinuousSolution> {
    check_lengths(weights, budget)?;
    config.validate()?;
    params.check_marginal_regime()?;
    if params.mu() == 0.0 {
        return solve_continuous(weights, budget, params);
    }
    let params = solver_params(params)?;
    let q_max = budget.q_max();
    let solver = MarginalSolver {
        params: &params,
        m_max: f64::from(budget.m_max),
        q_max,
        config,
    };
    let target = payload_target(budget);
    let unit = budget.pixels_per_patch as f64;
    let tolerance = config.budget_tolerance(budget);

    let (mut nu_lo, mut nu_hi) = config.multiplier_bracket.unwrap_or_else(|| {
        let top = weights
            .iter()
            .map(|&w| params.h_unchecked(1.0, w))
            .fold(f64::NEG_INFINITY, f64::max);
        let bottom = weights
            .iter()
            .map(|&w| params.h_unchecked(q_max, w))
            .fold(f64::INFINITY, f64::min);
        (0.5 * bottom, top)
    });

    let mut logs = vec![0.0; weights.len()];
    let mut flags = vec![false; weights.len()];
    let mut best: Option<ContinuousSolution> = None;
    for step in 1..=config.max_bisections {
        // geometric midpoint: ν spans several decades between the bracket ends
        let nu = (nu_lo * nu_hi).sqrt();
        for (i, &w) in weights.iter().enumerate() {
            let (m, ok) = solver.solve(w, nu, logs[i]);
            logs[i] = m;
            flags[i] = ok;
        }
        let gap = unit * (logs.iter().sum::<f64>() - target);
        let converged = gap.abs() < tolerance;
        if best.as_ref().is_none_or(|b| converged || gap.abs() < b.budget_gap.abs()) {
            best = Some(ContinuousSolution {
                levels: logs.iter().map(|m| m.exp2()).collect(),
                multiplier: nu,
                iterations: step,
                converged,
                level_converged: flags.clone(),
                budget_gap: gap,
            });
        }
        if converged {
            break;
        }
        if gap < 0.0 {
            nu_hi = nu;
        } else {
            nu_lo = nu;
        }
    }
    let mut out = best.expect("at least one bisection step");
    out.iterations = out.iterations.max(1);
    Ok(out)
}

/// Round-half-to-even of `log2 Q`, clipped to `[0, M_max]`.
pub fn round_half_even(log_level: f64, m_max: u8) -> u8 {
    log_level.round_ties_even().clamp(0.0, f64::from(m_max)) as u8
}

/// Moves rounded depths onto the budget: while a whole patch-bit is left
/// over, add one bit per eligible patch in descending score order; while
/// over budget, remove one bit per eligible patch in ascending score order.
/// Passes repeat until the budget holds or no patch is eligible. Score ties
/// go to the lower patch index.
pub fn adjust_to_budget(rounded: &[u8], scores: &[f64], budget: &Budget) -> Result<BitAllocation> {
    check_rounded(rounded, scores, budget)?;
    let unit = budget.pixels_per_patch as i64;
    let capacity = budget.payload_capacity() as i64;
    let mut bits = rounded.to_vec();
    let mut slack = capacity - unit * bits.iter().map(|&m| i64::from(m)).sum::<i64>();

    let mut ascending: Vec<usize> = (0..bits.len()).collect();
    ascending.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut descending: Vec<usize> = (0..bits.len()).collect();
    descending.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    while slack < 0 {
        let mut changed = false;
        for &i in &ascending {
            if slack >= 0 {
                break;
            }
            if bits[i] > 0 {
                bits[i] -= 1;
                slack += unit;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    while slack >= unit {
        let mut changed = false;
        for &i in &descending {
            if slack < unit {
                break;
            }
            if bits[i] < budget.m_max {
                bits[i] += 1;
                slack -= unit;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(BitAllocation::new(bits, budget.pixels_per_patch))
}

fn check_rounded(rounded: &[u8], keys: &[f64], budget: &Budget) -> Result<()> {
    if rounded.len() != budget.n_patches || keys.len() != budget.n_patches {
        return Err(IaqError::GeometryMismatch(format!(
            "{} depths and {} scores for {} patches",
            rounded.len(),
            keys.len(),
            budget.n_patches
        )));
    }
    if let Some(m) = rounded.iter().find(|&&m| m > budget.m_max) {
        return Err(IaqError::InvalidParameter(format!(
            "rounded depth {m} exceeds M_max = {}",
            budget.m_max
        )));
    }
    Ok(())
}

/// Moves rounded depths onto the budget one bit at a time: while over
/// budget, take a bit from the patch whose weighted distortion rises least;
/// while a whole patch-bit is left over, give one to the patch whose weighted
/// distortion drops most. Ties go to the lower patch index.
pub fn adjust_by_marginal_gain(
    rounded: &[u8],
    weights: &[f64],
    budget: &Budget,
    params: &DistortionParams,
) -> Result<BitAllocation> {
    check_rounded(rounded, weights, budget)?;
    let table: Vec<f64> = (0..=budget.m_max).map(|m| params.at_bits(m)).collect();
    let step = |i: usize, m: u8| weights[i] * (table[m as usize] - table[m as usize + 1]);
    let unit = budget.pixels_per_patch as i64;
    let capacity = budget.payload_capacity() as i64;
    let mut bits = rounded.to_vec();
    let mut slack = capacity - unit * bits.iter().map(|&m| i64::from(m)).sum::<i64>();

    while slack < 0 {
        let Some(i) = (0..bits.len())
            .filter(|&i| bits[i] > 0)
            .min_by(|&a, &b| step(a, bits[a] - 1).total_cmp(&step(b, bits[b] - 1)))
        else {
            break;
        };
        bits[i] -= 1;
        slack += unit;
    }
    while slack >= unit {
        // max_by keeps the last maximum, so scan in reverse for the lowest index
        let Some(i) = (0..bits.len())
            .rev()
            .filter(|&i| bits[i] < budget.m_max)
            .max_by(|&a, &b| step(a, bits[a]).total_cmp(&step(b, bits[b])))
        else {
            break;
        };
        bits[i] += 1;
        slack -= unit;
    }
    Ok(BitAllocation::new(bits, budget.pixels_per_patch))
}

fn finish(
    continuous: ContinuousSolution,
    weights: &[f64],
    scores: &[f64],
    budget: &Budget,
    params: &DistortionParams,
    order: AdjustOrder,
) -> Result<WaterFillingOutcome> {
    let rounded: Vec<u8> = continuous
        .levels
        .iter()
        .map(|q| round_half_even(q.log2(), budget.m_max))
        .collect();
    let allocation = match order {
        AdjustOrder::MarginalGain => adjust_by_marginal_gain(&rounded, weights, budget, params)?,
        AdjustOrder::Score => adjust_to_budget(&rounded, scores, budget)?,
    };
    Ok(WaterFillingOutcome {
        continuous,
        rounded,
        allocation,
    })
}

/// Noiseless water filling followed by rounding and budget adjustment.
pub fn allocate_waterfilling(
    weights: &[f64],
    scores: &[f64],
    budget: &Budget,
    params: &DistortionParams,
    order: AdjustOrder,
) -> Result<WaterFillingOutcome> {
    let noiseless = params.with_mu(0.0)?;
    let continuous = solve_continuous(weights, budget, &noiseless)?;
    finish(continuous, weights, scores, budget, &noiseless, order)
}

/// Channel-aware water filling followed by rounding and budget adjustment.
/// Identical to [`allocate_waterfilling`] when the flip probability is zero.
pub fn allocate_waterfilling_modified(
    weights: &[f64],
    scores: &[f64],
    budget: &Budget,
    params: &DistortionParams,
    config: &SolverConfig,
) -> Result<WaterFillingOutcome> {
    let continuous = solve_continuous_modified(weights, budget, params, config)?;
    finish(continuous, weights, scores, budget, params, config.adjust)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::side_info_bits;

    fn budget(total_depth: u64, n: usize, m_max: u8, ppp: usize) -> Budget {
        Budget::new(side_info_bits(n, m_max) + total_depth * ppp as u64, m_max, n, ppp).unwrap()
    }

    #[test]
    fn two_patch_closed_form() {
        let p = DistortionParams::new(4, 10.0, 0.0).unwrap();
        let b = budget(3, 2, 8, 4);
        let sol = solve_continuous(&[4.0, 1.0], &b, &p).unwrap();
        assert!((sol.levels[0] - 4.0).abs() < 1e-9);
        assert!((sol.levels[1] - 2.0).abs() < 1e-9);
        assert!(sol.converged);
    }

    #[test]
    fn uniform_weights_uniform_levels() {
        let b = budget(5 * 12, 12, 8, 16);
        let w = vec![0.25; 12];
        let p = DistortionParams::new(16, 3.0, 0.0).unwrap();
        let sol = solve_continuous(&w, &b, &p).unwrap();
        assert!(sol.levels.iter().all(|q| (q - 32.0).abs() < 1e-9));
        for mu in [0.01, 0.1, 0.2] {
            let p = p.with_mu(mu).unwrap();
            let sol = solve_continuous_modified(&w, &b, &p, &SolverConfig::default()).unwrap();
            let first = sol.levels[0];
            assert!(sol.levels.iter().all(|&q| q == first));
        }
    }

    #[test]
    fn noiseless_modified_is_plain_water_filling() {
        let w = [0.9, 0.2, 0.5, 0.05, 1.0];
        let s = [0.3, 0.1, 0.2, 0.05, 0.35];
        let b = budget(17, 5, 8, 16);
        let p = DistortionParams::new(16, 255.0, 0.0).unwrap();
        let plain = allocate_waterfilling(&w, &s, &b, &p, AdjustOrder::default()).unwrap();
        let modified = allocate_waterfilling_modified(&w, &s, &b, &p, &SolverConfig::default()).unwrap();
        assert_eq!(plain, modified);
    }

    #[test]
    fn adjust_identity_and_additions() {
        let b = budget(6, 4, 8, 16);
        let s = [0.1, 0.4, 0.2, 0.3];
        assert_eq!(adjust_to_budget(&[1, 2, 1, 2], &s, &b).unwrap().bits, vec![1, 2, 1, 2]);
        assert_eq!(adjust_to_budget(&[1, 1, 1, 1], &s, &b).unwrap().bits, vec![1, 2, 1, 2]);
        // over budget: lowest scores lose bits first
        assert_eq!(adjust_to_budget(&[2, 2, 2, 2], &s, &b).unwrap().bits, vec![1, 2, 1, 2]);
        // many passes when far off
        assert_eq!(adjust_to_budget(&[0, 0, 0, 0], &s, &b).unwrap().bits, vec![1, 2, 1, 2]);
        assert_eq!(adjust_to_budget(&[8, 8, 8, 8], &s, &b).unwrap().bits, vec![1, 2, 1, 2]);
    }

    #[test]
    fn adjust_saturates() {
        let b = Budget::new(side_info_bits(2, 2) + 4 * 16 - 1, 2, 2, 16).unwrap();
        let a = adjust_to_budget(&[0, 0], &[0.5, 0.5], &b).unwrap();
        assert_eq!(a.bits, vec![2, 1]);
        assert!(a.fits(&b));
    }

    #[test]
    fn marginal_gain_adjustment() {
        let p = DistortionParams::new(16, 1.0, 0.0).unwrap();
        let b = budget(6, 4, 8, 16);
        let w = [0.1, 0.4, 0.2, 0.3];
        assert_eq!(adjust_by_marginal_gain(&[1, 2, 1, 2], &w, &b, &p).unwrap().bits, vec![1, 2, 1, 2]);
        // from zero the result is the incremental optimum
        let ia = crate::allocation::allocate_incremental(&w, &b, &p).unwrap();
        assert_eq!(adjust_by_marginal_gain(&[0; 4], &w, &b, &p).unwrap(), ia);
        assert_eq!(adjust_by_marginal_gain(&[8; 4], &w, &b, &p).unwrap(), ia);
        // equal gains go to the lower index
        let a = adjust_by_marginal_gain(&[0; 4], &[0.25; 4], &budget(2, 4, 8, 16), &p).unwrap();
        assert_eq!(a.bits, vec![1, 1, 0, 0]);
    }

    #[test]
    fn round_half_even_cases() {
        assert_eq!(round_half_even(2.5, 8), 2);
        assert_eq!(round_half_even(3.5, 8), 4);
        assert_eq!(round_half_even(-0.2, 8), 0);
        assert_eq!(round_half_even(9.7, 8), 8);
    }

    #[test]
    fn modified_rejects_high_flip_probability() {
        let b = budget(4, 2, 8, 4);
        let p = DistortionParams::new(4, 1.0, 0.25).unwrap();
        assert!(matches!(
            solve_continuous_modified(&[1.0, 0.5], &b, &p, &SolverConfig::default()),
            Err(IaqError::RegimeViolation { .. })
        ));
        let bad = SolverConfig { max_newton: 0, ..SolverConfig::default() };
        let p = p.with_mu(0.1).unwrap();
        assert!(solve_continuous_modified(&[1.0, 0.5], &b, &p, &bad).is_err());
    }

    #[test]
    fn constant_image_still_allocates() {
        let b = budget(6, 3, 8, 4);
        let p = DistortionParams::new(4, 0.0, 0.05).unwrap();
        let out = allocate_waterfilling_modified(&[1.0, 0.5, 0.2], &[0.5, 0.3, 0.2], &b, &p, &SolverConfig::default()).unwrap();
        assert!(out.allocation.fits(&b));
        assert_eq!(out.allocation.total_depth(), 6);
    }
}
