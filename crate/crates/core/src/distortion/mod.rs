//! Per-patch distortion under quantization plus bit flips.
//!
//! With `D0 = P²C·(u_max − u_min)²/4` and `x = log2((1−μ)/4)`, the canonical
//! per-patch bound at quantization level `Q` is
//!
//! ```text
//! D(Q; μ) = D0/(1−μ) · Q^x · ((4/3)μQ² + 4μQ + 1 − (16/3)μ)
//! ```
//!
//! which reduces to `D0·Q⁻²` for a noiseless link. The KKT marginal
//! `h(Q; w, μ) = −(w·ln2/P²C)·Q·∂D/∂Q` and its derivative drive the
//! water-filling solvers; both are strictly decreasing in `Q` only while
//! `μ < 3/13`.

mod oracle;

pub use oracle::{exact_expected_distortion, monte_carlo_distortion, Conditioning, MonteCarloEstimate};

use std::f64::consts::LN_2;
use std::io::Write;

use crate::error::{IaqError, Result};

/// Flip probability bound of the convex, decreasing regime.
pub const MU_CONVEX_LIMIT: f64 = 3.0 / 13.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionParams {
    pixels_per_patch: usize,
    range: f64,
    mu: f64,
}

impl DistortionParams {
    /// `range` is `u_max − u_min`; `mu` the bit-flip probability in `[0, 1)`.
    pub fn new(pixels_per_patch: usize, range: f64, mu: f64) -> Result<Self> {
        if pixels_per_patch == 0 {
            return Err(IaqError::InvalidParameter("empty patch".into()));
        }
        if !(range.is_finite() && range >= 0.0) {
            return Err(IaqError::InvalidParameter(format!("pixel range {range} is invalid")));
        }
        if !(0.0..1.0).contains(&mu) {
            return Err(IaqError::RegimeViolation { mu, limit: 1.0 });
        }
        Ok(Self {
            pixels_per_patch,
            range,
            mu,
        })
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.pixels_per_patch, self.range, mu)
    }

    pub fn pixels_per_patch(&self) -> usize {
        self.pixels_per_patch
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// D0 = P²C·(u_max − u_min)²/4.
    pub fn d0(&self) -> f64 {
        self.pixels_per_patch as f64 * self.range * self.range / 4.0
    }

    /// x = log2((1−μ)/4) ≤ −2.
    pub fn exponent(&self) -> f64 {
        ((1.0 - self.mu) / 4.0).log2()
    }

    /// Fails unless the flip probability lies in the strictly decreasing regime of `h`.
    pub fn check_marginal_regime(&self) -> Result<()> {
        if self.mu >= MU_CONVEX_LIMIT {
            Err(IaqError::RegimeViolation {
                mu: self.mu,
                limit: MU_CONVEX_LIMIT,
            })
        } else {
            Ok(())
        }
    }

    /// Noiseless bound D0·4^−M.
    pub fn quant_bound(&self, bits: f64) -> f64 {
        self.d0() * (-bits * 2.0 * LN_2).exp()
    }

    /// Q^x computed in the log domain.
    fn level_power(&self, q: f64, offset: f64) -> f64 {
        ((self.exponent() + offset) * q.ln()).exp()
    }

    /// D(Q; μ) for real `Q ≥ 1`.
    pub fn closed_form(&self, q: f64) -> f64 {
        let mu = self.mu;
        if mu == 0.0 {
            return self.d0() / (q * q);
        }
        let brace = (4.0 / 3.0) * mu * q * q + 4.0 * mu * q + (1.0 - (16.0 / 3.0) * mu);
        self.d0() / (1.0 - mu) * self.level_power(q, 0.0) * brace
    }

    /// D(2^M; μ).
    pub fn at_bits(&self, bits: u8) -> f64 {
        self.closed_form(f64::from(1u32 << bits))
    }

    /// Per-pixel error terms `(E0, E1)` for no flip and one flip in an M-bit codeword.
    pub fn per_pixel_terms(&self, bits: u8) -> (f64, f64) {
        let mu = self.mu;
        let half = self.range / f64::from(1u32 << bits) / 2.0;
        let sq = half * half;
        if bits == 0 {
            return (sq, 0.0);
        }
        let m = i32::from(bits);
        let e0 = (1.0 - mu).powi(m) * sq;
        let spread: f64 = (1..=m)
            .map(|t| {
                let v = 2f64.powi(m + 1) * 0.5f64.powi(t) + 1.0;
                v * v
            })
            .sum();
        let e1 = (1.0 - mu).powi(m - 1) * mu * sq * spread;
        (e0, e1)
    }

    /// P²C·(E0 + E1), the per-patch term sum before closed-form simplification.
    pub fn term_sum(&self, bits: u8) -> f64 {
        let (e0, e1) = self.per_pixel_terms(bits);
        self.pixels_per_patch as f64 * (e0 + e1)
    }

    fn marginal_scale(&self, weight: f64) -> f64 {
        weight * self.d0() * LN_2 / (self.pixels_per_patch as f64 * (1.0 - self.mu))
    }

    /// h(Q; w, μ), the Lagrange multiplier at which level `Q` is stationary.
    pub fn h(&self, q: f64, weight: f64) -> Result<f64> {
        self.check_marginal_regime()?;
        Ok(self.h_unchecked(q, weight))
    }

    /// ∂h/∂Q.
    pub fn h_prime(&self, q: f64, weight: f64) -> Result<f64> {
        self.check_marginal_regime()?;
        Ok(self.h_prime_unchecked(q, weight))
    }

    pub(crate) fn h_unchecked(&self, q: f64, weight: f64) -> f64 {
        let mu = self.mu;
        let x = self.exponent();
        let brace = -(4.0 / 3.0) * mu * q * q * (1.0 - mu).log2()
            - 4.0 * mu * q * ((1.0 - mu) / 2.0).log2()
            - (1.0 - (16.0 / 3.0) * mu) * x;
        self.marginal_scale(weight) * self.level_power(q, 0.0) * brace
    }

    pub(crate) fn h_prime_unchecked(&self, q: f64, weight: f64) -> f64 {
        self.marginal_scale(weight) * self.level_power(q, -1.0) * self.g(q)
    }

    /// g(Q; μ) = −(4/3)μ(x+2)²Q² − 4μ(x+1)²Q − x²(1 − (16/3)μ), the sign of ∂h/∂Q.
    pub fn g(&self, q: f64) -> f64 {
        let mu = self.mu;
        let x = self.exponent();
        -(4.0 / 3.0) * mu * (x + 2.0).powi(2) * q * q
            - 4.0 * mu * (x + 1.0).powi(2) * q
            - x * x * (1.0 - (16.0 / 3.0) * mu)
    }

    fn bit_power(&self, bits: f64) -> f64 {
        (self.exponent() * bits * LN_2).exp()
    }

    /// ∂D(2^M; μ)/∂M for real `M ≥ 0`.
    pub fn d_dm(&self, bits: f64) -> f64 {
        let mu = self.mu;
        let x = self.exponent();
        let q = bits.exp2();
        let d1 = (4.0 / 3.0) * mu * (x + 2.0) * q * q
            + 4.0 * mu * (x + 1.0) * q
            + x * (1.0 - (16.0 / 3.0) * mu);
        self.d0() * LN_2 / (1.0 - mu) * self.bit_power(bits) * d1
    }

    /// ∂²D(2^M; μ)/∂M².
    pub fn d2_dm2(&self, bits: f64) -> f64 {
        let mu = self.mu;
        let x = self.exponent();
        let q = bits.exp2();
        let d2 = (4.0 / 3.0) * mu * (x + 2.0).powi(2) * q * q
            + 4.0 * mu * (x + 1.0).powi(2) * q
            + x * x * (1.0 - (16.0 / 3.0) * mu);
        self.d0() * LN_2 * LN_2 / (1.0 - mu) * self.bit_power(bits) * d2
    }
}

/// Writes `mu,bits,level,closed_form,term_sum,quant_bound` rows for plotting.
pub fn write_distortion_grid<W: Write>(
    out: W,
    pixels_per_patch: usize,
    range: f64,
    mus: &[f64],
    m_max: u8,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mu", "bits", "level", "closed_form", "term_sum", "quant_bound"])?;
    for &mu in mus {
        let p = DistortionParams::new(pixels_per_patch, range, mu)?;
        for m in 0..=m_max {
            w.write_record([
                mu.to_string(),
                m.to_string(),
                (1u32 << m).to_string(),
                p.at_bits(m).to_string(),
                p.term_sum(m).to_string(),
                p.quant_bound(f64::from(m)).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
