//! Independent checks of the closed-form bound: exact enumeration over
//! codewords and flip patterns, and a seeded Monte Carlo run through the
//! real quantizer and channel.
//!
//! Both treat the pixel as uniform on `[u_min, u_max]`, so inside a cell the
//! error of a reconstruction offset by δ is `Δ²/12 + δ²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::DistortionParams;
use crate::channel::transmit_with;
use crate::error::{IaqError, Result};
use crate::quantizer::{push_index, read_index, Bits, Codebook};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// Every flip pattern, with probability μ^|e|(1−μ)^(M−|e|).
    FullChannel,
    /// Only patterns with at most one flip, unnormalized.
    AtMostOneFlip,
}

/// Exact expected per-patch squared error `P²C·E|u − û|²` for `1 ≤ M ≤ 8`.
pub fn exact_expected_distortion(
    params: &DistortionParams,
    bits: u8,
    conditioning: Conditioning,
) -> Result<f64> {
    if !(1..=8).contains(&bits) {
        return Err(IaqError::InvalidParameter(format!(
            "enumeration needs 1 ≤ M ≤ 8, got {bits}"
        )));
    }
    let mu = params.mu();
    let levels = 1u32 << bits;
    let step = params.range() / f64::from(levels);
    let in_cell = step * step / 12.0;

    let patterns: Vec<(u32, f64)> = (0..levels)
        .filter_map(|e| {
            let flips = e.count_ones();
            if conditioning == Conditioning::AtMostOneFlip && flips > 1 {
                return None;
            }
            let p = mu.powi(flips as i32) * (1.0 - mu).powi((u32::from(bits) - flips) as i32);
            Some((e, p))
        })
        .collect();

    let mut total = 0.0;
    for s in 0..levels {
        for &(e, p) in &patterns {
            let offset = (f64::from(s ^ e) - f64::from(s)) * step;
            total += p * (in_cell + offset * offset);
        }
    }
    Ok(params.pixels_per_patch() as f64 * total / f64::from(levels))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Each trial draws one uniform pixel, quantizes it with `bits` bits, sends
/// the codeword through the channel and decodes it. The per-pixel squared
/// error is scaled by P²C to a per-patch figure.
pub fn monte_carlo_distortion(
    params: &DistortionParams,
    bits: u8,
    seed: u64,
    trials: usize,
) -> Result<MonteCarloEstimate> {
    if trials == 0 {
        return Err(IaqError::InvalidParameter("need at least one trial".into()));
    }
    let range = params.range();
    let cb = Codebook::new(bits, 0.0, range)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    const BATCH: usize = 1 << 14;

    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < trials {
        let n = BATCH.min(trials - done);
        let pixels: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * range).collect();
        let mut sent = Bits::with_capacity(n * bits as usize);
        for &u in &pixels {
            push_index(&mut sent, cb.index_of(u), bits)?;
        }
        let received = transmit_with(&sent, params.mu(), &mut rng);
        for (i, &u) in pixels.iter().enumerate() {
            let w = bits as usize;
            let s = read_index(&received[i * w..(i + 1) * w]);
            let err = u - cb.level(s);
            let sq = err * err;
            sum += sq;
            sum_sq += sq * sq;
        }
        done += n;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = if trials > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let scale = params.pixels_per_patch() as f64;
    Ok(MonteCarloEstimate {
        mean: scale * mean,
        std_error: scale * (var / n).sqrt(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::MU_CONVEX_LIMIT;

    fn params(mu: f64) -> DistortionParams {
        DistortionParams::new(256, 1.0, mu).unwrap()
    }

    #[test]
    fn noiseless_is_uniform_quantization_noise() {
        for m in 1..=8u8 {
            let p = params(0.0);
            let step = 1.0 / f64::from(1u32 << m);
            for c in [Conditioning::FullChannel, Conditioning::AtMostOneFlip] {
                let v = exact_expected_distortion(&p, m, c).unwrap();
                assert!((v - 256.0 * step * step / 12.0).abs() < 1e-12);
                assert!(v <= p.quant_bound(f64::from(m)));
            }
        }
    }

    #[test]
    fn single_bit_below_closed_form() {
        for i in 0..40 {
            let mu = MU_CONVEX_LIMIT * i as f64 / 40.0;
            let p = params(mu);
            let exact = exact_expected_distortion(&p, 1, Conditioning::AtMostOneFlip).unwrap();
            assert!(exact <= p.closed_form(2.0));
        }
    }

    #[test]
    fn truncation_error_is_second_order() {
        // dropping ≥2-flip patterns changes the expectation by O(μ²)
        let gap = |mu: f64| {
            let p = params(mu);
            exact_expected_distortion(&p, 3, Conditioning::FullChannel).unwrap()
                - exact_expected_distortion(&p, 3, Conditioning::AtMostOneFlip).unwrap()
        };
        let (g1, g2) = (gap(0.01), gap(0.005));
        assert!(g1 > 0.0 && g2 > 0.0);
        let ratio = g1 / g2;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
        assert!(g1 / 0.01f64.powi(2) < 256.0);
    }

    #[test]
    fn rejects_out_of_range_bits() {
        assert!(exact_expected_distortion(&params(0.0), 0, Conditioning::FullChannel).is_err());
        assert!(exact_expected_distortion(&params(0.0), 9, Conditioning::FullChannel).is_err());
        assert!(monte_carlo_distortion(&params(0.0), 2, 0, 0).is_err());
    }

    #[test]
    fn monte_carlo_noiseless_agrees_with_enumeration() {
        let p = params(0.0);
        let est = monte_carlo_distortion(&p, 3, 17, 200_000).unwrap();
        let exact = exact_expected_distortion(&p, 3, Conditioning::FullChannel).unwrap();
        assert!((est.mean - exact).abs() <= 4.0 * est.std_error, "{est:?} vs {exact}");
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let p = params(0.1);
        assert_eq!(
            monte_carlo_distortion(&p, 4, 5, 5000).unwrap(),
            monte_carlo_distortion(&p, 4, 5, 5000).unwrap()
        );
    }

    #[test]
    fn monte_carlo_noisy_agrees_with_full_enumeration() {
        let p = params(0.05);
        let est = monte_carlo_distortion(&p, 4, 23, 1_000_000).unwrap();
        let exact = exact_expected_distortion(&p, 4, Conditioning::FullChannel).unwrap();
        assert!((est.mean - exact).abs() <= 4.0 * est.std_error, "{est:?} vs {exact}");
    }
}
