//! Binary symmetric channel and a textbook SNR → bit-error-rate helper.
//!
//! Randomness comes from ChaCha20 ([`RNG_ALGORITHM`]) seeded with
//! `seed_from_u64(seed)`. Independent streams for parallel work are derived
//! with [`derive_seed`], which reads the first `u64` of ChaCha20 stream
//! `index` under the master seed.

use std::fmt;
use std::str::FromStr;

use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{IaqError, Result};
use crate::quantizer::Bits;
use bitvec::prelude::*;

pub const RNG_ALGORITHM: &str = "chacha20";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub flip_probability: f64,
    pub seed: u64,
}

impl ChannelSpec {
    pub fn new(flip_probability: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&flip_probability) {
            return Err(IaqError::InvalidParameter(format!(
                "flip probability {flip_probability} outside [0, 1]"
            )));
        }
        Ok(Self {
            flip_probability,
            seed,
        })
    }

    pub fn noiseless() -> Self {
        Self {
            flip_probability: 0.0,
            seed: 0,
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.seed)
    }
}

/// Seed for the `index`-th independent worker under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.random()
}

/// Flips every bit independently with the channel's flip probability.
pub fn transmit(bits: &BitSlice<u8, Msb0>, spec: &ChannelSpec) -> Bits {
    let mut rng = spec.rng();
    transmit_with(bits, spec.flip_probability, &mut rng)
}

pub(crate) fn transmit_with<R: Rng>(bits: &BitSlice<u8, Msb0>, mu: f64, rng: &mut R) -> Bits {
    let mut out = bits.to_bitvec();
    if mu <= 0.0 {
        return out;
    }
    if mu >= 1.0 {
        out = !out;
        return out;
    }
    let flip = Bernoulli::new(mu).expect("probability checked above");
    for mut b in out.iter_mut() {
        if flip.sample(rng) {
            let v = *b;
            *b = !v;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "bpsk-awgn")]
    BpskAwgn,
    #[serde(rename = "bpsk-rayleigh")]
    BpskRayleigh,
}

impl FromStr for Modulation {
    type Err = IaqError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bpsk-awgn" => Ok(Modulation::BpskAwgn),
            "bpsk-rayleigh" => Ok(Modulation::BpskRayleigh),
            other => Err(IaqError::UnsupportedScheme(other.to_string())),
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::BpskAwgn => "bpsk-awgn",
            Modulation::BpskRayleigh => "bpsk-rayleigh",
        })
    }
}

/// Gaussian tail probability Q(x).
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Uncoded BPSK bit error rate at `snr_db`. Advisory: solvers take the flip
/// probability directly.
pub fn ber_from_snr(snr_db: f64, scheme: Modulation) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    match scheme {
        Modulation::BpskAwgn => gaussian_tail((2.0 * snr).sqrt()),
        Modulation::BpskRayleigh => {
            if snr.is_infinite() {
                0.0
            } else {
                0.5 * (1.0 - (snr / (1.0 + snr)).sqrt())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(n: usize) -> Bits {
        (0..n).map(|i| (i * 7 + i / 3) % 5 < 2).collect()
    }

    #[test]
    fn identity_and_complement() {
        let bits = pattern(1000);
        let spec = ChannelSpec::new(0.0, 9).unwrap();
        assert_eq!(transmit(&bits, &spec), bits);
        let spec = ChannelSpec::new(1.0, 9).unwrap();
        let out = transmit(&bits, &spec);
        assert_eq!(out.len(), bits.len());
        assert!(out.iter().zip(bits.iter()).all(|(a, b)| *a != *b));
    }

    #[test]
    fn deterministic_per_seed() {
        let bits = pattern(10_000);
        let a = transmit(&bits, &ChannelSpec::new(0.1, 42).unwrap());
        let b = transmit(&bits, &ChannelSpec::new(0.1, 42).unwrap());
        let c = transmit(&bits, &ChannelSpec::new(0.1, 43).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let s: Vec<u64> = (0..64).map(|i| derive_seed(5, i)).collect();
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), s.len());
        assert_eq!(derive_seed(5, 3), s[3]);
    }

    #[test]
    fn rejects_bad_probability() {
        assert!(ChannelSpec::new(-0.1, 0).is_err());
        assert!(ChannelSpec::new(1.5, 0).is_err());
    }

    #[test]
    fn ber_asymptotes() {
        for scheme in [Modulation::BpskAwgn, Modulation::BpskRayleigh] {
            assert!(ber_from_snr(60.0, scheme) < 1e-6);
            assert_eq!(ber_from_snr(f64::INFINITY, scheme), 0.0);
            assert!((ber_from_snr(f64::NEG_INFINITY, scheme) - 0.5).abs() < 1e-15);
        }
        assert!("qam16".parse::<Modulation>().is_err());
        assert_eq!("bpsk-awgn".parse::<Modulation>().unwrap(), Modulation::BpskAwgn);
    }

    #[test]
    fn awgn_matches_numerical_tail_integral() {
        // Q(√2) = ∫_{√2}^{∞} φ(t) dt, by composite Simpson on [√2, 40]
        let a = std::f64::consts::SQRT_2;
        let b = 40.0;
        let n = 200_000;
        let h = (b - a) / n as f64;
        let phi = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut sum = phi(a) + phi(b);
        for k in 1..n {
            let t = a + k as f64 * h;
            sum += if k % 2 == 1 { 4.0 } else { 2.0 } * phi(t);
        }
        let integral = sum * h / 3.0;
        assert!((ber_from_snr(0.0, Modulation::BpskAwgn) - integral).abs() < 1e-9);
    }
}
