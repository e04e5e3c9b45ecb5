//! Capacity-matched bit budgets and the uniform quantization-noise model.
//!
//! Closed-form quantities use the real-valued bit count that meets the
//! channel capacity with equality. The sample-path quantizer can only use
//! whole bits and takes `floor` of that count.

use crate::error::{Error, Result};

/// Bits per channel use that a link with power `p` can carry:
/// `1/2 log2(1 + p h^2 / zeta)`.
pub fn capacity_bits(p: f64, h: f64, zeta: f64) -> f64 {
    0.5 * (p * h * h / zeta).ln_1p() / std::f64::consts::LN_2
}

/// Quantization-noise variance `U^2 / (3 * 4^L)` with `L` at capacity,
/// which simplifies to `U^2 / (3 (1 + p h^2 / zeta))`.
pub fn quant_noise_var(p: f64, h: f64, zeta: f64, u: f64) -> f64 {
    u * u / (3.0 * (1.0 + p * h * h / zeta))
}

/// Noise variance of a uniform quantizer spending `bits` on `[0, 2U]`.
pub fn noise_var_for_bits(bits: f64, u: f64) -> f64 {
    u * u / (3.0 * 4f64.powf(bits))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantSpec {
    pub bits_real: f64,
    pub bits_int: u32,
    pub noise_var: f64,
    pub censored: bool,
}

impl QuantSpec {
    /// Spec for a link driven at power `p`. Zero power censors the sensor.
    pub fn from_power(p: f64, h: f64, zeta: f64, u: f64) -> Self {
        if p <= 0.0 {
            return Self {
                bits_real: 0.0,
                bits_int: 0,
                noise_var: u * u / 3.0,
                censored: true,
            };
        }
        let bits_real = capacity_bits(p, h, zeta);
        Self {
            bits_real,
            bits_int: bits_real.floor() as u32,
            noise_var: quant_noise_var(p, h, zeta, u),
            censored: false,
        }
    }

    /// Whether the whole-bit quantizer has at least one bit to send.
    pub fn transmits(&self) -> bool {
        !self.censored && self.bits_int >= 1
    }

    /// Noise variance of the whole-bit quantizer actually used on the sample path.
    pub fn sample_path_noise_var(&self, u: f64) -> f64 {
        noise_var_for_bits(self.bits_int as f64, u)
    }
}

/// Midrise uniform quantizer over `[lo, hi]` with `2^bits` cells; inputs are
/// clipped to the range first and mapped to their cell midpoint.
pub fn quantize_midrise(t: f64, lo: f64, hi: f64, bits: u32) -> f64 {
    let levels = (1u64 << bits.min(62)) as f64;
    let width = (hi - lo) / levels;
    let clipped = t.clamp(lo, hi);
    let cell = ((clipped - lo) / width).floor().min(levels - 1.0);
    lo + (cell + 0.5) * width
}

/// Quantizes an energy statistic on `[0, 2U]`.
pub fn quantize_statistic(t: f64, spec: &QuantSpec, u: f64) -> Result<f64> {
    if spec.censored {
        return Err(Error::Usage("censored sensors transmit nothing".into()));
    }
    if spec.bits_int == 0 {
        return Err(Error::Usage(
            "zero-bit quantizer; exclude this sensor from fusion".into(),
        ));
    }
    Ok(quantize_midrise(t, 0.0, 2.0 * u, spec.bits_int))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity_bits(0.0, 0.7, 0.1), 0.0);
        assert!((capacity_bits(1.0, 1.0, 0.1) - 1.729_715_809_318_648_6).abs() < 1e-12);
        // p h^2 / zeta = 3
        assert!((capacity_bits(0.3, 1.0, 0.1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_examples() {
        assert!((quant_noise_var(0.0, 1.0, 0.1, 3.0) - 3.0).abs() < 1e-15);
        assert!((quant_noise_var(1.0, 1.0, 0.1, 3.0) - 9.0 / 33.0).abs() < 1e-15);
        assert!(quant_noise_var(100.0, 1.0, 0.1, 3.0) < 9.0 / 3000.0);
    }

    #[test]
    fn integer_bits_consistency() {
        for bits in 0..12 {
            // p chosen so that 1 + p h^2/zeta = 4^bits
            let p = (4f64.powi(bits) - 1.0) * 0.1;
            let spec = QuantSpec::from_power(p.max(0.0), 1.0, 0.1, 3.0);
            let want = 9.0 / (3.0 * 4f64.powi(bits));
            assert!((quant_noise_var(p, 1.0, 0.1, 3.0) - want).abs() <= 1e-14 * want);
            if bits > 0 {
                assert!((spec.bits_real - bits as f64).abs() < 1e-12);
                assert!((spec.noise_var - want).abs() <= 1e-14 * want);
            }
        }
    }

    #[test]
    fn spec_invariants() {
        let s = QuantSpec::from_power(0.0, 1.0, 0.1, 3.0);
        assert!(s.censored && s.bits_int == 0 && !s.transmits());
        for p in [1e-4, 0.05, 0.3, 1.0, 7.0, 1e3] {
            let s = QuantSpec::from_power(p, 0.8, 0.1, 3.0);
            assert!(!s.censored);
            assert!((s.bits_int as f64) <= s.bits_real && s.bits_real < s.bits_int as f64 + 1.0);
            assert!(
                (s.noise_var - noise_var_for_bits(s.bits_real, 3.0)).abs() <= 1e-12 * s.noise_var
            );
        }
    }

    #[test]
    fn quantizer_examples() {
        let one_bit = QuantSpec {
            bits_real: 1.2,
            bits_int: 1,
            noise_var: 0.0,
            censored: false,
        };
        assert_eq!(quantize_statistic(0.0, &one_bit, 3.0).unwrap(), 1.5);
        assert_eq!(quantize_statistic(4.0, &one_bit, 3.0).unwrap(), 4.5);
        let four = QuantSpec {
            bits_int: 4,
            ..one_bit
        };
        assert_eq!(
            quantize_statistic(11.0, &four, 3.0).unwrap(),
            quantize_statistic(6.0, &four, 3.0).unwrap()
        );
        let censored = QuantSpec::from_power(0.0, 1.0, 0.1, 3.0);
        assert!(quantize_statistic(1.0, &censored, 3.0).is_err());
        let zero_bits = QuantSpec::from_power(0.01, 1.0, 0.1, 3.0);
        assert_eq!(zero_bits.bits_int, 0);
        assert!(quantize_statistic(1.0, &zero_bits, 3.0).is_err());
    }

    #[test]
    fn quantizer_error_matches_uniform_model() {
        let u = 3.0;
        let bits = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let t: f64 = rng.random::<f64>() * 2.0 * u;
            let e = quantize_midrise(t, 0.0, 2.0 * u, bits) - t;
            assert!(e.abs() <= u / 16.0 + 1e-12);
            sum += e;
            sum2 += e * e;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        let want = (2.0 * u / 16.0f64).powi(2) / 12.0;
        assert!((var / want - 1.0).abs() < 0.05, "var {var} want {want}");
        // and the closed-form variance agrees with it
        assert!((noise_var_for_bits(4.0, u) - want).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn noise_strictly_decreasing(p1 in 0.0f64..100.0, dp in 1e-6f64..100.0, h in 0.05f64..3.0, u in 0.1f64..10.0) {
            proptest::prop_assert!(quant_noise_var(p1, h, 0.1, u) > quant_noise_var(p1 + dp, h, 0.1, u));
        }

        #[test]
        fn capacity_increasing_and_concave(p in 0.0f64..50.0, h in 0.05f64..3.0) {
            let d = 1e-3;
            let (a, b, c) = (capacity_bits(p, h, 0.1), capacity_bits(p + d, h, 0.1), capacity_bits(p + 2.0 * d, h, 0.1));
            proptest::prop_assert!(b > a);
            proptest::prop_assert!(c - 2.0 * b + a <= 1e-12);
        }
    }
}
