//! BPSK transmission over an AWGN channel and channel LLRs.
//!
//! Conventions (fixed for the whole crate): bit 0 maps to +1, bit 1 to -1;
//! SNR means Eb/N0 with rate correction, `sigma^2 = 1 / (2 R 10^(SNR/10))`;
//! the LLR is `log Pr(c=1|y) / Pr(c=0|y)`, which for this mapping is
//! `l = -2 y / sigma^2`. Negative LLR therefore favors bit 0.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Smallest sigma accepted by LLR computation; guards division overflow.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("sigma {0} below floor {SIGMA_FLOOR}")]
    SigmaBelowFloor(f64),
}

/// Noise standard deviation for an Eb/N0 of `snr_db` at code rate `rate`.
pub fn snr_to_sigma(snr_db: f64, rate: f64) -> Result<f64, ChannelError> {
    if rate <= 0.0 {
        return Err(ChannelError::NonPositiveRate(rate));
    }
    Ok((1.0 / (2.0 * rate * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// Channel LLRs `l = -2 y / sigma^2`. Errors when sigma is below the floor.
pub fn llr(y: &[f64], sigma: f64) -> Result<Vec<f64>, ChannelError> {
    if sigma < SIGMA_FLOOR {
        return Err(ChannelError::SigmaBelowFloor(sigma));
    }
    let scale = -2.0 / (sigma * sigma);
    Ok(y.iter().map(|&yv| scale * yv).collect())
}

/// One transmitted frame: codeword, channel output, LLRs and noise level.
#[derive(Debug, Clone)]
pub struct ChannelSample {
    pub c: Vec<u8>,
    pub y: Vec<f64>,
    pub l: Vec<f64>,
    pub snr_db: f64,
    pub sigma: f64,
}

/// A BPSK/AWGN channel at a fixed noise level.
#[derive(Debug, Clone, Copy)]
pub struct AwgnChannel {
    pub snr_db: f64,
    pub sigma: f64,
}

impl AwgnChannel {
    /// Channel at Eb/N0 `snr_db` for a code of rate `rate`.
    pub fn from_snr(snr_db: f64, rate: f64) -> Result<Self, ChannelError> {
        Ok(Self { snr_db, sigma: snr_to_sigma(snr_db, rate)? })
    }

    /// Channel at an explicit sigma (sigma 0 is the noiseless limit; LLRs are
    /// then evaluated at the sigma floor).
    pub fn from_sigma(sigma: f64, snr_db: f64) -> Self {
        Self { snr_db, sigma }
    }

    /// Transmit codeword `c`: `y_v = (1 - 2 c_v) + sigma g_v` with i.i.d.
    /// standard normal `g_v`, and fill in the LLRs.
    pub fn transmit<R: Rng>(&self, c: &[u8], rng: &mut R) -> ChannelSample {
        let y: Vec<f64> = c
            .iter()
            .map(|&b| {
                let s = 1.0 - 2.0 * b as f64;
                let g: f64 = rng.sample(StandardNormal);
                s + self.sigma * g
            })
            .collect();
        let sigma_eff = self.sigma.max(SIGMA_FLOOR);
        let l = llr(&y, sigma_eff).expect("sigma_eff is at least the floor");
        ChannelSample { c: c.to_vec(), y, l, snr_db: self.snr_db, sigma: self.sigma }
    }
}

/// Deterministic per-stream RNG derived from a master seed and two counters
/// (e.g. `(step, sample)` in training or `(0, frame)` in evaluation).
/// Independent streams make frame-parallel simulation order-independent.
pub fn stream_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    // splitmix64 over the three words, folded into a 256-bit seed.
    let mut state = seed ^ 0x9e3779b97f4a7c15;
    let mut mix = |v: u64| {
        state = state.wrapping_add(0x9e3779b97f4a7c15).wrapping_add(v);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    let mut key = [0u8; 32];
    let words = [mix(a), mix(b), mix(a ^ b.rotate_left(17)), mix(!a)];
    for (i, w) in words.iter().enumerate() {
        key[i * 8..(i + 1) * 8].copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigma_examples() {
        assert!((snr_to_sigma(0.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        let s = snr_to_sigma(10.0, 1.0).unwrap();
        assert!((s - (1.0 / 20.0f64).sqrt()).abs() < 1e-15);
        assert!((s - 0.22360679774997896).abs() < 1e-12);
        // sigma -> 0 as SNR grows.
        assert!(snr_to_sigma(100.0, 0.5).unwrap() < 1e-4);
    }

    #[test]
    fn non_positive_rate_rejected() {
        assert!(matches!(snr_to_sigma(1.0, 0.0), Err(ChannelError::NonPositiveRate(_))));
        assert!(matches!(snr_to_sigma(1.0, -0.5), Err(ChannelError::NonPositiveRate(_))));
    }

    #[test]
    fn llr_examples() {
        assert_eq!(llr(&[1.0], 1.0).unwrap(), vec![-2.0]);
        assert_eq!(llr(&[0.0], 1.0).unwrap(), vec![0.0]);
        assert_eq!(llr(&[-1.0], 1.0).unwrap(), vec![2.0]);
        assert!(matches!(llr(&[1.0], 1e-9), Err(ChannelError::SigmaBelowFloor(_))));
    }

    #[test]
    fn noiseless_transmission() {
        let ch = AwgnChannel::from_sigma(0.0, f64::INFINITY);
        let mut rng = stream_rng(1, 0, 0);
        let s = ch.transmit(&[0, 0, 0], &mut rng);
        assert_eq!(s.y, vec![1.0, 1.0, 1.0]);
        // LLRs evaluated at the sigma floor: -2 / floor^2, strongly negative.
        let expected = -2.0 / (SIGMA_FLOOR * SIGMA_FLOOR);
        assert!(s.l.iter().all(|&lv| (lv - expected).abs() < 1.0));

        let s1 = ch.transmit(&[1], &mut rng);
        assert_eq!(s1.y, vec![-1.0]);
        assert!(s1.l[0] > 0.0, "bit 1 must be favored by positive LLR");
    }

    #[test]
    fn empirical_mean_matches_bpsk_symbol() {
        let ch = AwgnChannel::from_sigma(1.0, 0.0);
        let mut rng = stream_rng(7, 0, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += ch.transmit(&[0], &mut rng).y[0];
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean = {mean}");
    }

    #[test]
    fn identical_seed_identical_output() {
        let ch = AwgnChannel::from_snr(2.0, 0.5).unwrap();
        let a = ch.transmit(&[0; 16], &mut stream_rng(42, 3, 9));
        let b = ch.transmit(&[0; 16], &mut stream_rng(42, 3, 9));
        assert_eq!(a.y, b.y);
        assert_eq!(a.l, b.l);
        let c = ch.transmit(&[0; 16], &mut stream_rng(42, 3, 10));
        assert_ne!(a.y, c.y);
    }

    proptest! {
        #[test]
        fn llr_sign_equivariance(y in proptest::collection::vec(-10.0f64..10.0, 1..20), sigma in 0.1f64..3.0) {
            let pos = llr(&y, sigma).unwrap();
            let neg_y: Vec<f64> = y.iter().map(|v| -v).collect();
            let neg = llr(&neg_y, sigma).unwrap();
            for (a, b) in pos.iter().zip(&neg) {
                prop_assert_eq!(*a, -*b);
            }
        }

        // Transmitting c with noise g equals the zero-codeword output with the
        // same g, sign-flipped per component by (-1)^{c_v}.
        #[test]
        fn codeword_sign_relation(seed in 0u64..200, bits in proptest::collection::vec(0u8..2, 4..12)) {
            let ch = AwgnChannel::from_snr(3.0, 0.5).unwrap();
            let zero = vec![0u8; bits.len()];
            let s_c = ch.transmit(&bits, &mut stream_rng(seed, 0, 0));
            let s_0 = ch.transmit(&zero, &mut stream_rng(seed, 0, 0));
            for v in 0..bits.len() {
                let sign = if bits[v] == 1 { -1.0 } else { 1.0 };
                // y_c = s + sigma g and y_0 = 1 + sigma g share g, so
                // l_c = sign * l_0 only after moving the mean; check the noise
                // component instead: y_c - sign(c) == y_0 - 1.
                let noise_c = s_c.y[v] - sign;
                let noise_0 = s_0.y[v] - 1.0;
                prop_assert!((noise_c - noise_0).abs() < 1e-12);
            }
        }
    }
}
