//! Channel models and information-theoretic reference numbers.
//!
//! The dirty-paper channel is `Y = X + S + N` with the interference `S`
//! known only at the transmitter. Seeded generators make every noise,
//! interference and dither sequence reproducible bit for bit.

use crate::error::{Error, Result};
use crate::real::{r, Real};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Additive white Gaussian noise source with fixed per-symbol variance.
#[derive(Clone, Debug)]
pub struct GaussianChannel<R: Real = f64> {
    noise_var: R,
    rng: ChaCha8Rng,
}

impl<R: Real> GaussianChannel<R> {
    pub fn new(noise_var: R, seed: u64) -> Result<Self> {
        if !(noise_var >= R::zero()) || !noise_var.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise variance {noise_var} must be finite and non-negative"
            )));
        }
        Ok(Self {
            noise_var,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0xc4a9),
        })
    }

    pub fn noise_var(&self) -> R {
        self.noise_var
    }

    /// `Y = X + S + N`. Pass an empty interference slice for plain AWGN.
    pub fn dirty_paper(&mut self, x: &[R], s: &[R]) -> Result<Vec<R>> {
        if !s.is_empty() && s.len() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "interference has {} entries for {} symbols",
                s.len(),
                x.len()
            )));
        }
        let sigma = self.noise_var.sqrt();
        Ok(x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                let si = if s.is_empty() { R::zero() } else { s[i] };
                xi + si + sigma * R::std_normal(&mut self.rng)
            })
            .collect())
    }
}

/// Seeded i.i.d. Gaussian interference of power `p_s`.
#[derive(Clone, Debug)]
pub struct InterferenceSource<R: Real = f64> {
    sigma: R,
    rng: ChaCha8Rng,
}

impl<R: Real> InterferenceSource<R> {
    pub fn new(p_s: R, seed: u64) -> Result<Self> {
        if !(p_s >= R::zero()) || !p_s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "interference power {p_s} must be finite and non-negative"
            )));
        }
        Ok(Self {
            sigma: p_s.sqrt(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x51f0),
        })
    }

    pub fn next_block(&mut self, len: usize) -> Vec<R> {
        (0..len)
            .map(|_| self.sigma * R::std_normal(&mut self.rng))
            .collect()
    }
}

/// Shared dither: off, or per-symbol uniform on `[-M/2, M/2)` derived from
/// a common seed so transmitter and receiver see the same sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DitherMode {
    #[default]
    Off,
    Uniform,
}

#[derive(Clone, Debug)]
pub struct DitherSource<R: Real = f64> {
    mode: DitherMode,
    seed: u64,
    m: usize,
    _marker: std::marker::PhantomData<R>,
}

impl<R: Real> DitherSource<R> {
    pub fn new(mode: DitherMode, seed: u64, m: usize) -> Self {
        Self {
            mode,
            seed,
            m,
            _marker: std::marker::PhantomData,
        }
    }

    pub fn mode(&self) -> DitherMode {
        self.mode
    }

    /// Dither vector for one block; block-indexed so encoder and decoder
    /// stay aligned without sharing generator state.
    pub fn block(&self, block_index: u64, len: usize) -> Vec<R> {
        match self.mode {
            DitherMode::Off => vec![R::zero(); len],
            DitherMode::Uniform => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(self.seed ^ 0xd17e ^ block_index.wrapping_mul(0x9e37));
                let m: R = r(self.m as f64);
                let half = m / r(2.0);
                (0..len)
                    .map(|_| R::unit_uniform(&mut rng) * m - half)
                    .collect()
            }
        }
    }
}

/// SNR (dB) at which the real-AWGN capacity equals `rate_bits`:
/// `10 log10(2^(2 rate) - 1)`.
pub fn awgn_capacity_snr_for_rate(rate_bits: f64) -> f64 {
    10.0 * (2f64.powf(2.0 * rate_bits) - 1.0).log10()
}

/// One boundary point of the two-user degraded broadcast capacity region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BcRatePoint {
    pub beta: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Superposition capacity region boundary for total power `p` and noise
/// powers `p_n1 > p_n2`, swept over `beta_grid` power splits:
/// `R1 = 1/2 log2(1 + (1-b)P / (bP + P_N1))`, `R2 = 1/2 log2(1 + bP / P_N2)`.
pub fn bc_capacity_region(
    p: f64,
    p_n1: f64,
    p_n2: f64,
    beta_grid: &[f64],
) -> Result<Vec<BcRatePoint>> {
    if !(p_n1 > p_n2) || p_n2 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "degradedness requires P_N1 > P_N2 > 0, got {p_n1}, {p_n2}"
        )));
    }
    if p <= 0.0 {
        return Err(Error::InvalidParameter("total power must be positive".into()));
    }
    beta_grid
        .iter()
        .map(|&beta| {
            if !(0.0..=1.0).contains(&beta) {
                return Err(Error::InvalidParameter(format!(
                    "beta {beta} outside [0, 1]"
                )));
            }
            Ok(BcRatePoint {
                beta,
                r1: 0.5 * (1.0 + (1.0 - beta) * p / (beta * p + p_n1)).log2(),
                r2: 0.5 * (1.0 + beta * p / p_n2).log2(),
            })
        })
        .collect()
}

/// True iff `(r1, r2)` lies strictly outside the time-sharing chord between
/// the two single-user corner points of the region.
pub fn outside_time_sharing(points: &[BcRatePoint], r1: f64, r2: f64) -> bool {
    let r1_max = points
        .iter()
        .map(|p| p.r1)
        .fold(f64::NEG_INFINITY, f64::max);
    let r2_max = points
        .iter()
        .map(|p| p.r2)
        .fold(f64::NEG_INFINITY, f64::max);
    r1 / r1_max + r2 / r2_max > 1.0
}

/// Shaping figures of merit from a measured transmit power.
///
/// `c_star` is the constellation rate in bits/symbol before channel coding;
/// `s_x` the measured per-symbol transmit power. The granular gain compares
/// `s_x` against the rate-matched uniform reference `2^(2 c_star) / 12`
/// (continuous uniform over an interval carrying `c_star` bits at unit
/// spacing); equivalently the normalized second moment is
/// `G = s_x / 2^(2 c_star) = 1 / (12 gain)`, bounded below by `1/(2 pi e)`.
/// The residual loss at finite rate is
/// `loss = 10 log10((2 pi e G 2^(2 c_star) - 1) / (2^(2 c_star) - 1))`.
pub fn granular_gain_and_shaping_loss(c_star: f64, s_x: f64) -> (f64, f64) {
    assert!(s_x > 0.0, "measured transmit power must be positive");
    let two_2c = 2f64.powf(2.0 * c_star);
    let gain_linear = two_2c / (12.0 * s_x);
    let gain_db = 10.0 * gain_linear.log10();
    let g_norm = 1.0 / (12.0 * gain_linear);
    let loss_db =
        10.0 * ((2.0 * std::f64::consts::PI * std::f64::consts::E * g_norm * two_2c - 1.0)
            / (two_2c - 1.0))
            .log10();
    (gain_db, loss_db)
}

/// Ultimate granular gain of an ideal (spherical) shaping region:
/// `10 log10(pi e / 6) ~ 1.53 dB`.
pub fn ultimate_shaping_gain_db() -> f64 {
    10.0 * (std::f64::consts::PI * std::f64::consts::E / 6.0).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_channel_is_exact_sum() {
        let mut ch = GaussianChannel::<f64>::new(0.0, 1).unwrap();
        let x = vec![1.5, -2.0, 0.25];
        let s = vec![10.0, -3.0, 0.0];
        assert_eq!(ch.dirty_paper(&x, &s).unwrap(), vec![11.5, -5.0, 0.25]);
        // S omitted: plain AWGN reduction.
        assert_eq!(ch.dirty_paper(&x, &[]).unwrap(), x);
    }

    #[test]
    fn channel_rejects_mismatched_lengths() {
        let mut ch = GaussianChannel::<f64>::new(1.0, 1).unwrap();
        assert!(ch.dirty_paper(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn noise_moment_matches_variance() {
        let p_n = 0.37;
        let mut ch = GaussianChannel::<f64>::new(p_n, 77).unwrap();
        let n = 1_000_000usize;
        let x = vec![0.0f64; n];
        let y = ch.dirty_paper(&x, &[]).unwrap();
        let second: f64 = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
        // Var of the second-moment estimator: 2 p_n^2 / n.
        let std_err = (2.0 * p_n * p_n / n as f64).sqrt();
        assert!(
            (second - p_n).abs() < 3.0 * std_err,
            "second moment {second} vs {p_n} (3se = {})",
            3.0 * std_err
        );
    }

    #[test]
    fn seeded_streams_are_reproducible() {
        let mut a = GaussianChannel::<f64>::new(1.0, 9).unwrap();
        let mut b = GaussianChannel::<f64>::new(1.0, 9).unwrap();
        let x = vec![0.0; 64];
        assert_eq!(a.dirty_paper(&x, &[]).unwrap(), b.dirty_paper(&x, &[]).unwrap());
        let mut c = GaussianChannel::<f64>::new(1.0, 10).unwrap();
        assert_ne!(a.dirty_paper(&x, &[]).unwrap(), c.dirty_paper(&x, &[]).unwrap());

        let mut i1 = InterferenceSource::<f64>::new(5.0, 3).unwrap();
        let mut i2 = InterferenceSource::<f64>::new(5.0, 3).unwrap();
        assert_eq!(i1.next_block(32), i2.next_block(32));
    }

    #[test]
    fn dither_modes() {
        let off = DitherSource::<f64>::new(DitherMode::Off, 5, 16);
        assert!(off.block(3, 8).iter().all(|&u| u == 0.0));
        let on = DitherSource::<f64>::new(DitherMode::Uniform, 5, 16);
        let b0 = on.block(0, 1000);
        assert!(b0.iter().all(|&u| (-8.0..8.0).contains(&u)));
        // Same block index reproduces; different index does not.
        assert_eq!(on.block(0, 1000), b0);
        assert_ne!(on.block(1, 1000), b0);
        let mean = b0.iter().sum::<f64>() / 1000.0;
        assert!(mean.abs() < 0.8);
    }

    #[test]
    fn capacity_reference_values() {
        assert!((awgn_capacity_snr_for_rate(3.0) - 17.9934).abs() < 0.01);
        assert!(awgn_capacity_snr_for_rate(0.5).abs() < 1e-12);
        assert!((awgn_capacity_snr_for_rate(1.0) - 4.7712).abs() < 1e-3);
    }

    #[test]
    fn region_corners() {
        let p = 700.0;
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let pts = bc_capacity_region(p, 0.9, 0.09, &grid).unwrap();
        let first = pts.first().unwrap();
        assert_eq!(first.beta, 0.0);
        assert!(first.r2.abs() < 1e-12);
        assert!((first.r1 - 0.5 * (1.0 + p / 0.9).log2()).abs() < 1e-12);
        let last = pts.last().unwrap();
        assert_eq!(last.beta, 1.0);
        assert!(last.r1.abs() < 1e-12);
    }

    #[test]
    fn degradedness_orders_user2_rate() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let strong = bc_capacity_region(500.0, 0.9, 0.09, &grid).unwrap();
        // Same beta but computed with the weaker receiver's noise.
        let weak = bc_capacity_region(500.0, 0.91, 0.9, &grid).unwrap();
        for (s, w) in strong.iter().zip(&weak) {
            assert!(s.r2 >= w.r2);
        }
    }

    #[test]
    fn region_validation() {
        assert!(bc_capacity_region(10.0, 0.09, 0.9, &[0.5]).is_err());
        assert!(bc_capacity_region(10.0, 0.9, 0.09, &[1.5]).is_err());
        assert!(bc_capacity_region(-1.0, 0.9, 0.09, &[0.5]).is_err());
    }

    #[test]
    fn gain_zero_at_uniform_reference() {
        let c_star = 3.5;
        let s_x = 2f64.powf(2.0 * c_star) / 12.0;
        let (gain, loss) = granular_gain_and_shaping_loss(c_star, s_x);
        assert!(gain.abs() < 1e-12);
        // Plug-in value at gain 0: G = 1/12.
        let two_2c = 2f64.powf(2.0 * c_star);
        let want = 10.0
            * ((2.0 * std::f64::consts::PI * std::f64::consts::E / 12.0 * two_2c - 1.0)
                / (two_2c - 1.0))
                .log10();
        assert!((loss - want).abs() < 1e-12);
    }

    #[test]
    fn gain_loss_closed_form_cross_check() {
        // Ultimate gain minus measured gain approximates the finite-rate
        // loss within 0.01 dB near the operating point.
        let c_star = 3.5;
        for gain_db in [1.25, 1.282, 1.31] {
            let gain_linear = 10f64.powf(gain_db / 10.0);
            let s_x = 2f64.powf(2.0 * c_star) / (12.0 * gain_linear);
            let (g, loss) = granular_gain_and_shaping_loss(c_star, s_x);
            assert!((g - gain_db).abs() < 1e-9);
            let naive = ultimate_shaping_gain_db() - gain_db;
            assert!(
                (naive - loss).abs() < 0.01,
                "gain {gain_db}: naive {naive} vs loss {loss}"
            );
        }
    }

    #[test]
    fn gain_bound_sanity() {
        // Rate bound stays below plain capacity whenever G >= 1/(2 pi e).
        for g_norm in [1.0 / 12.0, 0.07, 1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::E)] {
            let penalty = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * g_norm).log2();
            assert!(penalty >= -1e-12);
        }
    }

    #[test]
    fn time_sharing_test_geometry() {
        let pts = vec![
            BcRatePoint { beta: 0.0, r1: 4.0, r2: 0.0 },
            BcRatePoint { beta: 1.0, r1: 0.0, r2: 6.0 },
        ];
        assert!(outside_time_sharing(&pts, 3.0, 3.0)); // 0.75 + 0.5 > 1
        assert!(!outside_time_sharing(&pts, 2.0, 3.0)); // 0.5 + 0.5 = 1
    }
}
