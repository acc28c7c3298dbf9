//! Two-user Gaussian broadcast superposition built on the DPC pipeline.
//!
//! User 1 (the far receiver, noise `P_N1`) is shaped and LDPC-coded with no
//! interference; its signal is scaled to power `(1-beta) P`. User 2 (the
//! near receiver, `P_N2 < P_N1`) is DPC-coded treating User 1's transmitted
//! signal as known interference, at power `beta P`. Receiver 1 demaps with
//! a Gaussian prior over its own shaped constellation and treats User 2
//! plus noise as Gaussian clutter; Receiver 2 runs the standard DPC
//! receiver.
//!
//! Both encoders run at unit symbol spacing internally; a per-user scale
//! factor meets the power split and is undone before demapping. The unit
//! powers are measured during calibration, not assumed.

use crate::channel::GaussianChannel;
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::modulation::gaussian_prior;
use crate::pipeline::{
    decode_block, decode_block_with, encode_block, DecodedBlock, DecoderState, DemapSpec,
    DpcSystem, DpcSystemParams, EncoderState, SystemOptions,
};
use crate::real::{r, Real};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Broadcast configuration: shared block structure plus the power split.
#[derive(Clone, Debug)]
pub struct BcConfig<R: Real = f64> {
    pub n: usize,
    pub k: usize,
    pub k_prime: usize,
    pub m_pam: usize,
    /// Total transmit power `P`.
    pub total_power: R,
    /// Power split: `P_X2 = beta P` for the DPC user.
    pub beta: R,
    pub p_n1: R,
    pub p_n2: R,
}

impl<R: Real> BcConfig<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_n1 > self.p_n2) || !(self.p_n2 > R::zero()) {
            return Err(Error::InvalidParameter(format!(
                "degraded broadcast needs P_N1 > P_N2 > 0, got {} and {}",
                self.p_n1, self.p_n2
            )));
        }
        if !(self.beta >= R::zero()) || self.beta >= R::one() {
            return Err(Error::InvalidParameter(format!(
                "beta = {} outside [0, 1)",
                self.beta
            )));
        }
        if !(self.total_power > R::zero()) {
            return Err(Error::InvalidParameter(
                "total power must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn p_x1(&self) -> R {
        (R::one() - self.beta) * self.total_power
    }

    pub fn p_x2(&self) -> R {
        self.beta * self.total_power
    }

    /// Effective SNR at Receiver 1: `P_X1 / (P_X2 + P_N1)`, in dB.
    pub fn snr1_db(&self) -> f64 {
        10.0 * (self.p_x1() / (self.p_x2() + self.p_n1))
            .to_f64()
            .unwrap()
            .log10()
    }

    /// Effective SNR at Receiver 2 after DPC: `P_X2 / P_N2`, in dB.
    pub fn snr2_db(&self) -> f64 {
        10.0 * (self.p_x2() / self.p_n2).to_f64().unwrap().log10()
    }
}

/// Closed-form power split hitting both users' required effective SNRs:
/// `P_X2 = P_N2 10^(snr2/10)`, `P_X1 = (P_X2 + P_N1) 10^(snr1/10)`.
///
/// Returns `(beta, total_power)`. This is the fixed point the equal-margin
/// bisection converges to once the per-user required SNRs are known.
pub fn solve_power_split(p_n1: f64, p_n2: f64, snr1_db: f64, snr2_db: f64) -> (f64, f64) {
    let p_x2 = p_n2 * 10f64.powf(snr2_db / 10.0);
    let p_x1 = (p_x2 + p_n1) * 10f64.powf(snr1_db / 10.0);
    let p = p_x1 + p_x2;
    (p_x2 / p, p)
}

struct UserStream<R: Real> {
    sys: DpcSystem<R>,
    /// Amplitude scale from unit-spacing symbols to transmit power.
    scale: R,
    /// Measured unit-domain transmit power of the shaped symbols.
    unit_power: R,
}

/// Built broadcast transmitter/receiver pair.
pub struct BcSystem<R: Real = f64> {
    pub cfg: BcConfig<R>,
    user1: UserStream<R>,
    user2: Option<UserStream<R>>,
    prior1: Vec<R>,
}

/// Per-stream mutable state for the two users.
pub struct BcEncoderState {
    pub user1: EncoderState,
    pub user2: Option<EncoderState>,
}

pub struct BcDecoderState<R: Real> {
    pub user1: DecoderState<R>,
    pub user2: DecoderState<R>,
}

/// One transmitted superposition block.
pub struct BcEncodedBlock<R: Real> {
    pub x: Vec<R>,
    pub x1: Vec<R>,
    pub x2: Vec<R>,
}

impl<R: Real> BcSystem<R> {
    /// Build both user systems and calibrate the power scales.
    ///
    /// Calibration encodes `cal_blocks` random blocks per user to measure
    /// the unit-domain shaped power that the scale factors divide out.
    pub fn build(
        cfg: BcConfig<R>,
        seed: u64,
        options: SystemOptions,
        cal_blocks: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        let nominal: R = r(16.0);
        let one: R = R::one();

        // User 1: shaping with S = 0. Unit power does not depend on the
        // noise figure (the shaping target is zero either way).
        let params1 = DpcSystemParams::new(
            cfg.n,
            cfg.k,
            cfg.k_prime,
            cfg.m_pam,
            nominal,
            R::zero(),
            one,
        )?;
        let sys1 = DpcSystem::build(params1, seed ^ 0xb41, options.clone())?;
        let unit_power1 = measure_unit_power(&sys1, cal_blocks, seed ^ 0x77, R::zero())?;
        let scale1 = (cfg.p_x1() / unit_power1).sqrt();
        // Rebuild with the measured power so alpha and the demapper noise
        // are consistent (user 1 itself never applies alpha).
        let p_n1_unit = (cfg.p_x2() + cfg.p_n1) / (scale1 * scale1);
        let params1 = DpcSystemParams::new(
            cfg.n,
            cfg.k,
            cfg.k_prime,
            cfg.m_pam,
            unit_power1,
            R::zero(),
            p_n1_unit,
        )?;
        let sys1 = DpcSystem::build(params1, seed ^ 0xb41, options.clone())?;
        let prior1 = gaussian_prior(&sys1.mapping, unit_power1)?;

        // User 2: DPC against user 1's signal, observed in user 2's unit
        // domain. The unit shaped power is insensitive to the exact
        // interference level, so calibrate once and refine the scale once.
        let user2 = if cfg.p_x2() > R::zero() {
            let mut unit_power2 = unit_power1;
            let mut sys2 = None;
            for _ in 0..2 {
                let scale2 = (cfg.p_x2() / unit_power2).sqrt();
                let p_s_unit = cfg.p_x1() / (scale2 * scale2);
                let p_n_unit = cfg.p_n2 / (scale2 * scale2);
                let params2 = DpcSystemParams::new(
                    cfg.n,
                    cfg.k,
                    cfg.k_prime,
                    cfg.m_pam,
                    unit_power2,
                    p_s_unit,
                    p_n_unit,
                )?;
                let built = DpcSystem::build(params2, seed ^ 0xb42, options.clone())?;
                unit_power2 = measure_unit_power(&built, cal_blocks, seed ^ 0x78, p_s_unit)?;
                sys2 = Some(built);
            }
            let sys2 = sys2.unwrap();
            let scale2 = (cfg.p_x2() / unit_power2).sqrt();
            Some(UserStream {
                sys: sys2,
                scale: scale2,
                unit_power: unit_power2,
            })
        } else {
            None
        };

        Ok(Self {
            cfg,
            user1: UserStream {
                sys: sys1,
                scale: scale1,
                unit_power: unit_power1,
            },
            user2,
            prior1,
        })
    }

    pub fn user1_system(&self) -> &DpcSystem<R> {
        &self.user1.sys
    }

    pub fn user2_system(&self) -> Option<&DpcSystem<R>> {
        self.user2.as_ref().map(|u| &u.sys)
    }

    pub fn unit_powers(&self) -> (R, Option<R>) {
        (self.user1.unit_power, self.user2.as_ref().map(|u| u.unit_power))
    }

    pub fn new_encoder_state(&self) -> BcEncoderState {
        BcEncoderState {
            user1: EncoderState::new(&self.user1.sys),
            user2: self.user2.as_ref().map(|u| EncoderState::new(&u.sys)),
        }
    }

    pub fn new_decoder_state(&self) -> BcDecoderState<R> {
        BcDecoderState {
            user1: DecoderState::new(),
            user2: DecoderState::new(),
        }
    }

    /// Superpose both users: `X = X1 + X2` with `X2` DPC-coded against `X1`.
    pub fn encode(
        &self,
        state: &mut BcEncoderState,
        msg1: &BitVector,
        msg2: &BitVector,
    ) -> Result<BcEncodedBlock<R>> {
        let s = self.user1.sys.params.symbols_per_block();
        let zeros = vec![R::zero(); s];
        let b1 = encode_block(&self.user1.sys, &mut state.user1, msg1, &zeros)?;
        let x1: Vec<R> = b1.x.iter().map(|&v| v * self.user1.scale).collect();
        let (x2, x): (Vec<R>, Vec<R>) = match (&self.user2, state.user2.as_mut()) {
            (Some(u2), Some(st2)) => {
                let s_unit: Vec<R> = x1.iter().map(|&v| v / u2.scale).collect();
                let b2 = encode_block(&u2.sys, st2, msg2, &s_unit)?;
                let x2: Vec<R> = b2.x.iter().map(|&v| v * u2.scale).collect();
                let x = x1.iter().zip(&x2).map(|(&a, &b)| a + b).collect();
                (x2, x)
            }
            _ => (vec![R::zero(); s], x1.clone()),
        };
        Ok(BcEncodedBlock { x, x1, x2 })
    }

    /// Receiver 1: prior-weighted demap over the base constellation; the
    /// second user plus channel noise is treated as Gaussian at
    /// `beta P + P_N1`.
    pub fn decode_user1(
        &self,
        state: &mut DecoderState<R>,
        y1: &[R],
    ) -> Result<DecodedBlock> {
        let c1 = self.user1.scale;
        let noise_var = (self.cfg.p_x2() + self.cfg.p_n1) / (c1 * c1);
        let demap = DemapSpec::Prior {
            scale: c1.recip(),
            noise_var,
            prior: self.prior1.clone(),
        };
        decode_block_with(&self.user1.sys, state, y1, &demap)
    }

    /// Receiver 2: standard DPC receiver in user 2's unit domain.
    pub fn decode_user2(
        &self,
        state: &mut DecoderState<R>,
        y2: &[R],
    ) -> Result<DecodedBlock> {
        let Some(u2) = &self.user2 else {
            return Err(Error::InvalidParameter(
                "user 2 stream is disabled (beta = 0)".into(),
            ));
        };
        let y_unit: Vec<R> = y2.iter().map(|&v| v / u2.scale).collect();
        decode_block(&u2.sys, state, &y_unit)
    }
}

/// Mean square of the unit-domain transmit symbols over random data blocks.
pub fn measure_unit_power<R: Real>(
    sys: &DpcSystem<R>,
    blocks: usize,
    seed: u64,
    p_s_unit: R,
) -> Result<R> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9d1e);
    let mut interference = crate::channel::InterferenceSource::new(p_s_unit, seed ^ 0x3331)?;
    let mut enc = EncoderState::new(sys);
    let s = sys.params.symbols_per_block();
    let mut acc = R::zero();
    let mut count = 0usize;
    for _ in 0..blocks.max(1) {
        let msg = BitVector::random(sys.params.k, &mut rng);
        let s_vec = interference.next_block(s);
        let block = encode_block(sys, &mut enc, &msg, &s_vec)?;
        for &x in &block.x {
            acc = acc + x * x;
        }
        count += s;
    }
    Ok(acc / r(count as f64))
}

/// Result of a multi-block broadcast run.
pub struct BcRunOutcome {
    pub bit_errors_user1: u64,
    pub bit_errors_user2: u64,
    pub bits_per_user: u64,
    /// Measured powers: `(E|X1|^2, E|X2|^2, E|X|^2)`.
    pub measured_powers: (f64, f64, f64),
}

/// Encode/transmit/decode `msgs1.len()` blocks over both channels.
pub fn bc_roundtrip<R: Real>(
    sys: &BcSystem<R>,
    msgs1: &[BitVector],
    msgs2: &[BitVector],
    noise_seed: u64,
) -> Result<BcRunOutcome> {
    if msgs1.len() != msgs2.len() || msgs1.len() < 2 {
        return Err(Error::InvalidParameter(
            "broadcast run needs equal-length message lists of at least two blocks".into(),
        ));
    }
    let mut ch1 = GaussianChannel::new(sys.cfg.p_n1, noise_seed ^ 0x0111)?;
    let mut ch2 = GaussianChannel::new(sys.cfg.p_n2, noise_seed ^ 0x0222)?;
    let mut enc = sys.new_encoder_state();
    let mut dec = sys.new_decoder_state();
    let mut acc = [0.0f64; 3];
    let mut count = 0u64;
    let mut dec1 = Vec::new();
    let mut dec2 = Vec::new();
    for (m1, m2) in msgs1.iter().zip(msgs2) {
        let block = sys.encode(&mut enc, m1, m2)?;
        for i in 0..block.x.len() {
            acc[0] += block.x1[i].to_f64().unwrap().powi(2);
            acc[1] += block.x2[i].to_f64().unwrap().powi(2);
            acc[2] += block.x[i].to_f64().unwrap().powi(2);
        }
        count += block.x.len() as u64;
        let y1 = ch1.dirty_paper(&block.x, &[])?;
        let y2 = ch2.dirty_paper(&block.x, &[])?;
        match sys.decode_user1(&mut dec.user1, &y1) {
            Ok(out) => dec1.push(out.msg),
            Err(Error::NoOutputYet) => {}
            Err(e) => return Err(e),
        }
        if sys.user2.is_some() {
            match sys.decode_user2(&mut dec.user2, &y2) {
                Ok(out) => dec2.push(out.msg),
                Err(Error::NoOutputYet) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let mut e1 = 0u64;
    let mut bits = 0u64;
    for (m, m_hat) in msgs1.iter().zip(&dec1) {
        e1 += m.distance(m_hat) as u64;
        bits += m.len() as u64;
    }
    let mut e2 = 0u64;
    for (m, m_hat) in msgs2.iter().zip(&dec2) {
        e2 += m.distance(m_hat) as u64;
    }
    Ok(BcRunOutcome {
        bit_errors_user1: e1,
        bit_errors_user2: e2,
        bits_per_user: bits,
        measured_powers: (
            acc[0] / count as f64,
            acc[1] / count as f64,
            acc[2] / count as f64,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::DegreeDistribution;
    use rand::SeedableRng;

    fn small_cfg(beta: f64, total: f64) -> BcConfig<f64> {
        BcConfig {
            n: 192,
            k: 144,
            k_prime: 24,
            m_pam: 16,
            total_power: total,
            beta,
            p_n1: 0.9,
            p_n2: 0.09,
        }
    }

    fn options() -> SystemOptions {
        SystemOptions {
            chk_dist: DegreeDistribution::regular(24).unwrap(),
            ..SystemOptions::default()
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small_cfg(0.1, 100.0);
        assert!(c.validate().is_ok());
        c.p_n2 = 1.0;
        assert!(c.validate().is_err());
        let mut c = small_cfg(1.0, 100.0);
        assert!(c.validate().is_err());
        c = small_cfg(0.1, -3.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn power_split_solver() {
        let (beta, p) = solve_power_split(0.9, 0.09, 19.1791, 19.4574);
        let cfg = small_cfg(beta, p);
        assert!((cfg.snr1_db() - 19.1791).abs() < 1e-9);
        assert!((cfg.snr2_db() - 19.4574).abs() < 1e-9);
        // Figures consistent with the operating regime.
        assert!(beta > 0.005 && beta < 0.02, "beta = {beta}");
        assert!(p > 500.0 && p < 1000.0, "P = {p}");
    }

    #[test]
    fn beta_zero_disables_user2() {
        let sys = BcSystem::build(small_cfg(0.0, 4000.0), 3, options(), 20).unwrap();
        assert!(sys.user2_system().is_none());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut enc = sys.new_encoder_state();
        let m1 = BitVector::random(144, &mut rng);
        let m2 = BitVector::zeros(144);
        let block = sys.encode(&mut enc, &m1, &m2).unwrap();
        assert!(block.x2.iter().all(|&v| v == 0.0));
        assert_eq!(block.x, block.x1);
        let mut st = DecoderState::new();
        assert!(sys.decode_user2(&mut st, &block.x).is_err());

        // With the whole power budget and the channel to itself, user 1
        // recovers exactly.
        let msgs: Vec<BitVector> = (0..4).map(|_| BitVector::random(144, &mut rng)).collect();
        let zeros: Vec<BitVector> = (0..4).map(|_| BitVector::zeros(144)).collect();
        let out = bc_roundtrip(&sys, &msgs, &zeros, 9).unwrap();
        assert_eq!(out.bit_errors_user1, 0);
    }

    #[test]
    fn measured_power_split_matches_config() {
        let cfg = small_cfg(0.05, 120.0);
        let sys = BcSystem::build(cfg.clone(), 7, options(), 40).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let blocks = 60;
        let msgs1: Vec<BitVector> = (0..blocks).map(|_| BitVector::random(144, &mut rng)).collect();
        let msgs2: Vec<BitVector> = (0..blocks).map(|_| BitVector::random(144, &mut rng)).collect();
        let out = bc_roundtrip(&sys, &msgs1, &msgs2, 5).unwrap();
        let (p1, p2, p) = out.measured_powers;
        assert!(
            (p1 - cfg.p_x1()).abs() / cfg.p_x1() < 0.08,
            "P_X1 measured {p1} vs {}",
            cfg.p_x1()
        );
        assert!(
            (p2 - cfg.p_x2()).abs() / cfg.p_x2() < 0.08,
            "P_X2 measured {p2} vs {}",
            cfg.p_x2()
        );
        // Independent zero-mean streams: powers add.
        assert!((p - (p1 + p2)).abs() / p < 0.05, "additivity: {p} vs {}", p1 + p2);
    }

    #[test]
    fn noiseless_user2_and_quiet_user1_recover() {
        // Generous powers so both toy-scale users decode cleanly.
        let mut cfg = small_cfg(0.002, 40000.0);
        cfg.p_n1 = 0.9;
        cfg.p_n2 = 0.0009;
        let sys = BcSystem::build(cfg, 11, options(), 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let blocks = 4;
        let msgs1: Vec<BitVector> = (0..blocks).map(|_| BitVector::random(144, &mut rng)).collect();
        let msgs2: Vec<BitVector> = (0..blocks).map(|_| BitVector::random(144, &mut rng)).collect();
        let out = bc_roundtrip(&sys, &msgs1, &msgs2, 9).unwrap();
        assert_eq!(out.bit_errors_user2, 0);
        assert_eq!(out.bit_errors_user1, 0);
        assert_eq!(out.bits_per_user, 3 * 144);
    }
}
