//! Cross-module invariants that need a full system to state.

use dpc_core::channel::{DitherMode, GaussianChannel, InterferenceSource};
use dpc_core::gf2::BitVector;
use dpc_core::ldpc::DegreeDistribution;
use dpc_core::modulation::mod_fold;
use dpc_core::pipeline::{
    encode_block, DpcSystem, DpcSystemParams, EncoderState, SystemOptions,
};
use dpc_core::real::Real;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        let fa = i as f64 / a.len() as f64;
        let fb = j as f64 / b.len() as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

fn desk_system(p_s: f64, dither: DitherMode, seed: u64) -> DpcSystem<f64> {
    let params = DpcSystemParams::new(4000, 3000, 500, 16, 7.94, p_s, 0.0901).unwrap();
    let opts = SystemOptions {
        dither,
        ..SystemOptions::default()
    };
    DpcSystem::build(params, seed, opts).unwrap()
}

/// Collect `mod_fold(Y_hat - v, M)` samples: the equivalent-channel noise
/// seen through the modulo lattice.
fn equivalent_noise_samples(sys: &DpcSystem<f64>, p_s: f64, samples: usize, seed: u64) -> Vec<f64> {
    let s = sys.params.symbols_per_block();
    let alpha = sys.params.alpha();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut interference = InterferenceSource::<f64>::new(p_s, seed ^ 1).unwrap();
    let mut channel = GaussianChannel::new(sys.params.p_n, seed ^ 2).unwrap();
    let mut enc = EncoderState::new(sys);
    let mut out = Vec::with_capacity(samples);
    while out.len() < samples {
        let block_index = enc.block_index;
        let msg = BitVector::random(sys.params.k, &mut rng);
        let s_vec = interference.next_block(s);
        let block = encode_block(sys, &mut enc, &msg, &s_vec).unwrap();
        let u = sys.dither.block(block_index, s);
        let y = channel.dirty_paper(&block.x, &s_vec).unwrap();
        for i in 0..s {
            // v is congruent to x + alpha*S + U modulo M.
            let v = mod_fold(block.x[i] + alpha * s_vec[i] + u[i], 16).unwrap();
            let y_hat = alpha * y[i] + u[i];
            out.push(mod_fold(y_hat - v, 16).unwrap());
            if out.len() == samples {
                break;
            }
        }
    }
    out
}

#[test]
fn modulo_channel_equivalent_noise_invariant_to_interference() {
    // With dither on, the folded effective noise distribution must not
    // depend on the interference draw or its power: two-sample KS at the
    // 1% level over 1e5 samples.
    let samples = 100_000;
    let sys_a = desk_system(7.94, DitherMode::Uniform, 21);
    let sys_b = desk_system(7.94 * 25.0, DitherMode::Uniform, 21);
    let mut a = equivalent_noise_samples(&sys_a, 7.94, samples, 501);
    let mut b = equivalent_noise_samples(&sys_b, 7.94 * 25.0, samples, 917);
    let d = ks_statistic(&mut a, &mut b);
    let critical = 1.628 * ((samples + samples) as f64 / (samples * samples) as f64).sqrt();
    assert!(
        d < critical,
        "KS statistic {d:.5} >= critical {critical:.5}: folded noise depends on S"
    );
}

#[test]
fn receiver1_prior_variants() {
    // Resolves which prior reading reproduces a working Receiver 1 at a
    // marginal operating point: a Gaussian prior matched to user 1's own
    // shaped symbol power decodes; a Gaussian matched to user 2's (much
    // smaller) power concentrates on the inner symbols and fails; a uniform
    // prior is in between (it can decode, at a worse margin).
    use dpc_core::broadcast::{bc_roundtrip, solve_power_split, BcConfig, BcSystem};
    use dpc_core::modulation::gaussian_prior;
    use dpc_core::pipeline::{decode_block_with, DecoderState, DemapSpec};

    // Marginal for user 1 at short block length: effective SNR 19.2 dB
    // sits on its waterfall, where prior quality is visible in the BER.
    let (beta, p) = solve_power_split(0.9, 0.09, 19.2, 20.6);
    let cfg = BcConfig::<f64> {
        n: 4000,
        k: 3000,
        k_prime: 500,
        m_pam: 16,
        total_power: p,
        beta,
        p_n1: 0.9,
        p_n2: 0.09,
    };
    let sys = BcSystem::build(cfg.clone(), 77, SystemOptions::default(), 30).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let blocks = 24usize;
    let msgs1: Vec<BitVector> = (0..blocks).map(|_| BitVector::random(3000, &mut rng)).collect();
    let msgs2: Vec<BitVector> = (0..blocks).map(|_| BitVector::random(3000, &mut rng)).collect();

    // Matched prior via the built system.
    let out = bc_roundtrip(&sys, &msgs1, &msgs2, 11).unwrap();
    let matched_ber = out.bit_errors_user1 as f64 / out.bits_per_user as f64;
    assert!(
        matched_ber < 1e-2,
        "matched Gaussian prior should decode on its waterfall, ber {matched_ber:.3e}"
    );

    // Rerun receiver 1 by hand with the alternative priors.
    let user1 = sys.user1_system();
    let (unit_p1, _) = sys.unit_powers();
    let c1 = (cfg.p_x1() / unit_p1).sqrt();
    let noise_var = (cfg.p_x2() + cfg.p_n1) / (c1 * c1);
    let mut rerun = |prior: Vec<f64>| -> f64 {
        let mut enc = sys.new_encoder_state();
        let mut dec_state = DecoderState::new();
        let mut ch1 = GaussianChannel::new(cfg.p_n1, 11 ^ 0x0111).unwrap();
        let spec = DemapSpec::Prior {
            scale: 1.0 / c1,
            noise_var,
            prior,
        };
        let mut errors = 0u64;
        let mut bits = 0u64;
        for (t, (m1, m2)) in msgs1.iter().zip(&msgs2).enumerate() {
            let block = sys.encode(&mut enc, m1, m2).unwrap();
            let y1 = ch1.dirty_paper(&block.x, &[]).unwrap();
            match decode_block_with(user1, &mut dec_state, &y1, &spec) {
                Ok(out) => {
                    errors += msgs1[t - 1].distance(&out.msg) as u64;
                    bits += 3000;
                }
                Err(dpc_core::Error::NoOutputYet) => {}
                Err(e) => panic!("{e}"),
            }
        }
        errors as f64 / bits as f64
    };

    let uniform_ber = rerun(vec![1.0 / 16.0; 16]);
    // "Variance of the superposed user-2 signal" reading: a near-delta
    // prior at the origin.
    let wrong_var = (cfg.p_x2() / (c1 * c1)).max(1e-3);
    let wrong_ber = rerun(gaussian_prior(&user1.mapping, wrong_var).unwrap());

    assert!(
        matched_ber <= uniform_ber,
        "Gaussian prior must not lose to uniform: {matched_ber:.3e} vs {uniform_ber:.3e}"
    );
    assert!(
        wrong_ber > 0.1,
        "user-2-variance prior should break receiver 1, ber {wrong_ber:.3e}"
    );
    println!(
        "receiver-1 prior A/B: matched {matched_ber:.3e}, uniform {uniform_ber:.3e}, \
         user-2-variance {wrong_ber:.3e}"
    );
}

#[test]
fn receiver2_depends_only_on_its_own_snr() {
    // DPC pre-cancels user 1, so Receiver 2's error rate is set by
    // P_X2/P_N2 alone: sweep the interferer's power at a fixed marginal
    // user-2 point and compare block failures.
    use dpc_core::broadcast::{bc_roundtrip, BcConfig, BcSystem};
    let p_x2 = 0.09 * 10f64.powf(2.0); // effective SNR 20.0 dB, on the desk waterfall
    let mut failures = Vec::new();
    for p_x1 in [200.0f64, 1600.0] {
        let p = p_x1 + p_x2;
        let cfg = BcConfig::<f64> {
            n: 4000,
            k: 3000,
            k_prime: 500,
            m_pam: 16,
            total_power: p,
            beta: p_x2 / p,
            p_n1: 0.9,
            p_n2: 0.09,
        };
        let sys = BcSystem::build(cfg, 55, SystemOptions::default(), 30).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let blocks = 26usize;
        let m1: Vec<BitVector> = (0..blocks).map(|_| BitVector::random(3000, &mut rng)).collect();
        let m2: Vec<BitVector> = (0..blocks).map(|_| BitVector::random(3000, &mut rng)).collect();
        let out = bc_roundtrip(&sys, &m1, &m2, 17).unwrap();
        failures.push(out.bit_errors_user2 as f64 / out.bits_per_user as f64);
    }
    // Same order of magnitude on the waterfall: an 8x interferer power
    // change must not shift user 2's operating point.
    let (a, b) = (failures[0].max(1e-6), failures[1].max(1e-6));
    assert!(
        (a / b).max(b / a) < 20.0,
        "user-2 BER moved with interferer power: {failures:?}"
    );
}

#[test]
fn awgn_mode_matches_dpc_with_zero_interference() {
    // The AWGN reference is the same machine with S = 0: outputs stay on
    // the base alphabet and the receiver fold is harmless.
    let sys = desk_system(0.0, DitherMode::Off, 33);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut enc = EncoderState::new(&sys);
    let msg = BitVector::random(3000, &mut rng);
    let block = encode_block(&sys, &mut enc, &msg, &vec![0.0; 1000]).unwrap();
    for &x in &block.x {
        assert!((x + 7.5 - (x + 7.5).round()).abs() < 1e-9);
    }
}

#[test]
fn degree_profile_stock_options_match_code_rate() {
    // The default profiles at the full block structure give a rate-7/8
    // LDPC code over the derived dimension.
    let opts = SystemOptions::default();
    let (var_deg, chk_deg) = dpc_core::ldpc::repaired_node_degrees(
        40000,
        5000,
        &opts.var_dist,
        &opts.chk_dist,
    )
    .unwrap();
    assert_eq!(var_deg.len(), 40000);
    assert_eq!(chk_deg.len(), 5000);
    assert_eq!(
        var_deg.iter().sum::<usize>(),
        chk_deg.iter().sum::<usize>()
    );
    let _ = DegreeDistribution::regular(32).unwrap();
}
