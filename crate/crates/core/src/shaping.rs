//! Sign-bit selection by Viterbi search over a coset of the shaping code.
//!
//! Each trellis step consumes one input bit of the rate-1/2 code and emits
//! two code bits, so it covers two PAM symbols; the branch metric is the sum
//! of the two folded squared distances to the per-symbol target. The search
//! starts in state 0 and ends free (minimum-metric end state, full
//! traceback) — no tail bits are appended, so the sign-bit length stays
//! exactly `s`.

use crate::conv::{ConvCode, CosetSpec};
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::modulation::{mod_fold, PamMapping};
use crate::real::Real;

/// Expanded state graph of a rate-1/2 code: one transition per
/// `(state, input bit)`.
#[derive(Clone, Debug)]
pub struct ShapingTrellis {
    num_states: usize,
    /// `next[2*state + input]`
    next: Vec<u32>,
    /// `out[2*state + input]`: two code bits, stream-1 bit in bit 0.
    out: Vec<u8>,
}

impl ShapingTrellis {
    pub fn new(code: &ConvCode) -> Self {
        let num_states = code.num_states();
        let mut next = vec![0u32; 2 * num_states];
        let mut out = vec![0u8; 2 * num_states];
        let mask = (num_states - 1) as u32;
        for state in 0..num_states as u32 {
            for input in 0..2u32 {
                let reg = (state << 1) | input;
                let (c1, c2) = code.step_outputs(reg);
                next[(2 * state + input) as usize] = reg & mask;
                out[(2 * state + input) as usize] = u8::from(c1) | (u8::from(c2) << 1);
            }
        }
        Self {
            num_states,
            next,
            out,
        }
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    fn branch(&self, state: usize, input: usize) -> (usize, u8) {
        let idx = 2 * state + input;
        (self.next[idx] as usize, self.out[idx])
    }

    /// Every state is reachable from state 0 within `memory` steps.
    pub fn all_states_reachable(&self) -> bool {
        let mut reached = vec![false; self.num_states];
        reached[0] = true;
        let mut frontier = vec![0usize];
        for _ in 0..self.num_states.trailing_zeros() {
            let mut nextf = Vec::new();
            for &st in &frontier {
                for input in 0..2 {
                    let (ns, _) = self.branch(st, input);
                    if !reached[ns] {
                        reached[ns] = true;
                        nextf.push(ns);
                    }
                }
            }
            frontier = nextf;
        }
        reached.iter().all(|&x| x)
    }
}

/// Minimum-energy coset member against known interference: the
/// per-symbol target is `alpha * S_i`.
pub fn shape<R: Real>(
    spec: &CosetSpec<'_>,
    lower_planes: &[BitVector],
    interference: &[R],
    alpha: R,
    mapping: &PamMapping<R>,
) -> Result<BitVector> {
    let target: Vec<R> = interference.iter().map(|&s| alpha * s).collect();
    shape_to_target(spec, lower_planes, &target, mapping)
}

/// Minimum-energy coset member against an arbitrary per-symbol target
/// (used directly by the encoder, where the target is `alpha*S + U`).
///
/// Returns `z` in the coset `C(m')` minimizing
/// `sum_i mod_fold(f_M(z_i, lower_i) - target_i, M)^2` over the code
/// trellis. The folded energy of the result never exceeds the coset
/// leader's.
pub fn shape_to_target<R: Real>(
    spec: &CosetSpec<'_>,
    lower_planes: &[BitVector],
    target: &[R],
    mapping: &PamMapping<R>,
) -> Result<BitVector> {
    let s = spec.leader.len();
    if s % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "sign-bit length {s} must be even for the rate-1/2 code"
        )));
    }
    if target.len() != s {
        return Err(Error::DimensionMismatch(format!(
            "target has {} entries for {s} symbols",
            target.len()
        )));
    }
    if lower_planes.len() != mapping.bits_per_symbol() - 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected {} lower planes, got {}",
            mapping.bits_per_symbol() - 1,
            lower_planes.len()
        )));
    }
    for plane in lower_planes {
        if plane.len() != s {
            return Err(Error::DimensionMismatch(format!(
                "lower plane has {} bits for {s} symbols",
                plane.len()
            )));
        }
    }

    let m = mapping.order();
    // Candidate cost of sign bit 0/1 at every symbol.
    let mut cost = vec![[R::zero(); 2]; s];
    for i in 0..s {
        let mut lower = 0usize;
        for plane in lower_planes {
            lower = (lower << 1) | usize::from(plane.get(i));
        }
        for b in 0..2usize {
            let label = mapping.label_from_bits(b == 1, lower);
            let d = mod_fold(mapping.symbol_for_label(label) - target[i], m)?;
            cost[i][b] = d * d;
        }
    }

    let trellis = ShapingTrellis::new(spec.code);
    let num_states = trellis.num_states();
    let steps = s / 2;
    let inf = R::infinity();
    let mut metric = vec![inf; num_states];
    metric[0] = R::zero();
    let mut new_metric = vec![inf; num_states];
    // One decision bit per (step, state): which predecessor won.
    let words_per_step = num_states.div_ceil(64);
    let mut decisions = vec![0u64; steps * words_per_step];

    for step in 0..steps {
        let (t0, t1) = (
            spec.leader.get(2 * step),
            spec.leader.get(2 * step + 1),
        );
        for st in new_metric.iter_mut() {
            *st = inf;
        }
        let dwords = &mut decisions[step * words_per_step..(step + 1) * words_per_step];
        for next_state in 0..num_states {
            let input = next_state & 1;
            // Two predecessors differ in their oldest register bit.
            let p0 = next_state >> 1;
            let p1 = p0 | (num_states >> 1);
            let mut best = inf;
            let mut from_p1 = false;
            for (pred, flag) in [(p0, false), (p1, true)] {
                if metric[pred] == inf {
                    continue;
                }
                let (ns, outbits) = trellis.branch(pred, input);
                debug_assert_eq!(ns, next_state);
                let z0 = (outbits & 1 != 0) ^ t0;
                let z1 = (outbits & 2 != 0) ^ t1;
                let cand =
                    metric[pred] + cost[2 * step][usize::from(z0)] + cost[2 * step + 1][usize::from(z1)];
                // Strict comparison: ties keep the lower predecessor state.
                if cand < best {
                    best = cand;
                    from_p1 = flag;
                }
            }
            new_metric[next_state] = best;
            if from_p1 {
                dwords[next_state / 64] |= 1u64 << (next_state % 64);
            }
        }
        std::mem::swap(&mut metric, &mut new_metric);
    }

    // Free end: best final state, ties to the lowest index.
    let mut end_state = 0usize;
    for st in 1..num_states {
        if metric[st] < metric[end_state] {
            end_state = st;
        }
    }

    // Traceback, reconstructing inputs and code bits.
    let mut z = spec.leader.clone();
    let mut state = end_state;
    for step in (0..steps).rev() {
        let dwords = &decisions[step * words_per_step..(step + 1) * words_per_step];
        let from_p1 = (dwords[state / 64] >> (state % 64)) & 1 != 0;
        let input = state & 1;
        let pred = (state >> 1) | if from_p1 { num_states >> 1 } else { 0 };
        let (_, outbits) = trellis.branch(pred, input);
        if outbits & 1 != 0 {
            z.flip(2 * step);
        }
        if outbits & 2 != 0 {
            z.flip(2 * step + 1);
        }
        state = pred;
    }
    debug_assert_eq!(state, 0, "traceback must land in the start state");
    Ok(z)
}

/// Folded energy of a sign-bit choice: the objective `shape` minimizes.
pub fn folded_energy<R: Real>(
    sign: &BitVector,
    lower_planes: &[BitVector],
    target: &[R],
    mapping: &PamMapping<R>,
) -> Result<R> {
    let m = mapping.order();
    let mut acc = R::zero();
    for i in 0..sign.len() {
        let label = mapping.label_at(sign, lower_planes, i);
        let d = mod_fold(mapping.symbol_for_label(label) - target[i], m)?;
        acc = acc + d * d;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::InverseSyndromeFormer;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn planes(s: usize, rng: &mut ChaCha8Rng) -> Vec<BitVector> {
        (0..3).map(|_| BitVector::random(s, rng)).collect()
    }

    /// Brute-force oracle: enumerate the whole coset via the encoder.
    fn exhaustive_min_energy(
        code: &ConvCode,
        leader: &BitVector,
        lower: &[BitVector],
        target: &[f64],
        mapping: &PamMapping<f64>,
    ) -> f64 {
        let s = leader.len();
        let k = s / 2;
        let mut best = f64::INFINITY;
        for pattern in 0..(1u64 << k) {
            let mut input = BitVector::zeros(k);
            for b in 0..k {
                if (pattern >> b) & 1 != 0 {
                    input.set(b, true);
                }
            }
            let z = code.encode(&input).xor(leader);
            let e = folded_energy(&z, lower, target, mapping).unwrap();
            if e < best {
                best = e;
            }
        }
        best
    }

    #[test]
    fn trellis_is_deterministic_and_connected() {
        for code in [ConvCode::memory2(), ConvCode::memory8()] {
            let t = ShapingTrellis::new(&code);
            assert_eq!(t.num_states(), code.num_states());
            assert!(t.all_states_reachable());
        }
    }

    #[test]
    fn shaped_output_stays_in_coset() {
        let code = ConvCode::memory8();
        let s = 256;
        let isf = InverseSyndromeFormer::new(&code, s).unwrap();
        let mapping = PamMapping::<f64>::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let m_prime = BitVector::random(s / 2, &mut rng);
            let spec = CosetSpec::from_syndrome(&code, &isf, &m_prime).unwrap();
            let lower = planes(s, &mut rng);
            let target: Vec<f64> = (0..s).map(|_| rng.random_range(-8.0..8.0)).collect();
            let z = shape_to_target(&spec, &lower, &target, &mapping).unwrap();
            assert_eq!(code.syndrome_former(&z).unwrap(), m_prime);
        }
    }

    #[test]
    fn shaped_energy_never_exceeds_leader() {
        let code = ConvCode::memory8();
        let s = 300;
        let isf = InverseSyndromeFormer::new(&code, s).unwrap();
        let mapping = PamMapping::<f64>::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let m_prime = BitVector::random(s / 2, &mut rng);
            let spec = CosetSpec::from_syndrome(&code, &isf, &m_prime).unwrap();
            let lower = planes(s, &mut rng);
            let target: Vec<f64> = (0..s).map(|_| rng.random_range(-8.0..8.0)).collect();
            let z = shape_to_target(&spec, &lower, &target, &mapping).unwrap();
            let shaped = folded_energy(&z, &lower, &target, &mapping).unwrap();
            let unshaped = folded_energy(&spec.leader, &lower, &target, &mapping).unwrap();
            assert!(shaped <= unshaped + 1e-9);
        }
    }

    #[test]
    fn zero_case_bounded_by_all_inner_energy() {
        let code = ConvCode::memory8();
        let s = 64;
        let isf = InverseSyndromeFormer::new(&code, s).unwrap();
        let mapping = PamMapping::<f64>::new(16).unwrap();
        let spec = CosetSpec::from_syndrome(&code, &isf, &BitVector::zeros(s / 2)).unwrap();
        assert!(spec.leader.is_zero());
        let lower: Vec<BitVector> = (0..3).map(|_| BitVector::zeros(s)).collect();
        let target = vec![0.0f64; s];
        let z = shape_to_target(&spec, &lower, &target, &mapping).unwrap();
        let e = folded_energy(&z, &lower, &target, &mapping).unwrap();
        assert!(e <= s as f64 * 3.5 * 3.5 + 1e-9);
    }

    #[test]
    fn viterbi_matches_exhaustive_coset_minimum() {
        let code = ConvCode::memory2();
        let s = 12;
        let isf = InverseSyndromeFormer::new(&code, s).unwrap();
        let mapping = PamMapping::<f64>::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..50 {
            let m_prime = BitVector::random(s / 2, &mut rng);
            let spec = CosetSpec::from_syndrome(&code, &isf, &m_prime).unwrap();
            let lower = planes(s, &mut rng);
            let target: Vec<f64> = (0..s).map(|_| rng.random_range(-8.0..8.0)).collect();
            let z = shape_to_target(&spec, &lower, &target, &mapping).unwrap();
            let got = folded_energy(&z, &lower, &target, &mapping).unwrap();
            let want = exhaustive_min_energy(&code, &spec.leader, &lower, &target, &mapping);
            assert!(
                (got - want).abs() < 1e-9,
                "viterbi {got} vs exhaustive {want}"
            );
        }
    }

    #[test]
    fn shape_rejects_bad_dimensions() {
        let code = ConvCode::memory2();
        let isf = InverseSyndromeFormer::new(&code, 8).unwrap();
        let mapping = PamMapping::<f64>::new(16).unwrap();
        let spec = CosetSpec::from_syndrome(&code, &isf, &BitVector::zeros(4)).unwrap();
        let lower: Vec<BitVector> = (0..3).map(|_| BitVector::zeros(8)).collect();
        assert!(shape(&spec, &lower, &vec![0.0f64; 7], 0.9, &mapping).is_err());
        let short: Vec<BitVector> = (0..3).map(|_| BitVector::zeros(6)).collect();
        assert!(shape(&spec, &short, &vec![0.0f64; 8], 0.9, &mapping).is_err());
    }
}
