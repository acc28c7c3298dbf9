//! End-to-end transmitter and receiver with the one-codeword parity delay.
//!
//! Encoder, block `T`: the first `k'` message bits select a coset of the
//! shaping code through the inverse syndrome former; the remaining message
//! bits plus the *previous* block's LDPC parity are interleaved into the
//! lower bit planes; the Viterbi search picks the sign bits; the sign bits
//! and current message bits are LDPC-encoded and the fresh parity is held
//! back for block `T+1`. Transmitted symbols are `(v - alpha S - U) mod M`.
//!
//! Decoder, block `T`: per-symbol LLRs are computed over the replicated
//! constellation from `alpha Y + U`. Sign-bit and message-bit LLRs wait one
//! block; parity LLRs extracted from block `T` complete codeword `T-1`, the
//! LDPC decoder runs, and the recovered sign bits pass through the syndrome
//! former to restore the remaining `k'` message bits of block `T-1`.

use crate::channel::{DitherMode, DitherSource};
use crate::conv::{ConvCode, CosetSpec, InverseSyndromeFormer};
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::ldpc::{BpVariant, DegreeDistribution, LdpcCode};
use crate::modulation::{
    choose_replication, demap_llr_with_prior, effective_noise_var, mod_fold, PamMapping,
    ReplicatedConstellation,
};
use crate::real::{r, Real};
use crate::shaping::shape_to_target;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// LLR magnitude cap applied before belief propagation.
const LLR_CLAMP: f64 = 30.0;

/// Block-structure and power parameters of one DPC stream.
#[derive(Clone, Debug)]
pub struct DpcSystemParams<R: Real = f64> {
    pub n: usize,
    pub k: usize,
    pub k_prime: usize,
    pub m_pam: usize,
    /// Nominal per-symbol transmit power (used for the MMSE factor and the
    /// replication choice; the achieved power is measured, not enforced).
    pub p_x: R,
    pub p_s: R,
    pub p_n: R,
    s: usize,
    l: usize,
    ldpc_k: usize,
    parity_len: usize,
}

impl<R: Real> DpcSystemParams<R> {
    pub fn new(
        n: usize,
        k: usize,
        k_prime: usize,
        m_pam: usize,
        p_x: R,
        p_s: R,
        p_n: R,
    ) -> Result<Self> {
        if m_pam < 4 || !m_pam.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "M = {m_pam} must be a power of two >= 4"
            )));
        }
        let l = m_pam.trailing_zeros() as usize;
        if n == 0 || n % l != 0 {
            return Err(Error::InvalidParameter(format!(
                "n = {n} must be a positive multiple of log2(M) = {l}"
            )));
        }
        let s = n / l;
        if s % 2 != 0 || 2 * k_prime != s {
            return Err(Error::InvalidParameter(format!(
                "rate-1/2 shaping needs k' = s/2; got k' = {k_prime}, s = {s}"
            )));
        }
        if k_prime >= k {
            return Err(Error::InvalidParameter(format!(
                "k' = {k_prime} must be smaller than k = {k}"
            )));
        }
        let ldpc_k = k - k_prime + s;
        if ldpc_k >= n {
            return Err(Error::InvalidParameter(format!(
                "LDPC dimension k - k' + s = {ldpc_k} must be below n = {n}"
            )));
        }
        let parity_len = n - ldpc_k;
        debug_assert_eq!(parity_len + (k - k_prime), n - s);
        if !(p_x > R::zero()) || !(p_n > R::zero()) || !(p_s >= R::zero()) {
            return Err(Error::InvalidParameter(
                "powers must satisfy P_X > 0, P_N > 0, P_S >= 0".into(),
            ));
        }
        Ok(Self {
            n,
            k,
            k_prime,
            m_pam,
            p_x,
            p_s,
            p_n,
            s,
            l,
            ldpc_k,
            parity_len,
        })
    }

    #[inline]
    pub fn symbols_per_block(&self) -> usize {
        self.s
    }

    #[inline]
    pub fn bits_per_symbol(&self) -> usize {
        self.l
    }

    #[inline]
    pub fn ldpc_dimension(&self) -> usize {
        self.ldpc_k
    }

    #[inline]
    pub fn parity_len(&self) -> usize {
        self.parity_len
    }

    /// MMSE scaling factor `P_X / (P_X + P_N)`.
    pub fn alpha(&self) -> R {
        self.p_x / (self.p_x + self.p_n)
    }

    /// Information rate in bits per channel use: `k / s`.
    pub fn rate_bits_per_symbol(&self) -> f64 {
        self.k as f64 / self.s as f64
    }

    /// Constellation rate before channel coding: `(l-1) + k'/s` bits/symbol.
    pub fn c_star(&self) -> f64 {
        (self.l - 1) as f64 + self.k_prime as f64 / self.s as f64
    }

    pub fn with_noise_power(&self, p_n: R) -> Self {
        let mut p = self.clone();
        p.p_n = p_n;
        p
    }
}

/// Fixed bit permutation shared by encoder and decoder.
#[derive(Clone, Debug)]
pub struct Interleaver {
    perm: Vec<u32>,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<u32> = (0..len as u32).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
        // Fisher-Yates.
        for i in (1..len).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        Self { perm }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.perm.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// `out[i] = in[perm[i]]`.
    pub fn interleave_bits(&self, x: &BitVector) -> BitVector {
        assert_eq!(x.len(), self.perm.len());
        let mut out = BitVector::zeros(x.len());
        for (i, &p) in self.perm.iter().enumerate() {
            if x.get(p as usize) {
                out.set(i, true);
            }
        }
        out
    }

    /// Inverse of [`Self::interleave_bits`] on value slices:
    /// `out[perm[i]] = in[i]`.
    pub fn deinterleave_values<T: Copy>(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.perm.len());
        if y.is_empty() {
            return Vec::new();
        }
        let mut out = vec![y[0]; y.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p as usize] = y[i];
        }
        out
    }

    pub fn deinterleave_bits(&self, x: &BitVector) -> BitVector {
        assert_eq!(x.len(), self.perm.len());
        let mut out = BitVector::zeros(x.len());
        for (i, &p) in self.perm.iter().enumerate() {
            if x.get(i) {
                out.set(p as usize, true);
            }
        }
        out
    }
}

/// Construction knobs beyond the numeric parameters.
#[derive(Clone, Debug)]
pub struct SystemOptions {
    /// Shaping-code generator polynomials (coefficient masks, bit j = D^j).
    pub generators: (u32, u32),
    pub var_dist: DegreeDistribution,
    pub chk_dist: DegreeDistribution,
    pub dither: DitherMode,
    pub bp_variant: BpVariant,
    pub bp_max_iter: usize,
}

impl Default for SystemOptions {
    fn default() -> Self {
        Self {
            generators: (0o467, 0o625),
            var_dist: DegreeDistribution::new(&[(2, 0.1256), (3, 0.7140), (10, 0.1604)])
                .expect("stock profile is valid"),
            chk_dist: DegreeDistribution::regular(32).expect("stock profile is valid"),
            dither: DitherMode::Off,
            bp_variant: BpVariant::SumProduct,
            bp_max_iter: 50,
        }
    }
}

/// Immutable bundle shared by every stream of one experiment: codes, maps,
/// permutation and dither schedule.
pub struct DpcSystem<R: Real = f64> {
    pub params: DpcSystemParams<R>,
    pub conv: ConvCode,
    pub ldpc: LdpcCode,
    pub mapping: PamMapping<R>,
    pub replicated: ReplicatedConstellation<R>,
    pub interleaver: Interleaver,
    pub dither: DitherSource<R>,
    pub bp_variant: BpVariant,
    pub bp_max_iter: usize,
    isf: InverseSyndromeFormer,
}

impl<R: Real> DpcSystem<R> {
    pub fn build(params: DpcSystemParams<R>, seed: u64, options: SystemOptions) -> Result<Self> {
        let conv = ConvCode::new(options.generators.0, options.generators.1)?;
        let s = params.symbols_per_block();
        let isf = InverseSyndromeFormer::new(&conv, s)?;
        let ldpc = LdpcCode::construct(
            params.n,
            params.ldpc_dimension(),
            &options.var_dist,
            &options.chk_dist,
            seed ^ 0x11d9,
        )?;
        let mapping = PamMapping::new(params.m_pam)?;
        // Replication by the power rule, floored at one replica: the
        // receiver folds Y-hat into the base cell, so one period on each
        // side is always needed for the wrapped-noise mixture at the cell
        // boundary.
        let rep = choose_replication(&mapping, params.p_x + params.p_s).max(1);
        let replicated = ReplicatedConstellation::new(&mapping, rep);
        let interleaver = Interleaver::new(params.n - s, seed ^ 0x7a11);
        let dither = DitherSource::new(options.dither, seed ^ 0xd1d1, params.m_pam);
        Ok(Self {
            params,
            conv,
            ldpc,
            mapping,
            replicated,
            interleaver,
            dither,
            bp_variant: options.bp_variant,
            bp_max_iter: options.bp_max_iter,
            isf,
        })
    }

    /// Rebuild at a new noise power (the MMSE factor enters through
    /// `params`) while keeping the expensive code constructions.
    pub fn with_noise_power(&self, p_n: R) -> Self {
        Self {
            params: self.params.with_noise_power(p_n),
            conv: self.conv.clone(),
            ldpc: self.ldpc.clone(),
            mapping: self.mapping.clone(),
            replicated: self.replicated.clone(),
            interleaver: self.interleaver.clone(),
            dither: self.dither.clone(),
            bp_variant: self.bp_variant,
            bp_max_iter: self.bp_max_iter,
            isf: self.isf.clone(),
        }
    }

    /// Split interleaved lower-plane bits into `l-1` planes of `s` bits:
    /// plane 0 is `a_2` across all symbols, plane 1 is `a_3`, ...
    fn planes_from_interleaved(&self, bits: &BitVector) -> Vec<BitVector> {
        let s = self.params.symbols_per_block();
        (0..self.params.bits_per_symbol() - 1)
            .map(|p| bits.slice(p * s, (p + 1) * s))
            .collect()
    }
}

/// Mutable encoder state: the delayed parity vector and the block counter.
#[derive(Clone, Debug)]
pub struct EncoderState {
    pub prev_parity: BitVector,
    pub block_index: u64,
}

impl EncoderState {
    /// Block-0 bootstrap: the all-zero parity vector, known at both ends.
    pub fn new<R: Real>(sys: &DpcSystem<R>) -> Self {
        Self {
            prev_parity: BitVector::zeros(sys.params.parity_len()),
            block_index: 0,
        }
    }
}

/// One encoded block plus the bookkeeping a frame dump wants.
#[derive(Clone, Debug)]
pub struct EncodedBlock<R: Real> {
    pub x: Vec<R>,
    pub sign_bits: BitVector,
    /// Parity of this block's LDPC codeword (transmitted in block T+1).
    pub parity: BitVector,
}

/// Encode one `k`-bit message block against the known interference.
pub fn encode_block<R: Real>(
    sys: &DpcSystem<R>,
    state: &mut EncoderState,
    msg: &BitVector,
    interference: &[R],
) -> Result<EncodedBlock<R>> {
    let p = &sys.params;
    let s = p.symbols_per_block();
    if msg.len() != p.k {
        return Err(Error::DimensionMismatch(format!(
            "message has {} bits, expected k = {}",
            msg.len(),
            p.k
        )));
    }
    if interference.len() != s {
        return Err(Error::DimensionMismatch(format!(
            "interference has {} symbols, expected s = {s}",
            interference.len()
        )));
    }
    if state.prev_parity.len() != p.parity_len() {
        return Err(Error::DimensionMismatch(
            "encoder state parity length does not match the code".into(),
        ));
    }

    let m_prime = msg.slice(0, p.k_prime);
    let m_rest = msg.slice(p.k_prime, p.k);

    // Lower bit planes: message bits and delayed parity through the
    // interleaver.
    let interleaved =
        sys.interleaver.interleave_bits(&BitVector::concat(&[&m_rest, &state.prev_parity]));
    let planes = sys.planes_from_interleaved(&interleaved);

    // Shaping target: alpha*S plus the shared dither.
    let alpha = p.alpha();
    let u = sys.dither.block(state.block_index, s);
    let target: Vec<R> = interference
        .iter()
        .zip(&u)
        .map(|(&si, &ui)| alpha * si + ui)
        .collect();

    let coset = CosetSpec::from_syndrome(&sys.conv, &sys.isf, &m_prime)?;
    let sign_bits = shape_to_target(&coset, &planes, &target, &sys.mapping)?;

    // LDPC codeword of this block; parity rides in the next block.
    let m_second = BitVector::concat(&[&sign_bits, &m_rest]);
    let (_, parity) = sys.ldpc.encode_systematic(&m_second)?;
    state.prev_parity = parity.clone();
    state.block_index += 1;

    let v = sys.mapping.map_symbols(&sign_bits, &planes)?;
    let x = v
        .iter()
        .zip(&target)
        .map(|(&vi, &ti)| mod_fold(vi - ti, p.m_pam))
        .collect::<Result<Vec<R>>>()?;
    Ok(EncodedBlock {
        x,
        sign_bits,
        parity,
    })
}

/// How the receiver turns channel output into bit LLRs.
#[derive(Clone, Debug)]
pub enum DemapSpec<R: Real> {
    /// DPC receiver: scale by the MMSE factor, add the dither, demap over
    /// the replicated constellation with noise variance `alpha P_N`.
    Dpc,
    /// Prior-weighted receiver over the base constellation (broadcast
    /// Receiver 1): demap `scale * y` at the given noise variance.
    Prior {
        scale: R,
        noise_var: R,
        prior: Vec<R>,
    },
}

/// Mutable decoder state: LLRs waiting for their parity plus the block
/// counter (for dither alignment).
#[derive(Clone, Debug)]
pub struct DecoderState<R: Real> {
    pending: Option<PendingLlrs<R>>,
    pub block_index: u64,
}

#[derive(Clone, Debug)]
struct PendingLlrs<R> {
    sign: Vec<R>,
    msg: Vec<R>,
}

impl<R: Real> DecoderState<R> {
    pub fn new() -> Self {
        Self {
            pending: None,
            block_index: 0,
        }
    }
}

impl<R: Real> Default for DecoderState<R> {
    fn default() -> Self {
        Self::new()
    }
}

/// One decoded message block plus decoder diagnostics.
#[derive(Clone, Debug)]
pub struct DecodedBlock {
    /// Message of block `T-1` (one block behind the input).
    pub msg: BitVector,
    pub converged: bool,
    pub iterations: usize,
}

/// Decode one received block with the standard DPC receiver.
///
/// The first call only fills the delay line and returns
/// [`Error::NoOutputYet`]; every later call yields the previous block.
pub fn decode_block<R: Real>(
    sys: &DpcSystem<R>,
    state: &mut DecoderState<R>,
    y: &[R],
) -> Result<DecodedBlock> {
    decode_block_with(sys, state, y, &DemapSpec::Dpc)
}

/// Decode one received block with an explicit demapping strategy.
pub fn decode_block_with<R: Real>(
    sys: &DpcSystem<R>,
    state: &mut DecoderState<R>,
    y: &[R],
    demap: &DemapSpec<R>,
) -> Result<DecodedBlock> {
    let p = &sys.params;
    let s = p.symbols_per_block();
    let l = p.bits_per_symbol();
    if y.len() != s {
        return Err(Error::DimensionMismatch(format!(
            "received block has {} symbols, expected s = {s}",
            y.len()
        )));
    }

    let mut sign_llrs: Vec<R> = Vec::with_capacity(s);
    let mut lower_llrs: Vec<R> = vec![R::zero(); s * (l - 1)];
    match demap {
        DemapSpec::Dpc => {
            // MMSE scaling is justified by the dither/interference making
            // the transmitted point independent of the data symbol. On the
            // plain AWGN leg (S = 0, no dither) X equals v, so alpha*Y only
            // shrinks the constellation against the demapper model; use the
            // standard coherent receiver there instead.
            let plain_awgn =
                p.p_s == R::zero() && sys.dither.mode() == crate::channel::DitherMode::Off;
            let (alpha, nv) = if plain_awgn {
                (R::one(), p.p_n)
            } else {
                (p.alpha(), effective_noise_var(p.p_x, p.p_n))
            };
            let u = sys.dither.block(state.block_index, s);
            for i in 0..s {
                // Fold into the base cell: with period-M labels this equals
                // demapping the raw value against an unbounded replication,
                // and it keeps Y-hat inside the replicated span for any
                // interference power.
                let y_hat = mod_fold(alpha * y[i] + u[i], p.m_pam)?;
                let llrs = sys.replicated.demap_llr(y_hat, nv)?;
                sign_llrs.push(llrs[0]);
                for plane in 0..l - 1 {
                    lower_llrs[plane * s + i] = llrs[plane + 1];
                }
            }
        }
        DemapSpec::Prior {
            scale,
            noise_var,
            prior,
        } => {
            for i in 0..s {
                let llrs = demap_llr_with_prior(&sys.mapping, *scale * y[i], *noise_var, prior)?;
                sign_llrs.push(llrs[0]);
                for plane in 0..l - 1 {
                    lower_llrs[plane * s + i] = llrs[plane + 1];
                }
            }
        }
    }
    state.block_index += 1;

    // De-interleave the lower planes back into [message | parity] order.
    let deint = sys.interleaver.deinterleave_values(&lower_llrs);
    let msg_len = p.k - p.k_prime;
    let msg_llrs = deint[..msg_len].to_vec();
    let parity_llrs = &deint[msg_len..];

    let Some(prev) = state.pending.take() else {
        state.pending = Some(PendingLlrs {
            sign: sign_llrs,
            msg: msg_llrs,
        });
        return Err(Error::NoOutputYet);
    };

    // Codeword T-1 = [sign | message] of the previous block plus the parity
    // carried in this block.
    let clamp = r::<R>(LLR_CLAMP);
    let mut llr_in: Vec<R> = Vec::with_capacity(p.n);
    llr_in.extend_from_slice(&prev.sign);
    llr_in.extend_from_slice(&prev.msg);
    llr_in.extend_from_slice(parity_llrs);
    for v in llr_in.iter_mut() {
        *v = (*v).max(-clamp).min(clamp);
    }
    state.pending = Some(PendingLlrs {
        sign: sign_llrs,
        msg: msg_llrs,
    });

    let out = sys.ldpc.bp_decode(&llr_in, sys.bp_max_iter, sys.bp_variant)?;
    let z_hat = out.hard_bits.slice(0, s);
    let m_rest_hat = out.hard_bits.slice(s, s + msg_len);
    let m_prime_hat = sys.conv.syndrome_former(&z_hat)?;
    Ok(DecodedBlock {
        msg: BitVector::concat(&[&m_prime_hat, &m_rest_hat]),
        converged: out.converged,
        iterations: out.iterations,
    })
}

/// Multi-block encode/channel/decode harness.
///
/// Encodes every message block, runs the channel, decodes with the one-block
/// delay, and counts bit errors over the decodable blocks (all but the last;
/// the final block's parity is never transmitted).
pub struct RoundtripOutcome {
    pub decoded: Vec<BitVector>,
    pub bit_errors: u64,
    pub bits_compared: u64,
    /// Mean square of all transmitted symbols.
    pub measured_power: f64,
    pub blocks_converged: usize,
}

pub fn one_shot_roundtrip<R, F>(
    sys: &DpcSystem<R>,
    msgs: &[BitVector],
    mut interference_for_block: F,
    noise_seed: u64,
) -> Result<RoundtripOutcome>
where
    R: Real,
    F: FnMut(u64, usize) -> Vec<R>,
{
    if msgs.len() < 2 {
        return Err(Error::InvalidParameter(
            "round trip needs at least two blocks to flush the delay line".into(),
        ));
    }
    let s = sys.params.symbols_per_block();
    let mut channel = crate::channel::GaussianChannel::new(sys.params.p_n, noise_seed)?;
    let mut enc = EncoderState::new(sys);
    let mut dec = DecoderState::new();
    let mut decoded = Vec::with_capacity(msgs.len() - 1);
    let mut power_acc = 0.0f64;
    let mut power_n = 0u64;
    let mut converged = 0usize;
    for (t, msg) in msgs.iter().enumerate() {
        let s_vec = interference_for_block(t as u64, s);
        let block = encode_block(sys, &mut enc, msg, &s_vec)?;
        for &xi in &block.x {
            power_acc += xi.to_f64().unwrap().powi(2);
            power_n += 1;
        }
        let y = channel.dirty_paper(&block.x, &s_vec)?;
        match decode_block(sys, &mut dec, &y) {
            Ok(out) => {
                if out.converged {
                    converged += 1;
                }
                decoded.push(out.msg);
            }
            Err(Error::NoOutputYet) => {
                debug_assert_eq!(t, 0);
            }
            Err(e) => return Err(e),
        }
    }
    let mut bit_errors = 0u64;
    let mut bits = 0u64;
    for (m, m_hat) in msgs.iter().zip(&decoded) {
        bit_errors += m.distance(m_hat) as u64;
        bits += m.len() as u64;
    }
    Ok(RoundtripOutcome {
        decoded,
        bit_errors,
        bits_compared: bits,
        measured_power: power_acc / power_n as f64,
        blocks_converged: converged,
    })
}

// ---------------------------------------------------------------------------
// Frame dump: cross-implementation conformance records
// ---------------------------------------------------------------------------

/// JSON header line naming the parameters and seeds of a dump.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameDumpHeader {
    pub format: String,
    pub n: usize,
    pub k: usize,
    pub k_prime: usize,
    pub m_pam: usize,
    pub p_x: f64,
    pub p_s: f64,
    pub p_n: f64,
    pub seed: u64,
    pub dither: DitherMode,
}

impl FrameDumpHeader {
    pub fn for_system<R: Real>(sys: &DpcSystem<R>, seed: u64) -> Self {
        Self {
            format: "dpc-frame-dump-v1".into(),
            n: sys.params.n,
            k: sys.params.k,
            k_prime: sys.params.k_prime,
            m_pam: sys.params.m_pam,
            p_x: sys.params.p_x.to_f64().unwrap(),
            p_s: sys.params.p_s.to_f64().unwrap(),
            p_n: sys.params.p_n.to_f64().unwrap(),
            seed,
            dither: sys.dither.mode(),
        }
    }

    fn sign_len(&self) -> usize {
        self.n / (self.m_pam.trailing_zeros() as usize)
    }

    fn parity_len(&self) -> usize {
        self.n - (self.k - self.k_prime + self.sign_len())
    }
}

/// One dumped block: index, message, sign bits, parity and the transmitted
/// symbols as binary64.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub t: u64,
    pub msg: BitVector,
    pub sign_bits: BitVector,
    pub parity: BitVector,
    pub x: Vec<f64>,
}

/// Writes the JSON header line, then per block a little-endian record:
/// `u64 T`, three `(u32 len, ASCII hex)` fields for message, sign bits and
/// parity, then `u32 count` and `count` binary64 symbol values.
pub struct FrameDumpWriter<W: Write> {
    w: W,
}

impl<W: Write> FrameDumpWriter<W> {
    pub fn new(mut w: W, header: &FrameDumpHeader) -> Result<Self> {
        let line = serde_json::to_string(header)
            .map_err(|e| Error::Parse(format!("header encode: {e}")))?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(Self { w })
    }

    pub fn write_record(&mut self, rec: &FrameRecord) -> Result<()> {
        self.w.write_all(&rec.t.to_le_bytes())?;
        for field in [&rec.msg, &rec.sign_bits, &rec.parity] {
            let hex = field.to_hex();
            self.w.write_all(&(hex.len() as u32).to_le_bytes())?;
            self.w.write_all(hex.as_bytes())?;
        }
        self.w.write_all(&(rec.x.len() as u32).to_le_bytes())?;
        for &v in &rec.x {
            self.w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.w
    }
}

pub struct FrameDumpReader<R: BufRead> {
    r: R,
    header: FrameDumpHeader,
}

impl<R: BufRead> FrameDumpReader<R> {
    pub fn new(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: FrameDumpHeader = serde_json::from_str(line.trim())
            .map_err(|e| Error::Parse(format!("header decode: {e}")))?;
        Ok(Self { r, header })
    }

    pub fn header(&self) -> &FrameDumpHeader {
        &self.header
    }

    /// Next record, or `None` at a clean end of stream.
    pub fn next_record(&mut self) -> Result<Option<FrameRecord>> {
        let mut t8 = [0u8; 8];
        match self.r.read_exact(&mut t8) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        let t = u64::from_le_bytes(t8);
        let mut read_hex = |bits: usize| -> Result<BitVector> {
            let mut l4 = [0u8; 4];
            self.r.read_exact(&mut l4)?;
            let len = u32::from_le_bytes(l4) as usize;
            let mut buf = vec![0u8; len];
            self.r.read_exact(&mut buf)?;
            let hex = std::str::from_utf8(&buf)
                .map_err(|e| Error::Parse(format!("hex field: {e}")))?;
            BitVector::from_hex(hex, bits)
        };
        let msg = read_hex(self.header.k)?;
        let sign = read_hex(self.header.sign_len())?;
        let parity = read_hex(self.header.parity_len())?;
        let mut c4 = [0u8; 4];
        self.r.read_exact(&mut c4)?;
        let count = u32::from_le_bytes(c4) as usize;
        let mut x = Vec::with_capacity(count);
        let mut v8 = [0u8; 8];
        for _ in 0..count {
            self.r.read_exact(&mut v8)?;
            x.push(f64::from_le_bytes(v8));
        }
        Ok(Some(FrameRecord {
            t,
            msg,
            sign_bits: sign,
            parity,
            x,
        }))
    }
}

/// Convenience: run the encoder over messages and dump every block.
pub fn dump_frames<R: Real, W: Write>(
    sys: &DpcSystem<R>,
    msgs: &[BitVector],
    mut interference_for_block: impl FnMut(u64, usize) -> Vec<R>,
    seed: u64,
    w: W,
) -> Result<()> {
    let header = FrameDumpHeader::for_system(sys, seed);
    let mut writer = FrameDumpWriter::new(w, &header)?;
    let mut enc = EncoderState::new(sys);
    let s = sys.params.symbols_per_block();
    for (t, msg) in msgs.iter().enumerate() {
        let s_vec = interference_for_block(t as u64, s);
        let block = encode_block(sys, &mut enc, msg, &s_vec)?;
        writer.write_record(&FrameRecord {
            t: t as u64,
            msg: msg.clone(),
            sign_bits: block.sign_bits,
            parity: block.parity,
            x: block.x.iter().map(|v| v.to_f64().unwrap()).collect(),
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::r;

    /// Small but structurally complete system: n=192, k=144, k'=24, M=16
    /// (s=48, LDPC (192,168)).
    fn small_params(p_s: f64, p_n: f64) -> DpcSystemParams<f64> {
        DpcSystemParams::new(192, 144, 24, 16, 16.0, p_s, p_n).unwrap()
    }

    fn small_options() -> SystemOptions {
        SystemOptions {
            chk_dist: DegreeDistribution::regular(24).unwrap(),
            ..SystemOptions::default()
        }
    }

    fn small_system(p_s: f64, p_n: f64, seed: u64) -> DpcSystem<f64> {
        DpcSystem::build(small_params(p_s, p_n), seed, small_options()).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(DpcSystemParams::<f64>::new(40000, 30000, 5000, 16, 16.0, 16.0, 0.2).is_ok());
        // n not a multiple of log2(M)
        assert!(DpcSystemParams::<f64>::new(40001, 30000, 5000, 16, 16.0, 16.0, 0.2).is_err());
        // k' != s/2
        assert!(DpcSystemParams::<f64>::new(40000, 30000, 4000, 16, 16.0, 16.0, 0.2).is_err());
        // k' >= k
        assert!(DpcSystemParams::<f64>::new(16, 2, 2, 16, 16.0, 16.0, 0.2).is_err());
        // bad powers
        assert!(DpcSystemParams::<f64>::new(40000, 30000, 5000, 16, 0.0, 16.0, 0.2).is_err());
    }

    #[test]
    fn derived_sizes_match_block_structure() {
        let p = DpcSystemParams::<f64>::new(40000, 30000, 5000, 16, 16.0, 16.0, 0.2).unwrap();
        assert_eq!(p.symbols_per_block(), 10000);
        assert_eq!(p.ldpc_dimension(), 35000);
        assert_eq!(p.parity_len(), 5000);
        assert_eq!(p.rate_bits_per_symbol(), 3.0);
        assert_eq!(p.c_star(), 3.5);
        let a = p.alpha();
        assert!((a - 16.0 / 16.2).abs() < 1e-12);
    }

    #[test]
    fn interleaver_round_trip() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let il = Interleaver::new(144, 9);
        for _ in 0..20 {
            let x = BitVector::random(144, &mut rng);
            assert_eq!(il.deinterleave_bits(&il.interleave_bits(&x)), x);
            // Value path inverts the bit path.
            let vals: Vec<f64> = x.iter_bits().map(|b| if b { 1.0 } else { 0.0 }).collect();
            let deint = il.deinterleave_values(&vals);
            let back = il.interleave_bits(&{
                let mut v = BitVector::zeros(144);
                for (i, &d) in deint.iter().enumerate() {
                    if d > 0.5 {
                        v.set(i, true);
                    }
                }
                v
            });
            assert_eq!(back, x);
        }
    }

    #[test]
    fn delay_line_conservation() {
        // Sign bits of block T, message bits of block T, and the parity
        // embedded in block T+1 form a valid LDPC codeword.
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let sys = small_system(16.0, 0.25, 11);
        let mut enc = EncoderState::new(&sys);
        let mut prev: Option<(BitVector, BitVector)> = None; // (m'', parity)
        for _ in 0..4 {
            let msg = BitVector::random(sys.params.k, &mut rng);
            let s_vec: Vec<f64> = (0..sys.params.symbols_per_block())
                .map(|_| 4.0 * <f64 as Real>::std_normal(&mut rng))
                .collect();
            let parity_before = enc.prev_parity.clone();
            let block = encode_block(&sys, &mut enc, &msg, &s_vec).unwrap();
            let m_rest = msg.slice(sys.params.k_prime, sys.params.k);
            if let Some((m_second_prev, parity_prev)) = prev {
                // The parity transmitted inside this block is the previous
                // block's codeword parity.
                assert_eq!(parity_before, parity_prev);
                let cw = BitVector::concat(&[&m_second_prev, &parity_prev]);
                assert!(sys.ldpc.syndrome_ok(&cw));
            }
            prev = Some((
                BitVector::concat(&[&block.sign_bits, &m_rest]),
                block.parity.clone(),
            ));
        }
    }

    #[test]
    fn sign_bits_remain_in_coset() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let sys = small_system(16.0, 0.25, 13);
        let mut enc = EncoderState::new(&sys);
        for _ in 0..5 {
            let msg = BitVector::random(sys.params.k, &mut rng);
            let s_vec: Vec<f64> = (0..sys.params.symbols_per_block())
                .map(|_| 4.0 * <f64 as Real>::std_normal(&mut rng))
                .collect();
            let block = encode_block(&sys, &mut enc, &msg, &s_vec).unwrap();
            assert_eq!(
                sys.conv.syndrome_former(&block.sign_bits).unwrap(),
                msg.slice(0, sys.params.k_prime)
            );
        }
    }

    #[test]
    fn outputs_in_alphabet_when_no_interference() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let sys = small_system(0.0, 0.25, 17);
        let mut enc = EncoderState::new(&sys);
        let msg = BitVector::random(sys.params.k, &mut rng);
        let s_vec = vec![0.0f64; sys.params.symbols_per_block()];
        let block = encode_block(&sys, &mut enc, &msg, &s_vec).unwrap();
        for &x in &block.x {
            let slot = x + 7.5;
            assert!((slot - slot.round()).abs() < 1e-9, "x = {x} not in A");
            assert!((-7.5..=7.5).contains(&x));
        }
    }

    #[test]
    fn decoder_signals_warmup_then_decodes() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let sys = small_system(16.0, 1e-4, 19);
        let mut enc = EncoderState::new(&sys);
        let mut dec = DecoderState::new();
        let s = sys.params.symbols_per_block();
        let msgs: Vec<BitVector> = (0..3).map(|_| BitVector::random(sys.params.k, &mut rng)).collect();
        let mut channel = crate::channel::GaussianChannel::new(sys.params.p_n, 2).unwrap();
        let mut recovered = Vec::new();
        for msg in &msgs {
            let s_vec: Vec<f64> = (0..s).map(|_| 4.0 * <f64 as Real>::std_normal(&mut rng)).collect();
            let block = encode_block(&sys, &mut enc, msg, &s_vec).unwrap();
            let y = channel.dirty_paper(&block.x, &s_vec).unwrap();
            match decode_block(&sys, &mut dec, &y) {
                Ok(out) => recovered.push(out.msg),
                Err(Error::NoOutputYet) => assert!(recovered.is_empty()),
                Err(e) => panic!("{e}"),
            }
        }
        assert_eq!(recovered.len(), 2);
        assert_eq!(recovered[0], msgs[0]);
        assert_eq!(recovered[1], msgs[1]);
    }

    #[test]
    fn noiseless_roundtrip_multi_block() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for dither in [DitherMode::Off, DitherMode::Uniform] {
            let mut opts = small_options();
            opts.dither = dither;
            let sys =
                DpcSystem::<f64>::build(small_params(30.0, 1e-4), 23, opts).unwrap();
            let msgs: Vec<BitVector> =
                (0..5).map(|_| BitVector::random(sys.params.k, &mut rng)).collect();
            let mut src = crate::channel::InterferenceSource::<f64>::new(30.0, 5).unwrap();
            let out =
                one_shot_roundtrip(&sys, &msgs, |_, len| src.next_block(len), 6).unwrap();
            assert_eq!(out.bit_errors, 0, "dither {dither:?}");
            assert_eq!(out.bits_compared, 4 * sys.params.k as u64);
            assert_eq!(out.blocks_converged, 4);
        }
    }

    #[test]
    fn roundtrip_requires_two_blocks() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let sys = small_system(1.0, 0.1, 29);
        let msgs = vec![BitVector::random(sys.params.k, &mut rng)];
        assert!(one_shot_roundtrip(&sys, &msgs, |_, len| vec![0.0; len], 1).is_err());
    }

    #[test]
    fn encode_rejects_bad_lengths() {
        let sys = small_system(1.0, 0.1, 31);
        let mut enc = EncoderState::new(&sys);
        let msg = BitVector::zeros(sys.params.k - 1);
        assert!(encode_block(&sys, &mut enc, &msg, &vec![0.0; 48]).is_err());
        let msg = BitVector::zeros(sys.params.k);
        assert!(encode_block(&sys, &mut enc, &msg, &vec![0.0; 47]).is_err());
        let mut dec = DecoderState::new();
        assert!(decode_block(&sys, &mut dec, &vec![0.0; 47]).is_err());
    }

    #[test]
    fn frame_dump_round_trip() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let sys = small_system(10.0, 0.2, 37);
        let msgs: Vec<BitVector> =
            (0..3).map(|_| BitVector::random(sys.params.k, &mut rng)).collect();
        let mut src = crate::channel::InterferenceSource::<f64>::new(10.0, 8).unwrap();
        let mut buf = Vec::new();
        dump_frames(&sys, &msgs, |_, len| src.next_block(len), 99, &mut buf).unwrap();

        let mut reader = FrameDumpReader::new(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(reader.header().n, 192);
        assert_eq!(reader.header().seed, 99);
        let mut records = Vec::new();
        while let Some(rec) = reader.next_record().unwrap() {
            records.push(rec);
        }
        assert_eq!(records.len(), 3);
        for (t, rec) in records.iter().enumerate() {
            assert_eq!(rec.t, t as u64);
            assert_eq!(rec.msg, msgs[t]);
            assert_eq!(rec.x.len(), 48);
            assert_eq!(
                sys.conv.syndrome_former(&rec.sign_bits).unwrap(),
                msgs[t].slice(0, sys.params.k_prime)
            );
        }
    }

    #[test]
    fn generic_f32_noiseless_roundtrip() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let params = DpcSystemParams::<f32>::new(192, 144, 24, 16, r(16.0), r(4.0), r(1e-3)).unwrap();
        let sys = DpcSystem::<f32>::build(params, 41, small_options()).unwrap();
        let msgs: Vec<BitVector> =
            (0..3).map(|_| BitVector::random(sys.params.k, &mut rng)).collect();
        let mut src = crate::channel::InterferenceSource::<f32>::new(4.0, 5).unwrap();
        let out = one_shot_roundtrip(&sys, &msgs, |_, len| src.next_block(len), 6).unwrap();
        assert_eq!(out.bit_errors, 0);
    }
}
