//! Rate-1/2 shaping convolutional code: feed-forward encoder, syndrome
//! former and inverse syndrome former.
//!
//! The code partitions `{0,1}^s` into `2^(s/2)` cosets; the syndrome former
//! identifies the coset of a sign-bit vector, and the inverse syndrome
//! former maps a syndrome back to one fixed coset representative. Shaping
//! then searches the coset with a Viterbi pass (see [`crate::shaping`]).

use crate::error::{Error, Result};
use crate::gf2::{right_inverse, BitVector, DenseBitMatrix, Gf2Matrix};

/// Non-systematic rate-1/2 feed-forward convolutional code.
///
/// Generator polynomials are stored as coefficient masks: bit `j` of the
/// mask is the coefficient of `D^j`, so the constant term sits in bit 0 and
/// the mask equals the usual MSB-first octal spelling of the generator
/// (e.g. `0o467` for `D^8+D^5+D^4+D^2+D+1`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvCode {
    g1: u32,
    g2: u32,
    memory: usize,
}

impl ConvCode {
    pub fn new(g1: u32, g2: u32) -> Result<Self> {
        if g1 == 0 || g2 == 0 {
            return Err(Error::InvalidParameter(
                "generator polynomial must be nonzero".into(),
            ));
        }
        if g1 & 1 == 0 || g2 & 1 == 0 {
            return Err(Error::InvalidParameter(
                "generator polynomial needs a nonzero constant term".into(),
            ));
        }
        let deg1 = 31 - g1.leading_zeros() as usize;
        let deg2 = 31 - g2.leading_zeros() as usize;
        let memory = deg1.max(deg2);
        if deg1 != deg2 {
            return Err(Error::InvalidParameter(format!(
                "generators have unequal degrees {deg1} and {deg2}; both must reach the memory"
            )));
        }
        if g1 == g2 {
            return Err(Error::InvalidParameter(
                "generators must be distinct (degenerate code)".into(),
            ));
        }
        Ok(Self { g1, g2, memory })
    }

    /// Parse one generator from a config string: either a binary coefficient
    /// string, MSB (highest power) first, or an octal literal like `"0o467"`.
    pub fn parse_generator(s: &str) -> Result<u32> {
        let s = s.trim();
        if let Some(oct) = s.strip_prefix("0o") {
            return u32::from_str_radix(oct, 8)
                .map_err(|e| Error::Parse(format!("bad octal generator {s:?}: {e}")));
        }
        if !s.is_empty() && s.chars().all(|c| c == '0' || c == '1') {
            return u32::from_str_radix(s, 2)
                .map_err(|e| Error::Parse(format!("bad binary generator {s:?}: {e}")));
        }
        Err(Error::Parse(format!(
            "generator {s:?}: expected a 0/1 string (MSB first) or an 0o-prefixed octal literal"
        )))
    }

    /// The 256-state shaping code `(D^8+D^5+D^4+D^2+D+1, D^8+D^7+D^4+D^2+1)`,
    /// i.e. octal (467, 625).
    pub fn memory8() -> Self {
        Self::new(0o467, 0o625).expect("fixed generators are valid")
    }

    /// A small 4-state code `(1+D+D^2, 1+D^2)` used by tests and oracles.
    pub fn memory2() -> Self {
        Self::new(0b111, 0b101).expect("fixed generators are valid")
    }

    #[inline]
    pub fn memory(&self) -> usize {
        self.memory
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        1 << self.memory
    }

    #[inline]
    pub fn generators(&self) -> (u32, u32) {
        (self.g1, self.g2)
    }

    /// Output bits for one trellis step: `reg` holds the current input in
    /// bit 0 and past inputs in increasing bit positions.
    #[inline]
    pub(crate) fn step_outputs(&self, reg: u32) -> (bool, bool) {
        (
            (reg & self.g1).count_ones() & 1 != 0,
            (reg & self.g2).count_ones() & 1 != 0,
        )
    }

    /// Feed-forward encoding from the all-zero state. Output interleaves the
    /// two generator streams, `g1` output first: length `2 * input.len()`.
    pub fn encode(&self, input: &BitVector) -> BitVector {
        let mut out = BitVector::zeros(2 * input.len());
        let mut reg = 0u32;
        let mask = (1u32 << (self.memory + 1)) - 1;
        for t in 0..input.len() {
            reg = ((reg << 1) | u32::from(input.get(t))) & mask;
            let (c1, c2) = self.step_outputs(reg);
            if c1 {
                out.set(2 * t, true);
            }
            if c2 {
                out.set(2 * t + 1, true);
            }
        }
        out
    }

    /// Syndrome former: the transfer matrix `(g2, g1)` applied to the two
    /// interleaved streams of `z`, truncated to `z.len()/2` outputs. Every
    /// codeword maps to the all-zero syndrome.
    pub fn syndrome_former(&self, z: &BitVector) -> Result<BitVector> {
        if z.len() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "syndrome former input length {} is not a multiple of 2",
                z.len()
            )));
        }
        let steps = z.len() / 2;
        let mut out = BitVector::zeros(steps);
        for t in 0..steps {
            let mut acc = false;
            for j in 0..=self.memory.min(t) {
                let tau = t - j;
                if (self.g2 >> j) & 1 != 0 {
                    acc ^= z.get(2 * tau);
                }
                if (self.g1 >> j) & 1 != 0 {
                    acc ^= z.get(2 * tau + 1);
                }
            }
            if acc {
                out.set(t, true);
            }
        }
        Ok(out)
    }

    /// The syndrome former as an explicit sparse matrix (`s/2` x `s`).
    pub fn syndrome_former_matrix(&self, s: usize) -> Result<Gf2Matrix> {
        if s % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "sign-bit length {s} is not a multiple of 2"
            )));
        }
        let steps = s / 2;
        let mut entries = Vec::new();
        for t in 0..steps {
            for j in 0..=self.memory.min(t) {
                let tau = t - j;
                if (self.g2 >> j) & 1 != 0 {
                    entries.push((t, 2 * tau));
                }
                if (self.g1 >> j) & 1 != 0 {
                    entries.push((t, 2 * tau + 1));
                }
            }
        }
        Gf2Matrix::from_entries(steps, s, entries)
    }
}

/// Fixed right inverse of the syndrome former for one `(code, s)` pair.
///
/// Built once by GF(2) elimination and reused for every block; applying it
/// maps a `k' = s/2`-bit syndrome to a coset leader of length `s`.
#[derive(Clone)]
pub struct InverseSyndromeFormer {
    s: usize,
    k_prime: usize,
    /// `s` x `k'` right-inverse matrix, packed by rows.
    table: DenseBitMatrix,
}

impl InverseSyndromeFormer {
    pub fn new(code: &ConvCode, s: usize) -> Result<Self> {
        let sf = code.syndrome_former_matrix(s)?;
        let table = right_inverse(&sf)?;
        Ok(Self {
            s,
            k_prime: s / 2,
            table,
        })
    }

    #[inline]
    pub fn sign_len(&self) -> usize {
        self.s
    }

    #[inline]
    pub fn syndrome_len(&self) -> usize {
        self.k_prime
    }

    /// Coset leader `t` with `syndrome_former(t) == m_prime`.
    pub fn apply(&self, m_prime: &BitVector) -> Result<BitVector> {
        if m_prime.len() != self.k_prime {
            return Err(Error::DimensionMismatch(format!(
                "inverse syndrome former expects {} bits, got {}",
                self.k_prime,
                m_prime.len()
            )));
        }
        self.table.mul_vec(m_prime)
    }
}

/// A coset of the shaping code, identified by its leader.
pub struct CosetSpec<'a> {
    pub code: &'a ConvCode,
    pub leader: BitVector,
}

impl<'a> CosetSpec<'a> {
    pub fn from_syndrome(
        code: &'a ConvCode,
        isf: &InverseSyndromeFormer,
        m_prime: &BitVector,
    ) -> Result<Self> {
        Ok(Self {
            code,
            leader: isf.apply(m_prime)?,
        })
    }
}
