//! M-PAM constellation, sign-bit-compatible near-Gray labeling, modulo-M
//! folding and the replicated-constellation LLR demapper.
//!
//! The label of a symbol is `(z, b2, .., bl)` with `z` the sign (region)
//! bit: flipping `z` moves the symbol by exactly `M/2` after the modulo-M
//! fold, and the lower bits are Gray-coded within each region. LLRs follow
//! the convention `log(P(bit=0) / P(bit=1))` throughout the crate.

use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::real::{r, r_usize, Real};
use std::io::Write;

/// Replication count cap: replicas beyond `±4M` contribute nothing at the
/// noise levels the demapper sees.
pub const MAX_REPLICATION: usize = 4;

/// Fold `x` into the half-open cell `[-M/2, M/2)`.
pub fn mod_fold<R: Real>(x: R, m: usize) -> Result<R> {
    if !x.is_finite() {
        return Err(Error::NonFinite("mod_fold"));
    }
    let mf: R = r_usize(m);
    let half = mf / r(2.0);
    let mut y = x - mf * ((x + half) / mf).floor();
    // Guard against float rounding at the cell edge.
    if y < -half {
        y = y + mf;
    }
    if y >= half {
        y = y - mf;
    }
    Ok(y)
}

/// Consistent MMSE-scaled demapper noise variance: with
/// `alpha = P_X / (P_X + P_N)` the effective noise power is `alpha * P_N`.
pub fn effective_noise_var<R: Real>(p_x: R, p_n: R) -> R {
    p_x * p_n / (p_x + p_n)
}

/// M-PAM constellation with the sign-bit shaping label table.
#[derive(Clone, Debug)]
pub struct PamMapping<R: Real = f64> {
    m: usize,
    l: usize,
    /// Symbol for each label value; labels pack `(z, b2, .., bl)` MSB-first.
    symbol_of_label: Vec<R>,
    /// Label for each slot of the ascending alphabet `A`.
    label_of_slot: Vec<usize>,
}

fn gray_decode(g: usize, bits: usize) -> usize {
    let mut b = 0usize;
    let mut acc = 0usize;
    for i in (0..bits).rev() {
        acc ^= (g >> i) & 1;
        b |= acc << i;
    }
    b
}

impl<R: Real> PamMapping<R> {
    /// Build the `M`-PAM mapping. `M` must be a power of two, at least 4.
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "M = {m} must be a power of two >= 4"
            )));
        }
        let l = m.trailing_zeros() as usize;
        let half = m / 2;
        let inner_offset = (half as f64 - 1.0) / 2.0;
        let mut symbol_of_label = vec![R::zero(); m];
        for label in 0..m {
            let z = label >> (l - 1);
            let lower = label & (half - 1);
            let u = gray_decode(lower, l - 1);
            let base = u as f64 - inner_offset + (z * half) as f64;
            symbol_of_label[label] = mod_fold(r(base), m)?;
        }
        let mut label_of_slot = vec![0usize; m];
        for (label, &sym) in symbol_of_label.iter().enumerate() {
            let slot = (sym.to_f64().unwrap() + (m as f64 - 1.0) / 2.0).round() as usize;
            label_of_slot[slot] = label;
        }
        Ok(Self {
            m,
            l,
            symbol_of_label,
            label_of_slot,
        })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn bits_per_symbol(&self) -> usize {
        self.l
    }

    /// The alphabet `A` in ascending order: `-(M-1)/2, .., -1/2, 1/2, .., (M-1)/2`.
    pub fn alphabet(&self) -> Vec<R> {
        (0..self.m)
            .map(|slot| r::<R>(slot as f64 - (self.m as f64 - 1.0) / 2.0))
            .collect()
    }

    /// Mean square of the alphabet: `(M^2 - 1) / 12`.
    pub fn average_power(&self) -> R {
        let m = self.m as f64;
        r((m * m - 1.0) / 12.0)
    }

    #[inline]
    pub fn symbol_for_label(&self, label: usize) -> R {
        self.symbol_of_label[label]
    }

    /// Label of the slot-th smallest alphabet symbol.
    #[inline]
    pub fn label_for_slot(&self, slot: usize) -> usize {
        self.label_of_slot[slot]
    }

    /// Label from a sign bit plus `l-1` lower bits (b2 first).
    #[inline]
    pub fn label_from_bits(&self, sign: bool, lower: usize) -> usize {
        (usize::from(sign) << (self.l - 1)) | lower
    }

    /// Map sign bits and lower-bit planes to symbols.
    ///
    /// `lower_planes[p]` holds bit `b_{p+2}` of every symbol; all planes and
    /// `sign` must have equal length.
    pub fn map_symbols(&self, sign: &BitVector, lower_planes: &[BitVector]) -> Result<Vec<R>> {
        let s = sign.len();
        if lower_planes.len() != self.l - 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} lower bit planes, got {}",
                self.l - 1,
                lower_planes.len()
            )));
        }
        for (p, plane) in lower_planes.iter().enumerate() {
            if plane.len() != s {
                return Err(Error::DimensionMismatch(format!(
                    "lower plane {p} has {} bits, sign vector has {s}",
                    plane.len()
                )));
            }
        }
        Ok((0..s)
            .map(|i| self.symbol_of_label[self.label_at(sign, lower_planes, i)])
            .collect())
    }

    #[inline]
    pub(crate) fn label_at(&self, sign: &BitVector, lower_planes: &[BitVector], i: usize) -> usize {
        let mut lower = 0usize;
        for plane in lower_planes {
            lower = (lower << 1) | usize::from(plane.get(i));
        }
        self.label_from_bits(sign.get(i), lower)
    }

    /// Count of adjacent alphabet pairs whose labels differ in more than one
    /// bit (the "near-Gray" defect of the table).
    pub fn non_gray_transitions(&self) -> usize {
        (0..self.m - 1)
            .filter(|&slot| {
                let a = self.label_of_slot[slot];
                let b = self.label_of_slot[slot + 1];
                (a ^ b).count_ones() > 1
            })
            .count()
    }

    /// Dump the label table as CSV (`z,b2,..,bl,symbol`) for audit.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "z")?;
        for p in 2..=self.l {
            write!(w, ",b{p}")?;
        }
        writeln!(w, ",symbol")?;
        for label in 0..self.m {
            for bit in (0..self.l).rev() {
                if bit < self.l - 1 {
                    write!(w, ",")?;
                }
                write!(w, "{}", (label >> bit) & 1)?;
            }
            writeln!(w, ",{}", self.symbol_of_label[label])?;
        }
        Ok(())
    }
}

/// Periodic extension of the PAM alphabet by multiples of `M`; labels repeat
/// with period `M`.
#[derive(Clone, Debug)]
pub struct ReplicatedConstellation<R: Real = f64> {
    l: usize,
    r: usize,
    points: Vec<(R, usize)>,
}

impl<R: Real> ReplicatedConstellation<R> {
    pub fn new(base: &PamMapping<R>, replications: usize) -> Self {
        let m = base.order();
        let mut points = Vec::with_capacity((2 * replications + 1) * m);
        for j in -(replications as i64)..=(replications as i64) {
            for slot in 0..m {
                let label = base.label_for_slot(slot);
                let sym = base.symbol_for_label(label) + r::<R>((j * m as i64) as f64);
                points.push((sym, label));
            }
        }
        Self {
            l: base.bits_per_symbol(),
            r: replications,
            points,
        }
    }

    #[inline]
    pub fn replications(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn mean_square(&self) -> R {
        let sum: R = self.points.iter().map(|&(s, _)| s * s).sum();
        sum / r_usize(self.points.len())
    }

    /// Per-bit LLRs for one received value, `log P(bit=0) / P(bit=1)`,
    /// computed with log-sum-exp stabilization over all replicated points.
    pub fn demap_llr(&self, y_hat: R, noise_var: R) -> Result<Vec<R>> {
        if !(noise_var > R::zero()) {
            return Err(Error::InvalidParameter(
                "demapper noise variance must be positive".into(),
            ));
        }
        if !y_hat.is_finite() {
            return Err(Error::NonFinite("demap_llr"));
        }
        let inv = (r::<R>(2.0) * noise_var).recip();
        llr_from_points(self.l, self.points.iter().map(|&(sym, label)| {
            let d = y_hat - sym;
            (-d * d * inv, label)
        }))
    }
}

/// Smallest replication count whose point set has mean square at least
/// `total_power`, capped at [`MAX_REPLICATION`].
pub fn choose_replication<R: Real>(base: &PamMapping<R>, total_power: R) -> usize {
    for rep in 0..MAX_REPLICATION {
        let rc = ReplicatedConstellation::new(base, rep);
        if rc.mean_square() >= total_power {
            return rep;
        }
    }
    MAX_REPLICATION
}

/// Prior-weighted demapper over the base constellation (no replication).
///
/// `prior[slot]` is the a-priori probability of the slot-th smallest
/// alphabet symbol; entries must be positive and sum to 1. With a uniform
/// prior this reduces to `demap_llr` at `r = 0`.
pub fn demap_llr_with_prior<R: Real>(
    mapping: &PamMapping<R>,
    y: R,
    noise_var: R,
    prior: &[R],
) -> Result<Vec<R>> {
    if !(noise_var > R::zero()) {
        return Err(Error::InvalidParameter(
            "demapper noise variance must be positive".into(),
        ));
    }
    if !y.is_finite() {
        return Err(Error::NonFinite("demap_llr_with_prior"));
    }
    let m = mapping.order();
    if prior.len() != m {
        return Err(Error::InvalidParameter(format!(
            "prior has {} entries for an {m}-point alphabet",
            prior.len()
        )));
    }
    let sum: R = prior.iter().copied().sum();
    let tol = r::<R>(1e-6);
    if prior.iter().any(|&p| !(p > R::zero())) || (sum - R::one()).abs() > tol {
        return Err(Error::InvalidParameter(
            "prior entries must be positive and sum to 1".into(),
        ));
    }
    let inv = (r::<R>(2.0) * noise_var).recip();
    llr_from_points(
        mapping.bits_per_symbol(),
        (0..m).map(|slot| {
            let label = mapping.label_for_slot(slot);
            let sym = mapping.symbol_for_label(label);
            let d = y - sym;
            (prior[slot].ln() - d * d * inv, label)
        }),
    )
}

/// Discretized zero-mean Gaussian prior over the alphabet, renormalized.
pub fn gaussian_prior<R: Real>(mapping: &PamMapping<R>, variance: R) -> Result<Vec<R>> {
    if !(variance > R::zero()) {
        return Err(Error::InvalidParameter(
            "prior variance must be positive".into(),
        ));
    }
    let weights: Vec<R> = mapping
        .alphabet()
        .iter()
        .map(|&a| (-a * a / (r::<R>(2.0) * variance)).exp())
        .collect();
    let total: R = weights.iter().copied().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Shared log-domain accumulation: stream `(exponent, label)` pairs and
/// return per-bit LLRs via max-star.
fn llr_from_points<R: Real>(
    l: usize,
    points: impl Iterator<Item = (R, usize)> + Clone,
) -> Result<Vec<R>> {
    let neg_inf = R::neg_infinity();
    // First pass: per-(bit, value) maxima.
    let mut max0 = vec![neg_inf; l];
    let mut max1 = vec![neg_inf; l];
    for (e, label) in points.clone() {
        for bit in 0..l {
            // bit 0 of the LLR vector is the sign bit (label MSB).
            if (label >> (l - 1 - bit)) & 1 == 0 {
                if e > max0[bit] {
                    max0[bit] = e;
                }
            } else if e > max1[bit] {
                max1[bit] = e;
            }
        }
    }
    // Second pass: scaled sums.
    let mut sum0 = vec![R::zero(); l];
    let mut sum1 = vec![R::zero(); l];
    for (e, label) in points {
        for bit in 0..l {
            if (label >> (l - 1 - bit)) & 1 == 0 {
                sum0[bit] = sum0[bit] + (e - max0[bit]).exp();
            } else {
                sum1[bit] = sum1[bit] + (e - max1[bit]).exp();
            }
        }
    }
    Ok((0..l)
        .map(|bit| (max0[bit] + sum0[bit].ln()) - (max1[bit] + sum1[bit].ln()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mapping() -> PamMapping<f64> {
        PamMapping::new(16).unwrap()
    }

    #[test]
    fn mod_fold_examples() {
        assert!((mod_fold(9.3f64, 16).unwrap() - (-6.7)).abs() < 1e-12);
        assert_eq!(mod_fold(-8.0f64, 16).unwrap(), -8.0);
        assert_eq!(mod_fold(23.5f64, 16).unwrap(), 7.5);
        assert_eq!(mod_fold(8.0f64, 16).unwrap(), -8.0);
    }

    #[test]
    fn mod_fold_rejects_non_finite() {
        assert!(mod_fold(f64::NAN, 16).is_err());
        assert!(mod_fold(f64::INFINITY, 16).is_err());
    }

    #[test]
    fn mod_fold_idempotent_and_in_range() {
        for i in 0..2000 {
            let x = (i as f64) * 0.731 - 730.0;
            let y = mod_fold(x, 16).unwrap();
            assert!((-8.0..8.0).contains(&y), "{x} folded to {y}");
            assert_eq!(mod_fold(y, 16).unwrap(), y);
            // Congruence: x - y is a multiple of 16.
            let k = (x - y) / 16.0;
            assert!((k - k.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn alphabet_is_half_integer_grid() {
        let map = mapping();
        let a = map.alphabet();
        assert_eq!(a.len(), 16);
        assert_eq!(a[0], -7.5);
        assert_eq!(a[15], 7.5);
        for w in a.windows(2) {
            assert_eq!(w[1] - w[0], 1.0);
        }
        assert!((map.average_power() - 21.25).abs() < 1e-12);
    }

    #[test]
    fn label_table_is_bijective() {
        let map = mapping();
        let mut seen = vec![false; 16];
        for label in 0..16 {
            let sym = map.symbol_for_label(label);
            let slot = (sym + 7.5).round() as usize;
            assert!(!seen[slot], "two labels map to symbol {sym}");
            seen[slot] = true;
            assert_eq!(map.label_for_slot(slot), label);
        }
    }

    #[test]
    fn fixed_mapping_values() {
        let map = mapping();
        assert_eq!(map.symbol_for_label(map.label_from_bits(false, 0)), -3.5);
        assert_eq!(map.symbol_for_label(map.label_from_bits(true, 0)), 4.5);
    }

    #[test]
    fn sign_flip_moves_by_half_period() {
        let map = mapping();
        for lower in 0..8 {
            let a = map.symbol_for_label(map.label_from_bits(false, lower));
            let b = map.symbol_for_label(map.label_from_bits(true, lower));
            let d = mod_fold(b - a, 16).unwrap().abs();
            assert_eq!(d, 8.0, "lower bits {lower:03b}");
        }
    }

    #[test]
    fn near_gray_defect_is_two_transitions() {
        // Property of the fixed table: Gray within each region, with the two
        // region boundaries (+-M/4) as the only multi-bit transitions.
        assert_eq!(mapping().non_gray_transitions(), 2);
    }

    #[test]
    fn map_symbols_and_planes() {
        let map = mapping();
        let sign = BitVector::from_bits(&[0, 1]);
        let planes = vec![
            BitVector::from_bits(&[0, 0]),
            BitVector::from_bits(&[0, 0]),
            BitVector::from_bits(&[0, 0]),
        ];
        let v = map.map_symbols(&sign, &planes).unwrap();
        assert_eq!(v, vec![-3.5, 4.5]);
        let bad = map.map_symbols(&sign, &planes[..2].to_vec());
        assert!(bad.is_err());
    }

    /// Direct-summation oracle with no stabilization beyond a global shift.
    fn llr_oracle(points: &[(f64, usize)], l: usize, y: f64, nv: f64, prior: Option<&[f64]>) -> Vec<f64> {
        (0..l)
            .map(|bit| {
                let (mut s0, mut s1) = (0.0f64, 0.0f64);
                for (idx, &(sym, label)) in points.iter().enumerate() {
                    let w = prior.map_or(1.0, |p| p[idx % p.len()]);
                    let e = w * (-(y - sym) * (y - sym) / (2.0 * nv)).exp();
                    if (label >> (l - 1 - bit)) & 1 == 0 {
                        s0 += e;
                    } else {
                        s1 += e;
                    }
                }
                (s0 / s1).ln()
            })
            .collect()
    }

    #[test]
    fn demap_llr_symmetry_at_origin() {
        // With this table the sign bit separates inner from outer symbols,
        // so at y=0 it must favor bit 0 (inner); the bit whose 0/1 sets are
        // mirror images of each other is b2, and its LLR vanishes at y=0.
        let map = mapping();
        let rc = ReplicatedConstellation::new(&map, 0);
        let llr = rc.demap_llr(0.0, 1.0).unwrap();
        assert!(llr[0] > 0.0, "sign bit must favor the inner region");
        assert!(llr[1].abs() < 1e-12, "mirror bit LLR {} at y=0", llr[1]);
    }

    #[test]
    fn demap_llr_diverges_as_noise_vanishes() {
        let map = mapping();
        let rc = ReplicatedConstellation::new(&map, 0);
        // Sit exactly on the symbol labeled (z=0, lower=0): -3.5.
        let mut prev = f64::NEG_INFINITY;
        for nv in [1.0, 0.5, 0.2, 0.1, 0.05, 0.01] {
            let llr = rc.demap_llr(-3.5, nv).unwrap();
            assert!(llr[0] > prev);
            assert!(llr[0].is_finite());
            prev = llr[0];
        }
        // Nearest sign-bit-1 point is one unit away: L1 ~ 1/(2*nv).
        assert!(prev > 40.0);
    }

    #[test]
    fn demap_llr_matches_direct_summation() {
        let map = mapping();
        let rc = ReplicatedConstellation::new(&map, 1);
        assert_eq!(rc.num_points(), 48);
        let pts: Vec<(f64, usize)> = (0..48).map(|i| rc.points[i]).collect();
        let got = rc.demap_llr(1.3, 0.5).unwrap();
        let want = llr_oracle(&pts, 4, 1.3, 0.5, None);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn demap_llr_rejects_bad_noise_var() {
        let rc = ReplicatedConstellation::new(&mapping(), 0);
        assert!(rc.demap_llr(0.0, 0.0).is_err());
        assert!(rc.demap_llr(0.0, -1.0).is_err());
    }

    #[test]
    fn prior_uniform_reduces_to_plain_demapper() {
        let map = mapping();
        let rc = ReplicatedConstellation::new(&map, 0);
        let prior = vec![1.0 / 16.0; 16];
        for y in [-5.3, -0.2, 0.0, 2.9, 7.9] {
            let a = rc.demap_llr(y, 0.7).unwrap();
            let b = demap_llr_with_prior(&map, y, 0.7, &prior).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prior_concentrated_saturates_toward_label() {
        let map = mapping();
        // Essentially all mass on slot 2 (symbol -5.5).
        let mut prior = vec![1e-30; 16];
        prior[2] = 1.0 - 15.0 * 1e-30;
        let llr = demap_llr_with_prior(&map, 0.0, 1.0, &prior).unwrap();
        let label = map.label_for_slot(2);
        for bit in 0..4 {
            let want_one = (label >> (3 - bit)) & 1 == 1;
            if want_one {
                assert!(llr[bit] < -20.0, "bit {bit}: {}", llr[bit]);
            } else {
                assert!(llr[bit] > 20.0, "bit {bit}: {}", llr[bit]);
            }
        }
    }

    #[test]
    fn prior_gaussian_matches_weighted_oracle() {
        let map = mapping();
        let prior = gaussian_prior(&map, 18.0).unwrap();
        let pts: Vec<(f64, usize)> = (0..16)
            .map(|slot| {
                let label = map.label_for_slot(slot);
                (map.symbol_for_label(label), label)
            })
            .collect();
        let got = demap_llr_with_prior(&map, 2.0, 1.4, &prior).unwrap();
        let want = llr_oracle(&pts, 4, 2.0, 1.4, Some(&prior));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn prior_validation() {
        let map = mapping();
        assert!(demap_llr_with_prior(&map, 0.0, 1.0, &vec![0.5; 16]).is_err());
        assert!(demap_llr_with_prior(&map, 0.0, 1.0, &vec![1.0 / 8.0; 8]).is_err());
        let mut p = vec![1.0 / 15.0; 16];
        p[3] = 0.0;
        assert!(demap_llr_with_prior(&map, 0.0, 1.0, &p).is_err());
    }

    #[test]
    fn replication_choice() {
        let map = mapping();
        assert_eq!(choose_replication(&map, 21.25), 0);
        assert_eq!(choose_replication(&map, 22.0), 1);
        // Monotone in total power, capped at MAX_REPLICATION.
        let mut prev = 0;
        for p in [5.0, 21.25, 22.0, 100.0, 300.0, 900.0, 5000.0, 1e9] {
            let rep = choose_replication(&map, p);
            assert!(rep >= prev);
            assert!(rep <= MAX_REPLICATION);
            prev = rep;
        }
        assert_eq!(choose_replication(&map, 1e9), MAX_REPLICATION);
    }

    #[test]
    fn replicated_mean_square_by_direct_computation() {
        let map = mapping();
        let rc0 = ReplicatedConstellation::new(&map, 0);
        assert!((rc0.mean_square() - 21.25).abs() < 1e-12);
        let rc1 = ReplicatedConstellation::new(&map, 1);
        // 48 contiguous half-integer points: (48^2 - 1) / 12.
        assert!((rc1.mean_square() - (48.0f64 * 48.0 - 1.0) / 12.0).abs() < 1e-9);
    }

    #[test]
    fn bit_posteriors_consistent_with_symbol_posterior() {
        // On the base constellation: p(bit i = 0 | y) from the LLRs must
        // match direct symbol-posterior marginalization.
        let map = mapping();
        let rc = ReplicatedConstellation::new(&map, 0);
        let (y, nv) = (1.7, 0.9);
        let llr = rc.demap_llr(y, nv).unwrap();
        let mut post = vec![0.0f64; 16];
        let mut total = 0.0;
        for slot in 0..16 {
            let sym = map.symbol_for_label(map.label_for_slot(slot));
            let e = (-(y - sym) * (y - sym) / (2.0 * nv)).exp();
            post[slot] = e;
            total += e;
        }
        for bit in 0..4 {
            let mut p0 = 0.0;
            for slot in 0..16 {
                if (map.label_for_slot(slot) >> (3 - bit)) & 1 == 0 {
                    p0 += post[slot];
                }
            }
            p0 /= total;
            let from_llr = 1.0 / (1.0 + (-llr[bit]).exp());
            assert!((p0 - from_llr).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_variance_identity() {
        // (1-a)^2 Px + a^2 Pn == a Pn for a = Px/(Px+Pn).
        for (px, pn) in [(15.9f64, 0.2f64), (1.0, 1.0), (100.0, 0.01), (3.7, 2.2)] {
            let a = px / (px + pn);
            let lhs = (1.0 - a) * (1.0 - a) * px + a * a * pn;
            let rhs = effective_noise_var(px, pn);
            assert!((lhs - rhs).abs() < 1e-12 * rhs);
            assert!((rhs - a * pn).abs() < 1e-12 * rhs);
        }
    }

    #[test]
    fn csv_export_has_all_rows() {
        let mut buf = Vec::new();
        mapping().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.lines().next().unwrap().starts_with("z,b2,b3,b4"));
    }

    #[test]
    fn generic_f32_instantiation() {
        let map: PamMapping<f32> = PamMapping::new(16).unwrap();
        let rc = ReplicatedConstellation::new(&map, 1);
        let llr = rc.demap_llr(1.25f32, 0.5).unwrap();
        assert_eq!(llr.len(), 4);
        assert!(llr.iter().all(|x| x.is_finite()));
    }
}
