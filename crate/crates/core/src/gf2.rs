//! Binary vectors and GF(2) matrices.
//!
//! Parity-check matrices and syndrome formers are sparse, so [`Gf2Matrix`]
//! stores per-row support lists. Elimination is dense-ish work, so it runs
//! on [`DenseBitMatrix`], a packed 64-bit-word representation.
//!
//! Bit order convention: index 0 is the first transmitted / most significant
//! position everywhere in the crate.

use crate::error::{Error, Result};
use rand::Rng;
use std::io::{BufRead, Read, Write};

const WORD_BITS: usize = 64;

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// Fixed-length vector over GF(2), packed 64 bits per word.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 != 0 {
                v.set(i, true);
            }
        }
        v
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = Self::zeros(len);
        for w in v.words.iter_mut() {
            *w = rng.random();
        }
        v.mask_tail();
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 != 0
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if bit {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len, "BitVector xor length mismatch");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn xor(&self, other: &BitVector) -> BitVector {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Number of positions where `self` and `other` differ.
    pub fn distance(&self, other: &BitVector) -> usize {
        assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn iter_bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.iter_bits().map(u8::from).collect()
    }

    /// Copy of the half-open index range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> BitVector {
        assert!(start <= end && end <= self.len, "slice out of range");
        let mut out = BitVector::zeros(end - start);
        for i in start..end {
            if self.get(i) {
                out.set(i - start, true);
            }
        }
        out
    }

    pub fn concat(parts: &[&BitVector]) -> BitVector {
        let total = parts.iter().map(|p| p.len()).sum();
        let mut out = BitVector::zeros(total);
        let mut off = 0;
        for p in parts {
            for i in 0..p.len() {
                if p.get(i) {
                    out.set(off + i, true);
                }
            }
            off += p.len();
        }
        out
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Parity of `self & other` (a GF(2) inner product on equal lengths).
    pub fn dot(&self, other: &BitVector) -> bool {
        debug_assert_eq!(self.len, other.len);
        let acc: u64 = self
            .words
            .iter()
            .zip(&other.words)
            .fold(0u64, |acc, (a, b)| acc ^ (a & b));
        acc.count_ones() & 1 != 0
    }

    /// Hex encoding: bits packed 8 per byte, bit 0 in the byte's MSB.
    pub fn to_hex(&self) -> String {
        let nbytes = self.len.div_ceil(8);
        let mut s = String::with_capacity(2 * nbytes);
        for byte_idx in 0..nbytes {
            let mut b = 0u8;
            for k in 0..8 {
                let i = byte_idx * 8 + k;
                if i < self.len && self.get(i) {
                    b |= 0x80 >> k;
                }
            }
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        let nbytes = len.div_ceil(8);
        if hex.len() != 2 * nbytes {
            return Err(Error::Parse(format!(
                "hex string of {} chars cannot hold {} bits",
                hex.len(),
                len
            )));
        }
        let mut v = BitVector::zeros(len);
        for byte_idx in 0..nbytes {
            let b = u8::from_str_radix(&hex[2 * byte_idx..2 * byte_idx + 2], 16)
                .map_err(|e| Error::Parse(format!("bad hex byte: {e}")))?;
            for k in 0..8 {
                let i = byte_idx * 8 + k;
                if i < len && (b >> (7 - k)) & 1 != 0 {
                    v.set(i, true);
                }
            }
        }
        Ok(v)
    }

    fn mask_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitVector[{}; ", self.len)?;
        let shown = self.len.min(64);
        for i in 0..shown {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        if self.len > shown {
            write!(f, "…")?;
        }
        write!(f, "]")
    }
}

/// Sparse matrix over GF(2): per-row sorted column-index lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    row_support: Vec<Vec<u32>>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_support: vec![Vec::new(); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.row_support[i].push(i as u32);
        }
        m
    }

    /// Build from `(row, col)` entries. Duplicate positions are rejected:
    /// the entry set must be a set.
    pub fn from_entries<I>(rows: usize, cols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut m = Self::zeros(rows, cols);
        for (r, c) in entries {
            if r >= rows || c >= cols {
                return Err(Error::InvalidParameter(format!(
                    "entry ({r},{c}) out of {rows}x{cols} bounds"
                )));
            }
            m.row_support[r].push(c as u32);
        }
        for (r, sup) in m.row_support.iter_mut().enumerate() {
            sup.sort_unstable();
            if sup.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate entry in row {r}"
                )));
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u32] {
        &self.row_support[r]
    }

    pub fn num_entries(&self) -> usize {
        self.row_support.iter().map(Vec::len).sum()
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.row_support[r].binary_search(&(c as u32)).is_ok()
    }

    /// Column-degree histogram indexed by column.
    pub fn col_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.cols];
        for sup in &self.row_support {
            for &c in sup {
                deg[c as usize] += 1;
            }
        }
        deg
    }

    pub fn transpose(&self) -> Gf2Matrix {
        let mut t = Gf2Matrix::zeros(self.cols, self.rows);
        for (r, sup) in self.row_support.iter().enumerate() {
            for &c in sup {
                t.row_support[c as usize].push(r as u32);
            }
        }
        for sup in t.row_support.iter_mut() {
            sup.sort_unstable();
        }
        t
    }

    /// Sparse matrix-vector product over GF(2).
    pub fn mat_vec_mul(&self, v: &BitVector) -> Result<BitVector> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "mat_vec_mul: matrix has {} cols, vector has {} bits",
                self.cols,
                v.len()
            )));
        }
        let mut out = BitVector::zeros(self.rows);
        for (r, sup) in self.row_support.iter().enumerate() {
            let mut acc = false;
            for &c in sup {
                acc ^= v.get(c as usize);
            }
            if acc {
                out.set(r, true);
            }
        }
        Ok(out)
    }

    /// True iff `H v = 0`.
    pub fn in_kernel(&self, v: &BitVector) -> Result<bool> {
        Ok(self.mat_vec_mul(v)?.is_zero())
    }

    pub fn to_dense(&self) -> DenseBitMatrix {
        let mut d = DenseBitMatrix::zeros(self.rows, self.cols);
        for (r, sup) in self.row_support.iter().enumerate() {
            for &c in sup {
                d.set(r, c as usize, true);
            }
        }
        d
    }

    /// Dense copy augmented with the identity on the right: `[self | I]`.
    pub fn to_dense_augmented(&self) -> DenseBitMatrix {
        let mut d = DenseBitMatrix::zeros(self.rows, self.cols + self.rows);
        for (r, sup) in self.row_support.iter().enumerate() {
            for &c in sup {
                d.set(r, c as usize, true);
            }
            d.set(r, self.cols + r, true);
        }
        d
    }

    /// Reduced row-echelon form over GF(2).
    ///
    /// Returns `(reduced, pivot_columns, rank)`. The row space is preserved;
    /// pivot columns are reported in pivot-row order.
    pub fn row_reduce(&self) -> (Gf2Matrix, Vec<usize>, usize) {
        let mut d = self.to_dense();
        let pivots = d.row_reduce();
        let rank = pivots.len();
        (d.to_sparse(), pivots, rank)
    }

    pub fn rank(&self) -> usize {
        self.row_reduce().2
    }

    /// Apply a column relabeling: entry `(r, c)` moves to `(r, new_index[c])`.
    pub fn permute_columns(&self, new_index: &[usize]) -> Gf2Matrix {
        assert_eq!(new_index.len(), self.cols);
        let mut m = Gf2Matrix::zeros(self.rows, self.cols);
        for (r, sup) in self.row_support.iter().enumerate() {
            m.row_support[r] = sup.iter().map(|&c| new_index[c as usize] as u32).collect();
            m.row_support[r].sort_unstable();
        }
        m
    }

    pub(crate) fn set_row(&mut self, r: usize, mut support: Vec<u32>) {
        support.sort_unstable();
        support.dedup();
        self.row_support[r] = support;
    }
}

/// Dense packed bit matrix used for elimination and cached generators.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseBitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl DenseBitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let wpr = words_for(cols).max(1);
        Self {
            rows,
            cols,
            words_per_row: wpr,
            data: vec![0; rows * wpr],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        (self.data[r * self.words_per_row + c / WORD_BITS] >> (c % WORD_BITS)) & 1 != 0
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, bit: bool) {
        let idx = r * self.words_per_row + c / WORD_BITS;
        let mask = 1u64 << (c % WORD_BITS);
        if bit {
            self.data[idx] |= mask;
        } else {
            self.data[idx] &= !mask;
        }
    }

    #[inline]
    fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    /// `row[dst] ^= row[src]` (rows must differ).
    pub fn xor_row_into(&mut self, src: usize, dst: usize) {
        debug_assert_ne!(src, dst);
        let (src_off, dst_off) = (src * self.words_per_row, dst * self.words_per_row);
        // Rows never alias; split_at_mut keeps the borrow checker happy.
        if src_off < dst_off {
            let (a, b) = self.data.split_at_mut(dst_off);
            for (d, s) in b[..self.words_per_row]
                .iter_mut()
                .zip(&a[src_off..src_off + self.words_per_row])
            {
                *d ^= s;
            }
        } else {
            let (a, b) = self.data.split_at_mut(src_off);
            for (d, s) in a[dst_off..dst_off + self.words_per_row]
                .iter_mut()
                .zip(&b[..self.words_per_row])
            {
                *d ^= s;
            }
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.words_per_row {
            self.data
                .swap(a * self.words_per_row + w, b * self.words_per_row + w);
        }
    }

    /// In-place reduction to *reduced* row-echelon form. Returns the pivot
    /// columns in pivot-row order; `pivots.len()` is the rank.
    pub fn row_reduce(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut pivot_row = 0;
        for col in 0..self.cols {
            if pivot_row == self.rows {
                break;
            }
            let hit = (pivot_row..self.rows).find(|&r| self.get(r, col));
            let Some(hit) = hit else { continue };
            self.swap_rows(pivot_row, hit);
            for r in 0..self.rows {
                if r != pivot_row && self.get(r, col) {
                    self.xor_row_into(pivot_row, r);
                }
            }
            pivots.push(col);
            pivot_row += 1;
        }
        pivots
    }

    pub fn to_sparse(&self) -> Gf2Matrix {
        let mut m = Gf2Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let mut sup = Vec::new();
            for (w, &word) in self.row_words(r).iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let b = bits.trailing_zeros() as usize;
                    sup.push((w * WORD_BITS + b) as u32);
                    bits &= bits - 1;
                }
            }
            m.row_support[r] = sup;
        }
        m
    }

    /// `self * v` where rows are left factors; `v.len()` must equal `cols`.
    pub fn mul_vec(&self, v: &BitVector) -> Result<BitVector> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "mul_vec: {} cols vs {} bits",
                self.cols,
                v.len()
            )));
        }
        let mut out = BitVector::zeros(self.rows);
        let vw = v.words();
        for r in 0..self.rows {
            let acc = self
                .row_words(r)
                .iter()
                .zip(vw)
                .fold(0u64, |acc, (a, b)| acc ^ (a & b));
            if acc.count_ones() & 1 != 0 {
                out.set(r, true);
            }
        }
        Ok(out)
    }

    // ---- cached dense-matrix file: 8-byte magic, u64 rows, u64 cols, then
    // row-major packed bits (each row padded to a whole byte) ----

    const MAGIC: &'static [u8; 8] = b"GF2DENSE";

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        let bytes_per_row = self.cols.div_ceil(8);
        let mut buf = vec![0u8; bytes_per_row];
        for r in 0..self.rows {
            buf.iter_mut().for_each(|b| *b = 0);
            for c in 0..self.cols {
                if self.get(r, c) {
                    buf[c / 8] |= 1 << (c % 8);
                }
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Parse("bad dense bit-matrix magic".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let rows = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let cols = u64::from_le_bytes(b8) as usize;
        let bytes_per_row = cols.div_ceil(8);
        let mut m = Self::zeros(rows, cols);
        let mut buf = vec![0u8; bytes_per_row];
        for row in 0..rows {
            r.read_exact(&mut buf)?;
            for c in 0..cols {
                if (buf[c / 8] >> (c % 8)) & 1 != 0 {
                    m.set(row, c, true);
                }
            }
        }
        Ok(m)
    }
}

/// Solve `A X = I` for a full-row-rank `A`, returning one fixed right
/// inverse `X` (cols(A) x rows(A)). Free variables are set to zero, so the
/// result is deterministic.
pub fn right_inverse(a: &Gf2Matrix) -> Result<DenseBitMatrix> {
    let (rows, cols) = (a.rows(), a.cols());
    // Augment with the identity and reduce; RREF pivot rows then read off
    // one particular solution per unit target.
    let mut aug = DenseBitMatrix::zeros(rows, cols + rows);
    for r in 0..rows {
        for &c in a.row(r) {
            aug.set(r, c as usize, true);
        }
        aug.set(r, cols + r, true);
    }
    let pivots = aug.row_reduce();
    let pivots: Vec<usize> = pivots.into_iter().filter(|&p| p < cols).collect();
    if pivots.len() != rows {
        return Err(Error::Construction(format!(
            "right_inverse: matrix rank {} < {} rows",
            pivots.len(),
            rows
        )));
    }
    let mut x = DenseBitMatrix::zeros(cols, rows);
    for (j, &pcol) in pivots.iter().enumerate() {
        // Row j of the reduced system: pivot at pcol, RHS in the augment.
        for i in 0..rows {
            if aug.get(j, cols + i) {
                x.set(pcol, i, true);
            }
        }
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// alist import/export
// ---------------------------------------------------------------------------

/// Write `m` in alist text format (1-based indices, zero padding).
///
/// Rows are check nodes, columns are variable nodes; the first line is
/// `cols rows` following the usual variable-first convention.
pub fn write_alist<W: Write>(m: &Gf2Matrix, mut w: W) -> Result<()> {
    let col_deg = m.col_degrees();
    let row_deg: Vec<usize> = (0..m.rows()).map(|r| m.row(r).len()).collect();
    let max_col = col_deg.iter().copied().max().unwrap_or(0);
    let max_row = row_deg.iter().copied().max().unwrap_or(0);
    writeln!(w, "{} {}", m.cols(), m.rows())?;
    writeln!(w, "{max_col} {max_row}")?;
    writeln!(w, "{}", join(&col_deg))?;
    writeln!(w, "{}", join(&row_deg))?;
    let t = m.transpose();
    for c in 0..m.cols() {
        let mut entries: Vec<usize> = t.row(c).iter().map(|&r| r as usize + 1).collect();
        entries.resize(max_col, 0);
        writeln!(w, "{}", join(&entries))?;
    }
    for r in 0..m.rows() {
        let mut entries: Vec<usize> = m.row(r).iter().map(|&c| c as usize + 1).collect();
        entries.resize(max_row, 0);
        writeln!(w, "{}", join(&entries))?;
    }
    Ok(())
}

fn join(v: &[usize]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Read a matrix in alist format. Padding zeros are tolerated anywhere in
/// the per-node lists.
pub fn read_alist<R: BufRead>(r: R) -> Result<Gf2Matrix> {
    let mut nums = Vec::new();
    for line in r.lines() {
        let line = line?;
        for tok in line.split_whitespace() {
            nums.push(
                tok.parse::<i64>()
                    .map_err(|e| Error::Parse(format!("alist: bad token {tok:?}: {e}")))?,
            );
        }
    }
    let mut it = nums.into_iter();
    let mut next = |what: &str| -> Result<i64> {
        it.next()
            .ok_or_else(|| Error::Parse(format!("alist: truncated before {what}")))
    };
    let cols = next("cols")? as usize;
    let rows = next("rows")? as usize;
    let max_col = next("max col degree")? as usize;
    let max_row = next("max row degree")? as usize;
    let col_deg: Vec<usize> = (0..cols)
        .map(|_| next("col degree").map(|x| x as usize))
        .collect::<Result<_>>()?;
    let row_deg: Vec<usize> = (0..rows)
        .map(|_| next("row degree").map(|x| x as usize))
        .collect::<Result<_>>()?;
    let mut entries = Vec::new();
    for (c, &deg) in col_deg.iter().enumerate() {
        let mut seen = 0;
        for _ in 0..max_col {
            let v = next("col entry")?;
            if v != 0 {
                seen += 1;
                entries.push(((v - 1) as usize, c));
            }
        }
        if seen != deg {
            return Err(Error::Parse(format!(
                "alist: column {c} lists {seen} entries, degree says {deg}"
            )));
        }
    }
    // The row lists are redundant with the column lists; consume and verify.
    let mut row_seen = vec![0usize; rows];
    for seen in row_seen.iter_mut() {
        for _ in 0..max_row {
            let v = next("row entry")?;
            if v != 0 {
                *seen += 1;
            }
        }
    }
    for (r, (&want, &got)) in row_deg.iter().zip(&row_seen).enumerate() {
        if want != got {
            return Err(Error::Parse(format!(
                "alist: row {r} lists {got} entries, degree says {want}"
            )));
        }
    }
    Gf2Matrix::from_entries(rows, cols, entries)
}
