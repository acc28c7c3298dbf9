//! Irregular LDPC code: random construction from node-degree distributions,
//! systematic encoding, and log-domain belief-propagation decoding.
//!
//! Construction is random socket interleaving with duplicate-edge rejection.
//! Degree distributions are node-perspective: the coefficient of `x^(d-1)`
//! is the fraction of nodes with degree `d`. After integer rounding the
//! check-side degrees absorb the residual so that edge counts balance
//! exactly. Four-cycles between degree-2 variable nodes (weight-2 codewords)
//! are removed where possible, and rank deficiencies are repaired first by
//! degree-preserving edge swaps, then by redrawing offending rows.

use crate::error::{Error, Result};
use crate::gf2::{read_alist, write_alist, BitVector, DenseBitMatrix, Gf2Matrix};
use rand::seq::IndexedRandom;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Read, Write};

/// Node-perspective degree distribution: `(degree, fraction_of_nodes)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeDistribution {
    pairs: Vec<(usize, f64)>,
}

impl DegreeDistribution {
    pub fn new(pairs: &[(usize, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidParameter("empty degree distribution".into()));
        }
        let mut sorted = pairs.to_vec();
        sorted.sort_by_key(|&(d, _)| d);
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter(
                "repeated degree in distribution".into(),
            ));
        }
        for &(d, f) in &sorted {
            if d < 2 {
                return Err(Error::InvalidParameter(format!(
                    "degree {d} < 2 in distribution"
                )));
            }
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidParameter(format!(
                    "node fraction {f} outside [0, 1]"
                )));
            }
        }
        let sum: f64 = sorted.iter().map(|&(_, f)| f).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "node fractions sum to {sum}, expected 1"
            )));
        }
        Ok(Self { pairs: sorted })
    }

    /// A single-degree (regular) profile.
    pub fn regular(degree: usize) -> Result<Self> {
        Self::new(&[(degree, 1.0)])
    }

    pub fn pairs(&self) -> &[(usize, f64)] {
        &self.pairs
    }

    pub fn mean_degree(&self) -> f64 {
        self.pairs.iter().map(|&(d, f)| d as f64 * f).sum()
    }

    /// Integer node counts by largest-remainder rounding; counts sum to
    /// `total`.
    pub fn node_counts(&self, total: usize) -> Vec<(usize, usize)> {
        let mut counts: Vec<(usize, usize, f64)> = self
            .pairs
            .iter()
            .map(|&(d, f)| {
                let exact = f * total as f64;
                (d, exact.floor() as usize, exact - exact.floor())
            })
            .collect();
        let assigned: usize = counts.iter().map(|&(_, c, _)| c).sum();
        let mut leftover = total - assigned;
        // Hand out the remainder to the largest fractional parts.
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| counts[b].2.partial_cmp(&counts[a].2).unwrap());
        for &i in &order {
            if leftover == 0 {
                break;
            }
            counts[i].1 += 1;
            leftover -= 1;
        }
        counts.into_iter().map(|(d, c, _)| (d, c)).collect()
    }
}

/// Per-node degree targets after rounding repair: variable degrees (length
/// `n`) and check degrees (length `rows`), with equal edge totals.
///
/// The variable profile is kept exact; check degrees absorb the residual in
/// steps of one edge per node.
pub fn repaired_node_degrees(
    n: usize,
    rows: usize,
    var_dist: &DegreeDistribution,
    chk_dist: &DegreeDistribution,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if rows == 0 || n == 0 || rows >= n {
        return Err(Error::InvalidParameter(format!(
            "need 0 < rows < n, got rows={rows}, n={n}"
        )));
    }
    let mut var_deg = Vec::with_capacity(n);
    for (d, c) in var_dist.node_counts(n) {
        var_deg.extend(std::iter::repeat_n(d, c));
    }
    let mut chk_deg = Vec::with_capacity(rows);
    for (d, c) in chk_dist.node_counts(rows) {
        chk_deg.extend(std::iter::repeat_n(d, c));
    }
    let ev: usize = var_deg.iter().sum();
    let ec: i64 = chk_deg.iter().map(|&d| d as i64).sum();
    let mut delta = ev as i64 - ec;
    chk_deg.sort_unstable();
    let mut idx = rows;
    while delta > 0 {
        idx = if idx == 0 { rows - 1 } else { idx - 1 };
        if chk_deg[idx] >= n {
            return Err(Error::DegreeBalance(format!(
                "check degree would exceed {n} columns"
            )));
        }
        chk_deg[idx] += 1;
        delta -= 1;
    }
    let mut idx = rows;
    while delta < 0 {
        idx = if idx == 0 { rows - 1 } else { idx - 1 };
        if chk_deg[idx] <= 2 {
            return Err(Error::DegreeBalance(format!(
                "cannot shed {} edges without degree-1 checks",
                -delta
            )));
        }
        chk_deg[idx] -= 1;
        delta += 1;
    }
    if var_deg.iter().any(|&d| d > rows) {
        return Err(Error::DegreeBalance(format!(
            "a variable degree exceeds the {rows} available checks"
        )));
    }
    Ok((var_deg, chk_deg))
}

/// Check-node update rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BpVariant {
    /// Exact pairwise box-plus recursion in the log domain.
    #[default]
    #[serde(rename = "sum-product")]
    SumProduct,
    /// Min-sum approximation (faster, ~0.3-0.5 dB weaker).
    #[serde(rename = "min-sum")]
    MinSum,
}

/// Decoder result: hard decisions plus convergence bookkeeping.
#[derive(Clone, Debug)]
pub struct BpOutcome {
    pub hard_bits: BitVector,
    pub converged: bool,
    pub iterations: usize,
}

/// An LDPC code with a systematic encoder derived from its parity-check
/// matrix.
///
/// The stored `H` is in codeword column order: the first `K` positions carry
/// the message, the last `n - K` the parity. `col_perm` records where each
/// column of the original (pre-systematization) matrix ended up.
#[derive(Clone, Debug)]
pub struct LdpcCode {
    h: Gf2Matrix,
    n: usize,
    k_dim: usize,
    col_perm: Vec<usize>,
    parity_gen: DenseBitMatrix,
    // CSR adjacency for message passing: edges grouped by check.
    chk_ptr: Vec<u32>,
    edge_var: Vec<u32>,
    var_ptr: Vec<u32>,
    var_edges: Vec<u32>,
}

impl LdpcCode {
    /// Randomly construct an `(n, K)` code with the requested node-degree
    /// profiles. Identical seeds give identical codes.
    pub fn construct(
        n: usize,
        k_dim: usize,
        var_dist: &DegreeDistribution,
        chk_dist: &DegreeDistribution,
        seed: u64,
    ) -> Result<Self> {
        if k_dim == 0 || k_dim >= n {
            return Err(Error::InvalidParameter(format!(
                "need 0 < K < n, got K={k_dim}, n={n}"
            )));
        }
        let rows = n - k_dim;
        let (mut var_deg, mut chk_deg) = repaired_node_degrees(n, rows, var_dist, chk_dist)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1d9c_c0de);
        var_deg.shuffle(&mut rng);
        chk_deg.shuffle(&mut rng);

        let mut row_support = build_edges(&var_deg, &chk_deg, rows, &mut rng)?;
        remove_deg2_four_cycles(&mut row_support, &var_deg, &mut rng);

        // Rank repair loop: degree-preserving swaps first, fresh rows after.
        const MAX_REPAIRS: usize = 24;
        for attempt in 0..=MAX_REPAIRS {
            let mut h = Gf2Matrix::zeros(rows, n);
            for (r, sup) in row_support.iter().enumerate() {
                h.set_row(r, sup.iter().copied().collect());
            }
            match systematize(&h) {
                Ok((h_sys, col_perm, parity_gen)) => {
                    return Ok(Self::assemble(h_sys, n, k_dim, col_perm, parity_gen));
                }
                Err(deficient_rows) => {
                    if attempt == MAX_REPAIRS {
                        return Err(Error::Construction(format!(
                            "rank deficiency persisted after {MAX_REPAIRS} repairs"
                        )));
                    }
                    let preserve_degrees = attempt < MAX_REPAIRS / 2;
                    repair_rows(
                        &mut row_support,
                        &deficient_rows,
                        n,
                        preserve_degrees,
                        &mut rng,
                    );
                }
            }
        }
        unreachable!()
    }

    /// Wrap an existing parity-check matrix. Columns are permuted as needed
    /// to expose an invertible parity block at the tail; if the matrix is
    /// already in systematic order the permutation is the identity.
    pub fn from_h(h: Gf2Matrix) -> Result<Self> {
        let n = h.cols();
        let rows = h.rows();
        if rows == 0 || rows >= n {
            return Err(Error::InvalidParameter(format!(
                "parity-check matrix of {rows} rows x {n} cols has no code dimension"
            )));
        }
        let k_dim = n - rows;
        let (h_sys, col_perm, parity_gen) =
            systematize(&h).map_err(|_| Error::Construction("H is rank deficient".into()))?;
        Ok(Self::assemble(h_sys, n, k_dim, col_perm, parity_gen))
    }

    fn assemble(
        h: Gf2Matrix,
        n: usize,
        k_dim: usize,
        col_perm: Vec<usize>,
        parity_gen: DenseBitMatrix,
    ) -> Self {
        let rows = n - k_dim;
        let mut chk_ptr = Vec::with_capacity(rows + 1);
        let mut edge_var = Vec::new();
        chk_ptr.push(0u32);
        for r in 0..rows {
            edge_var.extend_from_slice(h.row(r));
            chk_ptr.push(edge_var.len() as u32);
        }
        let mut var_counts = vec![0u32; n];
        for &v in &edge_var {
            var_counts[v as usize] += 1;
        }
        let mut var_ptr = Vec::with_capacity(n + 1);
        var_ptr.push(0u32);
        for v in 0..n {
            var_ptr.push(var_ptr[v] + var_counts[v]);
        }
        let mut fill = var_ptr.clone();
        let mut var_edges = vec![0u32; edge_var.len()];
        for (e, &v) in edge_var.iter().enumerate() {
            var_edges[fill[v as usize] as usize] = e as u32;
            fill[v as usize] += 1;
        }
        Self {
            h,
            n,
            k_dim,
            col_perm,
            parity_gen,
            chk_ptr,
            edge_var,
            var_ptr,
            var_edges,
        }
    }

    #[inline]
    pub fn block_len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.k_dim
    }

    #[inline]
    pub fn num_checks(&self) -> usize {
        self.n - self.k_dim
    }

    pub fn h(&self) -> &Gf2Matrix {
        &self.h
    }

    pub fn column_permutation(&self) -> &[usize] {
        &self.col_perm
    }

    /// Histogram of variable-node degrees: `histogram[degree] = node count`.
    pub fn var_degree_histogram(&self) -> HashMap<usize, usize> {
        let mut hist = HashMap::new();
        for d in self.h.col_degrees() {
            *hist.entry(d).or_insert(0) += 1;
        }
        hist
    }

    pub fn chk_degree_histogram(&self) -> HashMap<usize, usize> {
        let mut hist = HashMap::new();
        for r in 0..self.num_checks() {
            *hist.entry(self.h.row(r).len()).or_insert(0) += 1;
        }
        hist
    }

    /// Systematic encoding: `codeword = [msg | parity]`, `H codeword = 0`.
    pub fn encode_systematic(&self, msg: &BitVector) -> Result<(BitVector, BitVector)> {
        if msg.len() != self.k_dim {
            return Err(Error::DimensionMismatch(format!(
                "message has {} bits, code dimension is {}",
                msg.len(),
                self.k_dim
            )));
        }
        let parity = self.parity_gen.mul_vec(msg)?;
        let codeword = BitVector::concat(&[msg, &parity]);
        Ok((codeword, parity))
    }

    /// True iff `H bits = 0`.
    pub fn syndrome_ok(&self, bits: &BitVector) -> bool {
        debug_assert_eq!(bits.len(), self.n);
        for r in 0..self.num_checks() {
            let mut acc = false;
            for e in self.chk_ptr[r]..self.chk_ptr[r + 1] {
                acc ^= bits.get(self.edge_var[e as usize] as usize);
            }
            if acc {
                return false;
            }
        }
        true
    }

    /// Flooding-schedule belief propagation.
    ///
    /// `llr_in` uses `log(P(bit=0)/P(bit=1))`; decoding exits early when the
    /// hard decision satisfies every check.
    pub fn bp_decode<R: crate::real::Real>(
        &self,
        llr_in: &[R],
        max_iter: usize,
        variant: BpVariant,
    ) -> Result<BpOutcome> {
        if llr_in.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "LLR vector has {} entries for block length {}",
                llr_in.len(),
                self.n
            )));
        }
        if llr_in.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("bp_decode LLR input"));
        }
        let hard = |totals: &[R]| {
            let mut bits = BitVector::zeros(self.n);
            for (i, &t) in totals.iter().enumerate() {
                if t < R::zero() {
                    bits.set(i, true);
                }
            }
            bits
        };

        let initial = hard(llr_in);
        if self.syndrome_ok(&initial) {
            return Ok(BpOutcome {
                hard_bits: initial,
                converged: true,
                iterations: 0,
            });
        }

        let num_edges = self.edge_var.len();
        let rows = self.num_checks();
        let mut v2c: Vec<R> = self.edge_var.iter().map(|&v| llr_in[v as usize]).collect();
        let mut c2v: Vec<R> = vec![R::zero(); num_edges];
        let max_deg = (0..rows)
            .map(|r| (self.chk_ptr[r + 1] - self.chk_ptr[r]) as usize)
            .max()
            .unwrap_or(0);
        let mut fwd: Vec<R> = vec![R::zero(); max_deg];
        let mut bwd: Vec<R> = vec![R::zero(); max_deg];
        let mut totals: Vec<R> = vec![R::zero(); self.n];

        for iter in 1..=max_iter {
            for r in 0..rows {
                let lo = self.chk_ptr[r] as usize;
                let hi = self.chk_ptr[r + 1] as usize;
                let deg = hi - lo;
                if deg == 0 {
                    continue;
                }
                if deg == 1 {
                    c2v[lo] = R::zero();
                    continue;
                }
                match variant {
                    BpVariant::SumProduct => {
                        // Forward-backward box-plus, leaving one message out.
                        fwd[0] = v2c[lo];
                        for i in 1..deg {
                            fwd[i] = boxplus(fwd[i - 1], v2c[lo + i]);
                        }
                        bwd[deg - 1] = v2c[hi - 1];
                        for i in (0..deg - 1).rev() {
                            bwd[i] = boxplus(bwd[i + 1], v2c[lo + i]);
                        }
                        for i in 0..deg {
                            c2v[lo + i] = if i == 0 {
                                bwd[1]
                            } else if i == deg - 1 {
                                fwd[deg - 2]
                            } else {
                                boxplus(fwd[i - 1], bwd[i + 1])
                            };
                        }
                    }
                    BpVariant::MinSum => {
                        let mut sign = false;
                        let mut min1 = R::infinity();
                        let mut min2 = R::infinity();
                        let mut min_at = lo;
                        for i in lo..hi {
                            let m = v2c[i];
                            if m < R::zero() {
                                sign = !sign;
                            }
                            let a = m.abs();
                            if a < min1 {
                                min2 = min1;
                                min1 = a;
                                min_at = i;
                            } else if a < min2 {
                                min2 = a;
                            }
                        }
                        for i in lo..hi {
                            let mag = if i == min_at { min2 } else { min1 };
                            let neg = sign ^ (v2c[i] < R::zero());
                            c2v[i] = if neg { -mag } else { mag };
                        }
                    }
                }
            }

            for v in 0..self.n {
                let mut acc = llr_in[v];
                for e in self.var_ptr[v]..self.var_ptr[v + 1] {
                    acc = acc + c2v[self.var_edges[e as usize] as usize];
                }
                totals[v] = acc;
            }
            for v in 0..self.n {
                for e in self.var_ptr[v]..self.var_ptr[v + 1] {
                    let edge = self.var_edges[e as usize] as usize;
                    v2c[edge] = totals[v] - c2v[edge];
                }
            }

            let bits = hard(&totals);
            if self.syndrome_ok(&bits) {
                return Ok(BpOutcome {
                    hard_bits: bits,
                    converged: true,
                    iterations: iter,
                });
            }
        }
        Ok(BpOutcome {
            hard_bits: hard(&totals),
            converged: false,
            iterations: max_iter,
        })
    }

    // ---- persistence: alist for H, dense cache for the parity generator ----

    pub fn write_alist<W: Write>(&self, w: W) -> Result<()> {
        write_alist(&self.h, w)
    }

    pub fn write_generator_cache<W: Write>(&self, w: W) -> Result<()> {
        self.parity_gen.write_to(w)
    }

    /// Load a code from an alist plus the cached parity generator, skipping
    /// elimination. The pair is cross-checked on a fixed probe word.
    pub fn from_alist_with_cache<A: BufRead, C: Read>(alist: A, cache: C) -> Result<Self> {
        let h = read_alist(alist)?;
        let parity_gen = DenseBitMatrix::read_from(cache)?;
        let n = h.cols();
        let rows = h.rows();
        if rows >= n {
            return Err(Error::InvalidParameter(
                "alist has no code dimension".into(),
            ));
        }
        let k_dim = n - rows;
        if parity_gen.rows() != rows || parity_gen.cols() != k_dim {
            return Err(Error::Parse(format!(
                "generator cache is {}x{}, expected {}x{}",
                parity_gen.rows(),
                parity_gen.cols(),
                rows,
                k_dim
            )));
        }
        let code = Self::assemble(h, n, k_dim, (0..n).collect(), parity_gen);
        let mut probe = BitVector::zeros(k_dim);
        let mut state = 0x9e3779b97f4a7c15u64;
        for i in 0..k_dim {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            if state >> 63 != 0 {
                probe.set(i, true);
            }
        }
        let (cw, _) = code.encode_systematic(&probe)?;
        if !code.syndrome_ok(&cw) {
            return Err(Error::Parse(
                "generator cache does not match the alist matrix".into(),
            ));
        }
        Ok(code)
    }
}

#[inline]
fn boxplus<R: crate::real::Real>(a: R, b: R) -> R {
    let sign_neg = (a < R::zero()) ^ (b < R::zero());
    let m = a.abs().min(b.abs());
    let base = if sign_neg { -m } else { m };
    base + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

/// Random socket interleaving with duplicate-edge rejection. Returns the
/// per-row supports.
fn build_edges(
    var_deg: &[usize],
    chk_deg: &[usize],
    rows: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<BTreeSet<u32>>> {
    let mut var_sockets: Vec<u32> = Vec::new();
    for (v, &d) in var_deg.iter().enumerate() {
        var_sockets.extend(std::iter::repeat_n(v as u32, d));
    }
    let mut chk_sockets: Vec<u32> = Vec::new();
    for (c, &d) in chk_deg.iter().enumerate() {
        chk_sockets.extend(std::iter::repeat_n(c as u32, d));
    }
    debug_assert_eq!(var_sockets.len(), chk_sockets.len());
    chk_sockets.shuffle(rng);

    let num_edges = var_sockets.len();
    let mut seen: HashSet<(u32, u32)> = HashSet::with_capacity(num_edges);
    let mut dups: Vec<usize> = Vec::new();
    for e in 0..num_edges {
        if !seen.insert((chk_sockets[e], var_sockets[e])) {
            dups.push(e);
        }
    }
    // Resolve duplicates by swapping check sockets with random partners.
    let mut attempts = 0usize;
    let attempt_cap = 200 * num_edges.max(64);
    while let Some(&e) = dups.last() {
        attempts += 1;
        if attempts > attempt_cap {
            return Err(Error::Construction(
                "could not remove duplicate edges; degree profile too tight".into(),
            ));
        }
        let j = rng.random_range(0..num_edges);
        let (ce, ve) = (chk_sockets[e], var_sockets[e]);
        let (cj, vj) = (chk_sockets[j], var_sockets[j]);
        if ce == cj {
            continue;
        }
        let new_a = (cj, ve);
        let new_b = (ce, vj);
        // Edge j is a registered edge; edge e is the pending duplicate.
        if seen.contains(&new_a) || seen.contains(&new_b) || new_a == new_b {
            continue;
        }
        seen.remove(&(cj, vj));
        seen.insert(new_a);
        seen.insert(new_b);
        chk_sockets[e] = cj;
        chk_sockets[j] = ce;
        dups.pop();
    }

    let mut row_support: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); rows];
    for e in 0..num_edges {
        row_support[chk_sockets[e] as usize].insert(var_sockets[e]);
    }
    Ok(row_support)
}

/// Break 4-cycles between degree-2 variable nodes (weight-2 codewords) by
/// trading one edge of the colliding node into a fresh check. Best effort:
/// degenerate profiles may not admit a full fix.
fn remove_deg2_four_cycles(
    row_support: &mut [BTreeSet<u32>],
    var_deg: &[usize],
    rng: &mut ChaCha8Rng,
) {
    let rows = row_support.len();
    let deg2: Vec<u32> = var_deg
        .iter()
        .enumerate()
        .filter(|&(_, &d)| d == 2)
        .map(|(v, _)| v as u32)
        .collect();
    if deg2.is_empty() {
        return;
    }
    let deg2_set: HashSet<u32> = deg2.iter().copied().collect();
    let checks_of = |row_support: &[BTreeSet<u32>], v: u32| -> Vec<usize> {
        (0..rows).filter(|&r| row_support[r].contains(&v)).collect()
    };
    let mut pair_owner: HashMap<(usize, usize), u32> = HashMap::new();
    for &v in &deg2 {
        let cs = checks_of(row_support, v);
        if cs.len() != 2 {
            continue;
        }
        let key = (cs[0].min(cs[1]), cs[0].max(cs[1]));
        if pair_owner.contains_key(&key) {
            // v collides; trade one of its edges with an edge of another row.
            for _ in 0..64 {
                let new_row = rng.random_range(0..rows);
                if new_row == cs[0] || new_row == cs[1] || row_support[new_row].contains(&v) {
                    continue;
                }
                // Partner edge must not create a duplicate and must not be a
                // degree-2 variable (its own pair key would change).
                let candidates: Vec<u32> = row_support[new_row]
                    .iter()
                    .copied()
                    .filter(|u| !deg2_set.contains(u) && !row_support[cs[1]].contains(u))
                    .collect();
                let Some(&u) = candidates.as_slice().choose(rng) else {
                    continue;
                };
                let nk = (cs[0].min(new_row), cs[0].max(new_row));
                if pair_owner.contains_key(&nk) {
                    continue;
                }
                row_support[new_row].remove(&u);
                row_support[new_row].insert(v);
                row_support[cs[1]].remove(&v);
                row_support[cs[1]].insert(u);
                pair_owner.insert(nk, v);
                break;
            }
        } else {
            pair_owner.insert(key, v);
        }
    }
}

/// Re-randomize deficient rows. With `preserve_degrees` the change is an
/// edge trade between rows (node degrees on both sides unchanged);
/// otherwise the row is redrawn at the same row degree.
fn repair_rows(
    row_support: &mut [BTreeSet<u32>],
    victims: &[usize],
    n: usize,
    preserve_degrees: bool,
    rng: &mut ChaCha8Rng,
) {
    let rows = row_support.len();
    for &r in victims {
        if preserve_degrees {
            let swaps = (row_support[r].len() / 2).max(1);
            for _ in 0..swaps {
                for _ in 0..32 {
                    let other = rng.random_range(0..rows);
                    if other == r {
                        continue;
                    }
                    let mine: Vec<u32> = row_support[r].iter().copied().collect();
                    let theirs: Vec<u32> = row_support[other].iter().copied().collect();
                    let (Some(&c), Some(&c2)) =
                        (mine.as_slice().choose(rng), theirs.as_slice().choose(rng))
                    else {
                        continue;
                    };
                    if c == c2 || row_support[r].contains(&c2) || row_support[other].contains(&c) {
                        continue;
                    }
                    row_support[r].remove(&c);
                    row_support[r].insert(c2);
                    row_support[other].remove(&c2);
                    row_support[other].insert(c);
                    break;
                }
            }
        } else {
            let deg = row_support[r].len();
            let mut fresh = BTreeSet::new();
            while fresh.len() < deg {
                fresh.insert(rng.random_range(0..n as u32));
            }
            row_support[r] = fresh;
        }
    }
}

/// Gauss-Jordan systematization preferring tail-column pivots.
///
/// On success returns the column-permuted `H` (parity block last), the
/// permutation `new_index[old_col]`, and the dense parity generator
/// (`rows x K`). On rank deficiency returns the involved row indices.
fn systematize(
    h: &Gf2Matrix,
) -> std::result::Result<(Gf2Matrix, Vec<usize>, DenseBitMatrix), Vec<usize>> {
    let rows = h.rows();
    let n = h.cols();
    let k_dim = n - rows;
    // Augment with the identity so dependent-row membership is recoverable.
    let mut work = h.to_dense_augmented();
    // Pivot scan order: parity tail first, then the message block.
    let mut pivots: Vec<usize> = Vec::with_capacity(rows);
    let mut pivot_row = 0usize;
    let scan = (k_dim..n).chain(0..k_dim);
    let mut is_pivot = vec![false; n];
    for col in scan {
        if pivot_row == rows {
            break;
        }
        let Some(hit) = (pivot_row..rows).find(|&r| work.get(r, col)) else {
            continue;
        };
        work.swap_rows(pivot_row, hit);
        for r in 0..rows {
            if r != pivot_row && work.get(r, col) {
                work.xor_row_into(pivot_row, r);
            }
        }
        pivots.push(col);
        is_pivot[col] = true;
        pivot_row += 1;
    }
    if pivot_row < rows {
        // Dependent rows: a zero H-part row names its combination in the
        // identity augment; re-randomizing those original rows breaks it.
        let mut victims = Vec::new();
        for r in pivot_row..rows {
            for orig in 0..rows {
                if work.get(r, n + orig) {
                    victims.push(orig);
                }
            }
        }
        victims.sort_unstable();
        victims.dedup();
        return Err(victims);
    }

    // Column order: non-pivots keep relative order in the message block,
    // pivots go to the parity block in pivot-row order.
    let mut new_index = vec![0usize; n];
    let msg_cols: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    for (j, &c) in msg_cols.iter().enumerate() {
        new_index[c] = j;
    }
    for (i, &c) in pivots.iter().enumerate() {
        new_index[c] = k_dim + i;
    }
    let h_sys = h.permute_columns(&new_index);

    // Parity generator from the reduced rows: parity_i = sum_j R[i, msg_j] m_j.
    let mut parity_gen = DenseBitMatrix::zeros(rows, k_dim);
    for i in 0..rows {
        for (j, &c) in msg_cols.iter().enumerate() {
            if work.get(i, c) {
                parity_gen.set(i, j, true);
            }
        }
    }
    Ok((h_sys, new_index, parity_gen))
}
