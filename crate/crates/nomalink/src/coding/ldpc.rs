//! Regular LDPC code: deterministic construction, systematic encoder, and
//! sum-product decoder.
//!
//! The code family is (3,6)-regular rate 1/2. The parity-check matrix is
//! grown column by column with a fixed seed: each column picks three rows
//! among those still below their target weight, re-drawing up to a retry
//! budget whenever the choice would close a length-4 cycle. Columns are then
//! permuted (deterministically, and usually not at all) so that the last
//! `m` columns form an invertible square block, which yields a systematic
//! encoder `parity = E * info` precomputed as a dense GF(2) matrix.
//!
//! Decoding is flooding sum-product (exact tanh rule) with early exit on a
//! zero syndrome.

use crate::error::{Error, Result};
use crate::rng::SimRng;

use std::collections::HashSet;

/// Seed for the pseudorandom parity-matrix construction.
pub const CONSTRUCTION_SEED: u64 = 20180416;

/// Retry budget per column before accepting a length-4 cycle.
const COLUMN_RETRIES: usize = 200;

/// Sparse binary parity-check matrix with both adjacency directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseParity {
    pub n: usize,
    pub m: usize,
    check_to_var: Vec<Vec<usize>>,
    var_to_check: Vec<Vec<usize>>,
}

impl SparseParity {
    /// Build from per-column row lists.
    pub fn from_columns(n: usize, m: usize, columns: &[Vec<usize>]) -> Self {
        assert_eq!(columns.len(), n);
        let mut check_to_var = vec![Vec::new(); m];
        let mut var_to_check = vec![Vec::new(); n];
        for (col, rows) in columns.iter().enumerate() {
            for &row in rows {
                assert!(row < m);
                check_to_var[row].push(col);
                var_to_check[col].push(row);
            }
        }
        for list in check_to_var.iter_mut() {
            list.sort_unstable();
        }
        for list in var_to_check.iter_mut() {
            list.sort_unstable();
        }
        Self {
            n,
            m,
            check_to_var,
            var_to_check,
        }
    }

    #[inline]
    pub fn check_neighbors(&self, c: usize) -> &[usize] {
        &self.check_to_var[c]
    }

    #[inline]
    pub fn var_neighbors(&self, v: usize) -> &[usize] {
        &self.var_to_check[v]
    }

    pub fn num_edges(&self) -> usize {
        self.check_to_var.iter().map(|r| r.len()).sum()
    }

    /// H * c over GF(2) is all zero.
    pub fn syndrome_ok(&self, codeword: &[u8]) -> bool {
        self.check_to_var
            .iter()
            .all(|vars| vars.iter().fold(0u8, |acc, &v| acc ^ codeword[v]) == 0)
    }

    /// Applies a column permutation: new column j = old column perm[j].
    fn permute_columns(&self, perm: &[usize]) -> Self {
        let columns: Vec<Vec<usize>> = perm
            .iter()
            .map(|&old| self.var_to_check[old].clone())
            .collect();
        Self::from_columns(self.n, self.m, &columns)
    }
}

/// One LDPC code instance plus transport-block framing.
///
/// The systematic codeword is `[payload | crc | zero padding | parity]`:
/// `payload_bits + CRC_WIDTH` bits are zero-padded up to `info_bits`, and the
/// decoder pins the padding with a large prior.
#[derive(Debug, Clone)]
pub struct CodeConfig {
    pub info_bits: usize,
    pub coded_bits: usize,
    pub payload_bits: usize,
    pub crc_width: usize,
    pub bp_iterations: usize,
    parity: SparseParity,
    /// Encoder columns: `encoder_cols[j]` is column j of E = Hp^-1 * Hi,
    /// packed little-endian into 64-bit words of parity-bit indices.
    encoder_cols: Vec<Vec<u64>>,
    /// Edge layout for message passing, variable-major: edge e of variable v
    /// sits at `var_edge_start[v] + position of the check in var_neighbors(v)`.
    var_edge_start: Vec<usize>,
    /// Per check node, the edge indices of its incident variables.
    check_edges: Vec<Vec<usize>>,
}

/// LLR magnitude used to pin zero-padding bits at the decoder.
pub const PAD_LLR: f64 = 200.0;

/// Soft-decision decode output.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    /// Posterior LLRs over all coded bits.
    pub posterior_llrs: Vec<f64>,
    /// Posterior minus channel input, elementwise.
    pub extrinsic_llrs: Vec<f64>,
    /// Hard decisions: 0 iff posterior >= 0.
    pub hard_bits: Vec<u8>,
    /// All parity checks satisfied.
    pub syndrome_ok: bool,
    /// CRC over the (payload + crc) info prefix passes.
    pub crc_ok: bool,
    /// Belief-propagation iterations actually run.
    pub iterations: usize,
}

impl CodeConfig {
    /// Builds the (3,6)-regular rate-1/2 code of length `coded_bits` for
    /// transport blocks of `payload_bits`.
    pub fn regular(coded_bits: usize, payload_bits: usize, bp_iterations: usize) -> Result<Self> {
        if coded_bits % 2 != 0 || coded_bits % 64 != 0 {
            return Err(Error::Config(format!(
                "code length {coded_bits} must be an even multiple of 64"
            )));
        }
        let m = coded_bits / 2;
        let info_bits = coded_bits - m;
        if payload_bits + super::crc::CRC_WIDTH > info_bits {
            return Err(Error::Config(format!(
                "payload {payload_bits} + CRC does not fit in {info_bits} info bits"
            )));
        }
        // Salted restarts cover the rare rank-deficient or stuck sample.
        for salt in 0..32u64 {
            if let Some(columns) = sample_regular_columns(coded_bits, m, CONSTRUCTION_SEED + salt) {
                let parity = SparseParity::from_columns(coded_bits, m, &columns);
                if let Some(code) = Self::from_parity_internal(parity, payload_bits, bp_iterations)
                {
                    return Ok(code);
                }
            }
        }
        Err(Error::Config(format!(
            "failed to construct a regular code of length {coded_bits}"
        )))
    }

    /// Wraps an existing parity matrix (for example one imported from an
    /// alist file). Columns are permuted deterministically if the trailing
    /// square block is singular.
    pub fn from_parity(
        parity: SparseParity,
        payload_bits: usize,
        bp_iterations: usize,
    ) -> Result<Self> {
        let info_bits = parity.n - parity.m;
        if payload_bits + super::crc::CRC_WIDTH > info_bits {
            return Err(Error::Config(format!(
                "payload {payload_bits} + CRC does not fit in {info_bits} info bits"
            )));
        }
        Self::from_parity_internal(parity, payload_bits, bp_iterations)
            .ok_or_else(|| Error::Config("parity matrix is not full row rank".into()))
    }

    fn from_parity_internal(
        parity: SparseParity,
        payload_bits: usize,
        bp_iterations: usize,
    ) -> Option<Self> {
        let (parity, encoder_cols) = systematize(parity)?;
        let info_bits = parity.n - parity.m;

        let mut var_edge_start = Vec::with_capacity(parity.n + 1);
        var_edge_start.push(0usize);
        for v in 0..parity.n {
            var_edge_start.push(var_edge_start[v] + parity.var_neighbors(v).len());
        }
        let mut check_edges: Vec<Vec<usize>> = Vec::with_capacity(parity.m);
        for c in 0..parity.m {
            let edges = parity
                .check_neighbors(c)
                .iter()
                .map(|&v| {
                    let pos = parity
                        .var_neighbors(v)
                        .iter()
                        .position(|&cc| cc == c)
                        .expect("adjacency mismatch");
                    var_edge_start[v] + pos
                })
                .collect();
            check_edges.push(edges);
        }

        Some(Self {
            info_bits,
            coded_bits: parity.n,
            payload_bits,
            crc_width: super::crc::CRC_WIDTH,
            bp_iterations,
            parity,
            encoder_cols,
            var_edge_start,
            check_edges,
        })
    }

    pub fn parity(&self) -> &SparseParity {
        &self.parity
    }

    /// Code rate info/coded.
    pub fn rate(&self) -> f64 {
        self.info_bits as f64 / self.coded_bits as f64
    }

    /// First zero-padding position inside the info part.
    pub fn pad_start(&self) -> usize {
        self.payload_bits + self.crc_width
    }

    /// Systematic encode: H * c = 0 with the first `info_bits` positions
    /// equal to `info`.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.info_bits {
            return Err(Error::Contract(format!(
                "info length {} != {}",
                info.len(),
                self.info_bits
            )));
        }
        let m = self.parity.m;
        let words = m.div_ceil(64);
        let mut acc = vec![0u64; words];
        for (j, &bit) in info.iter().enumerate() {
            if bit == 1 {
                for (a, e) in acc.iter_mut().zip(self.encoder_cols[j].iter()) {
                    *a ^= e;
                }
            }
        }
        let mut codeword = Vec::with_capacity(self.coded_bits);
        codeword.extend_from_slice(info);
        for i in 0..m {
            codeword.push(((acc[i / 64] >> (i % 64)) & 1) as u8);
        }
        Ok(codeword)
    }

    /// Full transport-block encode: attach CRC, zero-pad, LDPC-encode.
    pub fn encode_transport(&self, payload: &[u8]) -> Result<Vec<u8>> {
        if payload.len() != self.payload_bits {
            return Err(Error::Contract(format!(
                "payload length {} != {}",
                payload.len(),
                self.payload_bits
            )));
        }
        let mut info = super::crc::crc_attach(payload);
        info.resize(self.info_bits, 0);
        self.encode(&info)
    }

    /// Flooding sum-product decode.
    pub fn decode(&self, channel_llrs: &[f64]) -> Result<DecodeResult> {
        if channel_llrs.len() != self.coded_bits {
            return Err(Error::Contract(format!(
                "LLR length {} != {}",
                channel_llrs.len(),
                self.coded_bits
            )));
        }
        let h = &self.parity;
        let n = h.n;
        let var_edge_start = &self.var_edge_start;
        let num_edges = var_edge_start[n];

        let mut v2c = vec![0.0f64; num_edges];
        let mut c2v = vec![0.0f64; num_edges];
        for v in 0..n {
            for e in var_edge_start[v]..var_edge_start[v + 1] {
                v2c[e] = channel_llrs[v];
            }
        }

        let mut posterior = channel_llrs.to_vec();
        let mut extrinsic = vec![0.0f64; n];
        let mut hard: Vec<u8> = posterior.iter().map(|&l| (l < 0.0) as u8).collect();
        let mut syndrome_ok = h.syndrome_ok(&hard);
        let mut iterations = 0;

        let mut tanh_buf = [0.0f64; 64];
        while iterations < self.bp_iterations && !syndrome_ok {
            iterations += 1;

            // Check-node update with forward/backward exclusion products.
            // tanh(x/2) and atanh are evaluated through their exp/ln forms,
            // which agree with the libm calls to 1 ulp and run much faster.
            for edges in &self.check_edges {
                let degree = edges.len();
                if degree == 0 {
                    continue;
                }
                debug_assert!(degree <= 64);
                for (i, &e) in edges.iter().enumerate() {
                    let v = v2c[e];
                    let t = 1.0 - 2.0 / (v.abs().exp() + 1.0);
                    tanh_buf[i] = if v < 0.0 { -t } else { t };
                }
                let mut suffix = [1.0f64; 65];
                for i in (0..degree).rev() {
                    suffix[i] = suffix[i + 1] * tanh_buf[i];
                }
                let mut prefix = 1.0f64;
                for (i, &e) in edges.iter().enumerate() {
                    let others = prefix * suffix[i + 1];
                    let clamped = others.clamp(-(1.0 - 1e-15), 1.0 - 1e-15);
                    c2v[e] = ((1.0 + clamped) / (1.0 - clamped)).ln();
                    prefix *= tanh_buf[i];
                }
            }

            // Variable-node update and posterior. The extrinsic sum is
            // accumulated first so `posterior = input + extrinsic` holds
            // bit-exactly.
            for v in 0..n {
                let start = var_edge_start[v];
                let end = var_edge_start[v + 1];
                let mut ext = 0.0f64;
                for e in start..end {
                    ext += c2v[e];
                }
                let total = channel_llrs[v] + ext;
                extrinsic[v] = ext;
                posterior[v] = total;
                hard[v] = (total < 0.0) as u8;
                for e in start..end {
                    v2c[e] = total - c2v[e];
                }
            }

            syndrome_ok = h.syndrome_ok(&hard);
        }

        let crc_ok = super::crc::crc_check(&hard[..self.pad_start()]);

        Ok(DecodeResult {
            posterior_llrs: posterior,
            extrinsic_llrs: extrinsic,
            hard_bits: hard,
            syndrome_ok,
            crc_ok,
            iterations,
        })
    }

    /// Decode with the zero-padding prior applied to the channel LLRs.
    pub fn decode_transport(&self, channel_llrs: &[f64]) -> Result<DecodeResult> {
        let mut llrs = channel_llrs.to_vec();
        if llrs.len() == self.coded_bits {
            for llr in llrs[self.pad_start()..self.info_bits].iter_mut() {
                *llr += PAD_LLR;
            }
        }
        self.decode(&llrs)
    }

    /// Payload slice of a decoded info part.
    pub fn payload_of<'a>(&self, hard_bits: &'a [u8]) -> &'a [u8] {
        &hard_bits[..self.payload_bits]
    }
}

// ---------------------------------------------------------------------------
// Construction internals
// ---------------------------------------------------------------------------

/// Column-by-column (3,6)-regular sample; `None` when the sampler paints
/// itself into a corner (fewer than three rows left with spare weight).
fn sample_regular_columns(n: usize, m: usize, seed: u64) -> Option<Vec<Vec<usize>>> {
    const COL_WEIGHT: usize = 3;
    let row_weight = COL_WEIGHT * n / m;
    let mut rng = SimRng::new(seed);
    let mut row_load = vec![0usize; m];
    let mut used_pairs: HashSet<(usize, usize)> = HashSet::new();
    let mut columns = Vec::with_capacity(n);

    for _ in 0..n {
        let available: Vec<usize> = (0..m).filter(|&r| row_load[r] < row_weight).collect();
        if available.len() < COL_WEIGHT {
            return None;
        }
        let mut chosen: Vec<usize> = Vec::new();
        for attempt in 0..COLUMN_RETRIES {
            chosen = pick_distinct(&available, COL_WEIGHT, &mut rng);
            let clean = chosen.iter().enumerate().all(|(i, &a)| {
                chosen[i + 1..]
                    .iter()
                    .all(|&b| !used_pairs.contains(&pair_key(a, b)))
            });
            if clean || attempt == COLUMN_RETRIES - 1 {
                break;
            }
        }
        for (i, &a) in chosen.iter().enumerate() {
            for &b in &chosen[i + 1..] {
                used_pairs.insert(pair_key(a, b));
            }
            row_load[a] += 1;
        }
        chosen.sort_unstable();
        columns.push(chosen);
    }
    Some(columns)
}

#[inline]
fn pair_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn pick_distinct(pool: &[usize], count: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut pool = pool.to_vec();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let idx = rng.next_index(pool.len());
        out.push(pool.swap_remove(idx));
    }
    out
}

/// Dense GF(2) row of `words * 64` bits.
type BitRow = Vec<u64>;

#[inline]
fn get_bit(row: &BitRow, j: usize) -> bool {
    (row[j / 64] >> (j % 64)) & 1 == 1
}

#[inline]
fn set_bit(row: &mut BitRow, j: usize) {
    row[j / 64] |= 1 << (j % 64);
}

fn xor_rows(dst: &mut BitRow, src: &BitRow) {
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d ^= s;
    }
}

/// Permutes columns so the trailing m-by-m block is invertible, then returns
/// the permuted parity matrix together with the dense systematic encoder
/// (stored column-wise over the info part).
fn systematize(parity: SparseParity) -> Option<(SparseParity, Vec<Vec<u64>>)> {
    let n = parity.n;
    let m = parity.m;
    let k = n - m;
    let words = n.div_ceil(64);

    // Dense copy of H.
    let mut rows: Vec<BitRow> = vec![vec![0u64; words]; m];
    for c in 0..m {
        for &v in parity.check_neighbors(c) {
            set_bit(&mut rows[c], v);
        }
    }

    // Right-to-left elimination to find m independent pivot columns,
    // preferring the rightmost ones so exported matrices re-import without
    // any further permutation.
    let mut pivot_cols: Vec<usize> = Vec::with_capacity(m);
    let mut pivot_of_row: Vec<Option<usize>> = vec![None; m];
    let mut elim = rows.clone();
    for col in (0..n).rev() {
        if pivot_cols.len() == m {
            break;
        }
        let pivot_row = (0..m).find(|&r| pivot_of_row[r].is_none() && get_bit(&elim[r], col));
        let Some(pr) = pivot_row else { continue };
        pivot_of_row[pr] = Some(col);
        pivot_cols.push(col);
        let pivot_copy = elim[pr].clone();
        for r in 0..m {
            if r != pr && get_bit(&elim[r], col) {
                xor_rows(&mut elim[r], &pivot_copy);
            }
        }
    }
    if pivot_cols.len() < m {
        return None;
    }

    // Column order: non-pivots ascending (info part), pivots ascending (parity part).
    let pivot_set: HashSet<usize> = pivot_cols.iter().cloned().collect();
    let mut perm: Vec<usize> = (0..n).filter(|c| !pivot_set.contains(c)).collect();
    let mut parity_part: Vec<usize> = pivot_cols;
    parity_part.sort_unstable();
    perm.extend_from_slice(&parity_part);
    let permuted = parity.permute_columns(&perm);

    // Solve Hp * E = Hi by Gauss-Jordan on [Hp | Hi] (over the permuted H).
    let mut hp: Vec<BitRow> = vec![vec![0u64; m.div_ceil(64)]; m];
    let mut hi: Vec<BitRow> = vec![vec![0u64; k.div_ceil(64)]; m];
    for c in 0..m {
        for &v in permuted.check_neighbors(c) {
            if v < k {
                set_bit(&mut hi[c], v);
            } else {
                set_bit(&mut hp[c], v - k);
            }
        }
    }
    for col in 0..m {
        let pivot = (col..m).find(|&r| get_bit(&hp[r], col))?;
        hp.swap(col, pivot);
        hi.swap(col, pivot);
        let hp_copy = hp[col].clone();
        let hi_copy = hi[col].clone();
        for r in 0..m {
            if r != col && get_bit(&hp[r], col) {
                xor_rows(&mut hp[r], &hp_copy);
                xor_rows(&mut hi[r], &hi_copy);
            }
        }
    }
    // hi now holds E row-wise; repack column-wise for fast encoding.
    let mwords = m.div_ceil(64);
    let mut encoder_cols = vec![vec![0u64; mwords]; k];
    for (r, row) in hi.iter().enumerate() {
        for (j, col) in encoder_cols.iter_mut().enumerate() {
            if get_bit(row, j) {
                col[r / 64] |= 1 << (r % 64);
            }
        }
    }
    Some((permuted, encoder_cols))
}
