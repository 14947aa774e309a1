//! NoMA transmitter side: scheme layouts and bit-to-grid mapping.
//!
//! A [`SchemeLayout`] is the single contract shared by the transmitter and
//! every detector: per layer it lists the resource blocks (absolute RE
//! indices) and the block alphabet, and per RE it knows which layers collide
//! there. Three built-in schemes cover the overload spectrum:
//!
//! - `cb_ofdma` — contention-based OFDMA; every layer occupies every RE with
//!   a Gray-labeled QAM constellation (full collision).
//! - `nls` — non-sparse linear spreading; QPSK symbols spread over `L` REs
//!   by a per-layer unit-modulus chip signature.
//! - `scma` — sparse code multiple access; each layer occupies 2 of 4 REs
//!   per block following the standard 4x6 indicator (collision degree 3),
//!   with a phase-rotated QPSK codebook.
//!
//! Custom codebooks and signature sets are loadable from a plain text format
//! (see [`dump_codebook`] / [`load_codebook`]).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::messages::BlockAlphabet;
use crate::rng::SimRng;

/// Seed for the deterministic NLS signature construction.
pub const SIGNATURE_SEED: u64 = 20180416;

/// Built-in multiple-access schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    CbOfdma,
    Nls,
    Scma,
    /// Layout assembled directly (tests, codebook files).
    Custom,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SchemeKind::CbOfdma => "cb_ofdma",
            SchemeKind::Nls => "nls",
            SchemeKind::Scma => "scma",
            SchemeKind::Custom => "custom",
        };
        write!(f, "{name}")
    }
}

impl FromStr for SchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cb_ofdma" => Ok(SchemeKind::CbOfdma),
            "nls" => Ok(SchemeKind::Nls),
            "scma" => Ok(SchemeKind::Scma),
            "custom" => Ok(SchemeKind::Custom),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Tunables for [`build_scheme`].
#[derive(Debug, Clone)]
pub struct SchemeParams {
    /// Symbol-block alphabet size M (per-block bits = log2 M).
    pub mod_order: usize,
    /// Spreading length for `nls`.
    pub spread_len: usize,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            mod_order: 4,
            spread_len: 4,
        }
    }
}

/// One resource block of one layer: the absolute REs it occupies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerBlock {
    pub res: Vec<usize>,
}

/// A (layer, block, slot) occupancy record for one RE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReUse {
    pub layer: usize,
    pub block: usize,
    pub slot: usize,
}

/// Unified transmitter/detector resource map.
#[derive(Debug, Clone)]
pub struct SchemeLayout {
    pub kind: SchemeKind,
    pub n_layers: usize,
    pub n_re: usize,
    pub block_size: usize,
    /// Per layer, its blocks in increasing RE order.
    pub layer_blocks: Vec<Vec<LayerBlock>>,
    /// Per layer, the shared block alphabet.
    pub alphabets: Vec<Arc<BlockAlphabet>>,
    re_index: Vec<Vec<ReUse>>,
}

impl SchemeLayout {
    /// Assembles a layout from explicit blocks; validates occupancy,
    /// alphabet widths, and unit per-RE energy.
    pub fn custom(
        kind: SchemeKind,
        n_re: usize,
        block_size: usize,
        layer_blocks: Vec<Vec<LayerBlock>>,
        alphabets: Vec<Arc<BlockAlphabet>>,
    ) -> Result<Self> {
        let n_layers = layer_blocks.len();
        if alphabets.len() != n_layers {
            return Err(Error::Config("one alphabet required per layer".into()));
        }
        let mut re_index: Vec<Vec<ReUse>> = vec![Vec::new(); n_re];
        for (layer, blocks) in layer_blocks.iter().enumerate() {
            let width = alphabets[layer].width();
            let mut seen = vec![false; n_re];
            for (block, lb) in blocks.iter().enumerate() {
                if lb.res.len() != width {
                    return Err(Error::Config(format!(
                        "layer {layer} block {block} occupies {} REs but its alphabet has width {width}",
                        lb.res.len()
                    )));
                }
                for (slot, &re) in lb.res.iter().enumerate() {
                    if re >= n_re {
                        return Err(Error::Config(format!(
                            "layer {layer} block {block} references RE {re} >= {n_re}"
                        )));
                    }
                    if seen[re] {
                        return Err(Error::Config(format!(
                            "layer {layer} occupies RE {re} twice"
                        )));
                    }
                    seen[re] = true;
                    re_index[re].push(ReUse { layer, block, slot });
                }
            }
            let energy = alphabets[layer].energy_per_re();
            if (energy - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "layer {layer} alphabet energy per occupied RE is {energy}, expected 1"
                )));
            }
        }
        Ok(Self {
            kind,
            n_layers,
            n_re,
            block_size,
            layer_blocks,
            alphabets,
            re_index,
        })
    }

    /// Layers colliding on an RE, with their block/slot coordinates.
    #[inline]
    pub fn users_of_re(&self, re: usize) -> &[ReUse] {
        &self.re_index[re]
    }

    /// Collision degree of an RE.
    #[inline]
    pub fn collision_degree(&self, re: usize) -> usize {
        self.re_index[re].len()
    }

    /// Coded bits one layer carries across the whole grid.
    pub fn bits_per_layer(&self, layer: usize) -> usize {
        self.layer_blocks[layer].len() * self.alphabets[layer].bits
    }

    /// Largest per-RE projected alphabet size over all layers and slots.
    pub fn max_projected_size(&self) -> usize {
        self.alphabets
            .iter()
            .map(|a| a.max_projected_size())
            .max()
            .unwrap_or(0)
    }

    /// Maps a layer's coded bits onto its grid row (zeros off-footprint).
    ///
    /// Consecutive `log2(M)`-bit groups (MSB first) select alphabet entries,
    /// blocks in increasing RE order.
    pub fn map_bits(&self, layer: usize, coded_bits: &[u8]) -> Result<Vec<Complex64>> {
        let alphabet = &self.alphabets[layer];
        let bits = alphabet.bits;
        let expected = self.bits_per_layer(layer);
        if coded_bits.len() != expected {
            return Err(Error::Contract(format!(
                "layer {layer} expects {expected} coded bits, got {}",
                coded_bits.len()
            )));
        }
        let mut row = vec![Complex64::new(0.0, 0.0); self.n_re];
        for (block, lb) in self.layer_blocks[layer].iter().enumerate() {
            let mut label = 0usize;
            for b in 0..bits {
                label = (label << 1) | coded_bits[block * bits + b] as usize;
            }
            for (slot, &re) in lb.res.iter().enumerate() {
                row[re] = alphabet.symbols[label][slot];
            }
        }
        Ok(row)
    }

    /// Inverts a noiseless grid row back to coded bits by nearest-symbol
    /// search. Test oracle for [`SchemeLayout::map_bits`].
    pub fn demap_hard(&self, layer: usize, row: &[Complex64]) -> Vec<u8> {
        let alphabet = &self.alphabets[layer];
        let bits = alphabet.bits;
        let mut out = Vec::with_capacity(self.bits_per_layer(layer));
        for lb in &self.layer_blocks[layer] {
            let mut best = (f64::INFINITY, 0usize);
            for (m, sym) in alphabet.symbols.iter().enumerate() {
                let dist: f64 = lb
                    .res
                    .iter()
                    .enumerate()
                    .map(|(slot, &re)| (row[re] - sym[slot]).norm_sqr())
                    .sum();
                if dist < best.0 {
                    best = (dist, m);
                }
            }
            for b in (0..bits).rev() {
                out.push(((best.1 >> b) & 1) as u8);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Built-in constructions
// ---------------------------------------------------------------------------

/// The standard 4x6 SCMA indicator: per layer, the occupied block offsets.
/// Every RE collides with exactly 3 layers; every layer occupies 2 REs.
const SCMA_OFFSETS: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Builds one of the built-in layouts.
pub fn build_scheme(
    kind: SchemeKind,
    n_layers: usize,
    n_re: usize,
    params: &SchemeParams,
) -> Result<SchemeLayout> {
    if n_layers == 0 {
        return Err(Error::Config("at least one layer required".into()));
    }
    match kind {
        SchemeKind::CbOfdma => {
            let alphabet = Arc::new(gray_qam(params.mod_order)?);
            let blocks: Vec<LayerBlock> =
                (0..n_re).map(|re| LayerBlock { res: vec![re] }).collect();
            SchemeLayout::custom(
                kind,
                n_re,
                1,
                vec![blocks; n_layers],
                vec![alphabet; n_layers],
            )
        }
        SchemeKind::Nls => {
            let spread = params.spread_len;
            if spread < 2 {
                return Err(Error::Config("nls requires spread_len >= 2".into()));
            }
            if n_re % spread != 0 {
                return Err(Error::Config(format!(
                    "n_re {n_re} is not divisible by spread length {spread}"
                )));
            }
            if params.mod_order != 4 {
                return Err(Error::Config(
                    "built-in nls uses QPSK; load a codebook file for other orders".into(),
                ));
            }
            let signatures = nls_signatures(n_layers, spread);
            let qpsk = gray_qam(4)?;
            let mut alphabets = Vec::with_capacity(n_layers);
            for sig in &signatures {
                let symbols: Vec<Vec<Complex64>> = qpsk
                    .symbols
                    .iter()
                    .map(|q| sig.iter().map(|c| q[0] * c).collect())
                    .collect();
                alphabets.push(Arc::new(BlockAlphabet::new(symbols)));
            }
            let blocks: Vec<LayerBlock> = (0..n_re / spread)
                .map(|b| LayerBlock {
                    res: (b * spread..(b + 1) * spread).collect(),
                })
                .collect();
            SchemeLayout::custom(kind, n_re, spread, vec![blocks; n_layers], alphabets)
        }
        SchemeKind::Scma => {
            if n_layers > SCMA_OFFSETS.len() {
                return Err(Error::Config(format!(
                    "built-in scma supports at most {} layers, got {n_layers}",
                    SCMA_OFFSETS.len()
                )));
            }
            if n_re % 4 != 0 {
                return Err(Error::Config(format!("n_re {n_re} is not divisible by 4")));
            }
            if params.mod_order != 4 {
                return Err(Error::Config(
                    "built-in scma codebook is M=4; load a codebook file for other orders".into(),
                ));
            }
            let qpsk = gray_qam(4)?;
            let mut layer_blocks = Vec::with_capacity(n_layers);
            let mut alphabets = Vec::with_capacity(n_layers);
            for layer in 0..n_layers {
                let rotation =
                    Complex64::from_polar(1.0, layer as f64 * std::f64::consts::PI / 12.0);
                let symbols: Vec<Vec<Complex64>> = qpsk
                    .symbols
                    .iter()
                    .map(|q| vec![q[0] * rotation, q[0] * rotation])
                    .collect();
                alphabets.push(Arc::new(BlockAlphabet::new(symbols)));
                let offsets = &SCMA_OFFSETS[layer];
                let blocks: Vec<LayerBlock> = (0..n_re / 4)
                    .map(|b| LayerBlock {
                        res: offsets.iter().map(|&o| b * 4 + o).collect(),
                    })
                    .collect();
                layer_blocks.push(blocks);
            }
            SchemeLayout::custom(kind, n_re, 4, layer_blocks, alphabets)
        }
        SchemeKind::Custom => Err(Error::Config(
            "custom layouts are built via SchemeLayout::custom or load_codebook".into(),
        )),
    }
}

/// Gray-labeled square QAM (or BPSK) with unit average energy, in bit-label
/// order: label 0 maps to the most positive corner.
pub fn gray_qam(order: usize) -> Result<BlockAlphabet> {
    if order == 2 {
        return Ok(BlockAlphabet::new(vec![
            vec![Complex64::new(1.0, 0.0)],
            vec![Complex64::new(-1.0, 0.0)],
        ]));
    }
    let bits = order.trailing_zeros() as usize;
    if !order.is_power_of_two() || bits % 2 != 0 || order < 4 {
        return Err(Error::Config(format!(
            "unsupported QAM order {order}; expected 2 or an even power of two"
        )));
    }
    let axis_bits = bits / 2;
    let levels = 1usize << axis_bits;
    // Mean per-axis energy of {+-1, +-3, ...} is (levels^2 - 1) / 3.
    let norm = ((2 * (levels * levels - 1)) as f64 / 3.0).sqrt();
    let axis_value = |label: usize| -> f64 {
        let binary = gray_to_binary(label);
        (levels as isize - 1 - 2 * binary as isize) as f64 / norm
    };
    let symbols: Vec<Vec<Complex64>> = (0..order)
        .map(|m| {
            let i_label = m >> axis_bits;
            let q_label = m & (levels - 1);
            vec![Complex64::new(axis_value(i_label), axis_value(q_label))]
        })
        .collect();
    Ok(BlockAlphabet::new(symbols))
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = 0usize;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

/// Deterministic per-layer chip signatures: unit-modulus QPSK-valued chips,
/// drawn from a fixed-seed stream, duplicate signatures skipped.
pub fn nls_signatures(n_layers: usize, spread: usize) -> Vec<Vec<Complex64>> {
    let qpsk_points: Vec<Complex64> = gray_qam(4)
        .expect("qpsk")
        .symbols
        .iter()
        .map(|s| s[0])
        .collect();
    let mut rng = SimRng::from_path(SIGNATURE_SEED, &[spread as u64]);
    let mut signatures: Vec<Vec<Complex64>> = Vec::with_capacity(n_layers);
    while signatures.len() < n_layers {
        let candidate: Vec<Complex64> = (0..spread)
            .map(|_| qpsk_points[rng.next_index(4)])
            .collect();
        let duplicate = signatures.iter().any(|s| {
            s.iter()
                .zip(candidate.iter())
                .all(|(a, b)| (a - b).norm() < 1e-12)
        });
        if !duplicate {
            signatures.push(candidate);
        }
    }
    signatures
}

// ---------------------------------------------------------------------------
// Codebook file format
// ---------------------------------------------------------------------------

/// Serializes a layout's alphabets to the codebook text format:
/// a header `M L n_layers`, then one `re im` line per value, layer-major,
/// symbol-major, block slots in order, with `0 0` on unoccupied slots.
pub fn dump_codebook(layout: &SchemeLayout) -> String {
    let m = layout.alphabets[0].size();
    let l = layout.block_size;
    let mut out = format!("{m} {l} {}\n", layout.n_layers);
    for layer in 0..layout.n_layers {
        let alphabet = &layout.alphabets[layer];
        // Slot offsets of this layer within a block, from its first block.
        let first = &layout.layer_blocks[layer][0];
        let base = first.res[0] - first.res[0] % l;
        let offsets: Vec<usize> = first.res.iter().map(|&r| r - base).collect();
        for sym in &alphabet.symbols {
            for slot in 0..l {
                if let Some(pos) = offsets.iter().position(|&o| o == slot) {
                    let v = sym[pos];
                    out.push_str(&format!("{:.17e} {:.17e}\n", v.re, v.im));
                } else {
                    out.push_str("0 0\n");
                }
            }
        }
    }
    out
}

/// Parses a codebook file and tiles it across `n_re` resource elements.
pub fn load_codebook(text: &str, n_re: usize) -> Result<SchemeLayout> {
    let mut lines = text.lines().filter(|l| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty codebook file".into()))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad header token {t:?}")))
        })
        .collect::<Result<_>>()?;
    if head.len() != 3 {
        return Err(Error::Parse(
            "codebook header must be `M L n_layers`".into(),
        ));
    }
    let (m, l, n_layers) = (head[0], head[1], head[2]);
    if !m.is_power_of_two() || m < 2 {
        return Err(Error::Parse(format!("M = {m} must be a power of two >= 2")));
    }
    if n_re % l != 0 {
        return Err(Error::Config(format!(
            "n_re {n_re} not divisible by block size {l}"
        )));
    }

    let mut values = Vec::with_capacity(n_layers * m * l);
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!("expected `re im`, got {line:?}")));
        }
        let re: f64 = parts[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad real value {:?}", parts[0])))?;
        let im: f64 = parts[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad imag value {:?}", parts[1])))?;
        values.push(Complex64::new(re, im));
    }
    if values.len() != n_layers * m * l {
        return Err(Error::Parse(format!(
            "expected {} values, got {}",
            n_layers * m * l,
            values.len()
        )));
    }

    let mut layer_blocks = Vec::with_capacity(n_layers);
    let mut alphabets = Vec::with_capacity(n_layers);
    for layer in 0..n_layers {
        let table = &values[layer * m * l..(layer + 1) * m * l];
        // A slot is occupied when any symbol is nonzero there.
        let offsets: Vec<usize> = (0..l)
            .filter(|&slot| (0..m).any(|sym| table[sym * l + slot].norm() > 0.0))
            .collect();
        if offsets.is_empty() {
            return Err(Error::Parse(format!("layer {layer} occupies no REs")));
        }
        let symbols: Vec<Vec<Complex64>> = (0..m)
            .map(|sym| offsets.iter().map(|&slot| table[sym * l + slot]).collect())
            .collect();
        alphabets.push(Arc::new(BlockAlphabet::new(symbols)));
        let blocks: Vec<LayerBlock> = (0..n_re / l)
            .map(|b| LayerBlock {
                res: offsets.iter().map(|&o| b * l + o).collect(),
            })
            .collect();
        layer_blocks.push(blocks);
    }
    SchemeLayout::custom(SchemeKind::Custom, n_re, l, layer_blocks, alphabets)
}
