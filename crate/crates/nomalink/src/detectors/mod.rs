//! Multi-user detectors: MPA, EPA, ESE, and soft-PIC MMSE.
//!
//! All detectors share one contract: they consume a received grid, the
//! scheme layout, per-layer symbol-block priors (uniform when the decoder
//! has not spoken yet), and a cancellation mask; they emit per-layer
//! extrinsic bit LLRs plus an operation counter. Extrinsic means the prior
//! bit LLRs are subtracted from the posterior bit LLRs, so the detector and
//! decoder never echo each other's information back.
//!
//! Operation counters are defined per detector (documented on each), so
//! complexity comparisons are meaningful across runs:
//!
//! - MPA: product of the colliding layers' projected alphabet sizes, per
//!   function node per inner iteration.
//! - EPA: `n_rx^3 + d * n_rx^2` per RE per inner iteration (covariance
//!   build and inverse) plus `2 * M * occupancy` per block per inner
//!   iteration (discrete posterior and moment matching).
//! - ESE: `n_rx * (d + 1)` per (layer, RE) pair plus `M * occupancy` per
//!   block.
//! - MMSE: the inversion cost alone, `dim^3` per inverted covariance
//!   (`n_rx` per RE in chip mode, `n_rx * L` per block in block mode).

mod epa;
mod ese;
mod mmse;
mod mpa;
mod oracle;

pub use epa::epa_detect;
pub use ese::ese_detect;
pub use mmse::{mmse_detect, MmseMode};
pub use mpa::{mpa_detect, MAX_COLLISION_DEGREE};
pub use oracle::brute_force_oracle;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::channel::ReceivedGrid;
use crate::error::{Error, Result};
use crate::messages::{bit_llrs_from_log_masses, bit_llrs_from_probs, DiscretePrior, LLR_CAP};
use crate::transmitter::SchemeLayout;

/// Detector selector, as spelled in config files and CSV records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Mpa,
    Epa,
    Ese,
    MmseChip,
    MmseBlock,
}

impl DetectorKind {
    /// Default inner-iteration count for the iterative detectors.
    pub fn default_inner_iterations(&self) -> usize {
        match self {
            DetectorKind::Mpa => 5,
            DetectorKind::Epa => 3,
            // ESE and MMSE refine only through the outer loop.
            _ => 1,
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            DetectorKind::Mpa => "mpa",
            DetectorKind::Epa => "epa",
            DetectorKind::Ese => "ese",
            DetectorKind::MmseChip => "mmse_chip",
            DetectorKind::MmseBlock => "mmse_block",
        };
        write!(f, "{name}")
    }
}

impl FromStr for DetectorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mpa" => Ok(DetectorKind::Mpa),
            "epa" => Ok(DetectorKind::Epa),
            "ese" => Ok(DetectorKind::Ese),
            "mmse" | "mmse_chip" => Ok(DetectorKind::MmseChip),
            "mmse_block" => Ok(DetectorKind::MmseBlock),
            other => Err(Error::Config(format!("unknown detector {other:?}"))),
        }
    }
}

/// Everything one detector call needs.
pub struct DetectorInput<'a> {
    pub grid: &'a ReceivedGrid,
    pub layout: &'a SchemeLayout,
    /// Per layer, per block, the current symbol prior.
    pub priors: &'a [Vec<DiscretePrior>],
    /// Hard-cancelled layers: excluded from messages and outputs.
    pub cancelled: &'a [bool],
    pub inner_iterations: usize,
}

impl<'a> DetectorInput<'a> {
    /// Indices of the layers still in play.
    pub fn active_layers(&self) -> Vec<usize> {
        (0..self.layout.n_layers)
            .filter(|&l| !self.cancelled[l])
            .collect()
    }
}

/// Detector soft output.
#[derive(Debug, Clone)]
pub struct DetectorOutput {
    /// Per layer, extrinsic LLRs over its coded bits (empty for cancelled layers).
    pub extrinsic_llrs: Vec<Vec<f64>>,
    /// Per layer, posterior bit LLRs (prior included), same shape.
    pub posterior_llrs: Vec<Vec<f64>>,
    /// Multiply-accumulate tally under this detector's counter definition.
    pub op_count: u64,
}

impl DetectorOutput {
    fn empty(n_layers: usize) -> Self {
        Self {
            extrinsic_llrs: vec![Vec::new(); n_layers],
            posterior_llrs: vec![Vec::new(); n_layers],
            op_count: 0,
        }
    }
}

/// Dispatches to the selected detector.
pub fn detect(kind: DetectorKind, input: &DetectorInput) -> Result<DetectorOutput> {
    match kind {
        DetectorKind::Mpa => mpa_detect(input),
        DetectorKind::Epa => epa_detect(input),
        DetectorKind::Ese => ese_detect(input),
        DetectorKind::MmseChip => mmse_detect(input, MmseMode::Chip),
        DetectorKind::MmseBlock => mmse_detect(input, MmseMode::Block),
    }
}

// ---------------------------------------------------------------------------
// Shared internals
// ---------------------------------------------------------------------------

/// Flat effective channel columns (transmit amplitude folded in).
pub(crate) struct EffChannels {
    n_re: usize,
    n_rx: usize,
    data: Vec<Complex64>,
}

impl EffChannels {
    pub(crate) fn new(grid: &ReceivedGrid, n_layers: usize) -> Self {
        let n_re = grid.n_re();
        let n_rx = grid.n_rx();
        let mut data = vec![Complex64::new(0.0, 0.0); n_layers * n_re * n_rx];
        for layer in 0..n_layers {
            for re in 0..n_re {
                let base = (layer * n_re + re) * n_rx;
                grid.eff_channel_into(layer, re, &mut data[base..base + n_rx]);
            }
        }
        Self { n_re, n_rx, data }
    }

    #[inline]
    pub(crate) fn g(&self, layer: usize, re: usize) -> &[Complex64] {
        let base = (layer * self.n_re + re) * self.n_rx;
        &self.data[base..base + self.n_rx]
    }
}

/// Turns per-block posterior log-masses into (posterior, extrinsic) bit LLRs.
///
/// Posteriors saturate at +-[`LLR_CAP`]; the prior bit LLRs are saturated the
/// same way before subtraction, so the reported extrinsic plus the saturated
/// prior reconstructs the reported posterior bit for bit.
pub(crate) fn block_bit_llrs(log_masses: &[f64], prior: &DiscretePrior) -> (Vec<f64>, Vec<f64>) {
    let bits = prior.alphabet.bits;
    let raw = bit_llrs_from_log_masses(log_masses, bits);
    let prior_llrs = prior_bit_llrs(prior);
    let extrinsic: Vec<f64> = raw
        .iter()
        .zip(prior_llrs.iter())
        .map(|(p, q)| p - q)
        .collect();
    // The reported posterior is prior + extrinsic, so the decomposition is
    // reconstructible bit for bit.
    let posterior: Vec<f64> = extrinsic
        .iter()
        .zip(prior_llrs.iter())
        .map(|(e, q)| e + q)
        .collect();
    (posterior, extrinsic)
}

/// Saturated prior bit LLRs, the exact quantity [`block_bit_llrs`] subtracts.
pub fn prior_bit_llrs(prior: &DiscretePrior) -> Vec<f64> {
    bit_llrs_from_probs(&prior.probs, prior.alphabet.bits)
        .into_iter()
        .map(|l| l.clamp(-LLR_CAP, LLR_CAP))
        .collect()
}

/// Assembles per-layer outputs from per-block log-masses, skipping cancelled
/// layers.
pub(crate) fn assemble_output(
    input: &DetectorInput,
    mut block_masses: impl FnMut(usize, usize) -> Vec<f64>,
    op_count: u64,
) -> DetectorOutput {
    let layout = input.layout;
    let mut out = DetectorOutput::empty(layout.n_layers);
    out.op_count = op_count;
    for layer in 0..layout.n_layers {
        if input.cancelled[layer] {
            continue;
        }
        let n_blocks = layout.layer_blocks[layer].len();
        let bits = layout.alphabets[layer].bits;
        let mut ext = Vec::with_capacity(n_blocks * bits);
        let mut post = Vec::with_capacity(n_blocks * bits);
        for block in 0..n_blocks {
            let masses = block_masses(layer, block);
            let (p, e) = block_bit_llrs(&masses, &input.priors[layer][block]);
            post.extend_from_slice(&p);
            ext.extend_from_slice(&e);
        }
        out.extrinsic_llrs[layer] = ext;
        out.posterior_llrs[layer] = post;
    }
    out
}

/// Noise variance floor used inside likelihoods so zero-noise test grids
/// stay finite (LLRs then saturate at the cap).
#[inline]
pub(crate) fn noise_floor(noise_var: f64) -> f64 {
    noise_var.max(1e-30)
}
