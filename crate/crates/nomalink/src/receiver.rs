//! The outer-loop receiver: detector and decoder scheduling under an
//! interference-cancellation strategy.
//!
//! One outer iteration is one strategy pass: SIC variants walk the undecoded
//! UEs in SINR order, decoding one at a time and hard-cancelling every CRC
//! pass from the working grid; PIC variants run one joint detector call and
//! decode everyone in parallel. Soft PIC feeds decoder extrinsic LLRs back
//! as symbol priors for all UEs; hybrid PIC additionally hard-cancels the
//! CRC-passed ones and stops decoding them.
//!
//! CRC status is sticky: once a UE passes, its payload is frozen and the
//! pass marker never reverts. Hard cancellation only ever follows a CRC
//! pass.

use std::fmt;
use std::str::FromStr;

use crate::channel::ReceivedGrid;
use crate::coding::CodeConfig;
use crate::detectors::{detect, DetectorInput, DetectorKind};
use crate::error::{Error, Result};
use crate::linalg::{dot_h, norm_sqr};
use crate::messages::{llr_to_prior, DiscretePrior};
use crate::transmitter::SchemeLayout;

/// Interference-cancellation schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcStrategy {
    HardSic,
    EnhancedSic,
    SoftPic,
    HybridPic,
}

impl fmt::Display for IcStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            IcStrategy::HardSic => "hard_sic",
            IcStrategy::EnhancedSic => "enhanced_sic",
            IcStrategy::SoftPic => "soft_pic",
            IcStrategy::HybridPic => "hybrid_pic",
        };
        write!(f, "{name}")
    }
}

impl FromStr for IcStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard_sic" => Ok(IcStrategy::HardSic),
            "enhanced_sic" => Ok(IcStrategy::EnhancedSic),
            "soft_pic" => Ok(IcStrategy::SoftPic),
            "hybrid_pic" => Ok(IcStrategy::HybridPic),
            other => Err(Error::Config(format!("unknown IC strategy {other:?}"))),
        }
    }
}

/// Outer-loop settings: OL = 0 means a single detect-and-decode pass.
#[derive(Debug, Clone)]
pub struct OuterLoopConfig {
    pub strategy: IcStrategy,
    pub max_outer_iterations: usize,
    pub detector: DetectorKind,
    pub inner_iterations: usize,
}

/// Per-UE receiver state after (or during) the outer loop.
#[derive(Debug, Clone)]
pub struct UserDecodeState {
    pub crc_passed: bool,
    /// Decoded payload bits; meaningful only when `crc_passed`.
    pub decoded_payload: Vec<u8>,
    /// Decoder extrinsic LLRs fed back as detector priors.
    pub feedback_llrs: Vec<f64>,
    /// Last SINR estimate used for ordering.
    pub est_sinr: f64,
    pub hard_cancelled: bool,
    /// Outer iteration at which the CRC first passed.
    pub decode_ol: Option<usize>,
}

impl UserDecodeState {
    fn new() -> Self {
        Self {
            crc_passed: false,
            decoded_payload: Vec::new(),
            feedback_llrs: Vec::new(),
            est_sinr: 0.0,
            hard_cancelled: false,
            decode_ol: None,
        }
    }
}

/// Everything a trial scorer needs from one transmission.
#[derive(Debug, Clone)]
pub struct ReceiverReport {
    pub users: Vec<UserDecodeState>,
    /// After each pass, the fraction of UEs still without a CRC pass.
    pub crc_fail_fraction_per_ol: Vec<f64>,
    /// Cumulative detector op count after each pass.
    pub op_count_per_ol: Vec<u64>,
    /// Passes actually executed (early exit shortens this).
    pub passes_run: usize,
    /// SIC attempt order per pass (empty for PIC strategies).
    pub sic_order_per_ol: Vec<Vec<usize>>,
}

/// Runs the full outer loop on one received transmission.
pub fn run_receiver(
    grid: &ReceivedGrid,
    layout: &SchemeLayout,
    cfg: &OuterLoopConfig,
    code: &CodeConfig,
) -> Result<ReceiverReport> {
    let n_ue = layout.n_layers;
    for layer in 0..n_ue {
        if layout.bits_per_layer(layer) != code.coded_bits {
            return Err(Error::Contract(format!(
                "layer {layer} carries {} bits but the code has {}",
                layout.bits_per_layer(layer),
                code.coded_bits
            )));
        }
    }

    let mut work = grid.clone();
    let mut states: Vec<UserDecodeState> = (0..n_ue).map(|_| UserDecodeState::new()).collect();
    let mut report = ReceiverReport {
        users: Vec::new(),
        crc_fail_fraction_per_ol: Vec::new(),
        op_count_per_ol: Vec::new(),
        passes_run: 0,
        sic_order_per_ol: Vec::new(),
    };
    let mut op_total = 0u64;

    for ol in 0..=cfg.max_outer_iterations {
        let before: usize = states.iter().filter(|s| s.crc_passed).count();
        let (ops, order) = match cfg.strategy {
            IcStrategy::HardSic | IcStrategy::EnhancedSic => sic_pass(
                &mut work,
                layout,
                cfg,
                code,
                &mut states,
                ol,
                cfg.strategy == IcStrategy::EnhancedSic,
            )?,
            IcStrategy::SoftPic | IcStrategy::HybridPic => pic_pass(
                &mut work,
                layout,
                cfg,
                code,
                &mut states,
                ol,
                cfg.strategy == IcStrategy::HybridPic,
            )?,
        };
        op_total += ops;
        report.passes_run += 1;
        let failed = states.iter().filter(|s| !s.crc_passed).count();
        report
            .crc_fail_fraction_per_ol
            .push(failed as f64 / n_ue as f64);
        report.op_count_per_ol.push(op_total);
        report.sic_order_per_ol.push(order);

        if failed == 0 {
            break;
        }
        let after: usize = states.iter().filter(|s| s.crc_passed).count();
        let sic_like = matches!(cfg.strategy, IcStrategy::HardSic | IcStrategy::EnhancedSic);
        if sic_like && after == before {
            // No feedback evolves in hard SIC: an empty pass is a fixed point.
            break;
        }
    }

    report.users = states;
    Ok(report)
}

// ---------------------------------------------------------------------------
// SINR estimation
// ---------------------------------------------------------------------------

/// Per-UE SINR estimate under ideal CSI: mean over the UE's occupied REs of
/// signal power over residual cross-correlated interference plus noise.
/// Cancelled layers are excluded from the interference sum.
pub fn estimate_sinr(
    grid: &ReceivedGrid,
    layout: &SchemeLayout,
    active: &[bool],
    ues: &[usize],
) -> Vec<f64> {
    let n_rx = grid.n_rx();
    let mut g = vec![num_complex::Complex64::new(0.0, 0.0); n_rx];
    let mut g_other = vec![num_complex::Complex64::new(0.0, 0.0); n_rx];
    ues.iter()
        .map(|&ue| {
            let mut acc = 0.0;
            let mut n_res = 0usize;
            for lb in &layout.layer_blocks[ue] {
                for &re in &lb.res {
                    grid.eff_channel_into(ue, re, &mut g);
                    let signal = norm_sqr(&g);
                    if signal == 0.0 {
                        n_res += 1;
                        continue;
                    }
                    let mut interference = 0.0;
                    for u in layout.users_of_re(re) {
                        if u.layer == ue || !active[u.layer] {
                            continue;
                        }
                        grid.eff_channel_into(u.layer, re, &mut g_other);
                        interference += dot_h(&g, &g_other).norm_sqr() / signal;
                    }
                    acc += signal / (interference + grid.noise_var);
                    n_res += 1;
                }
            }
            if n_res == 0 {
                0.0
            } else {
                acc / n_res as f64
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Strategy passes
// ---------------------------------------------------------------------------

/// Builds per-layer priors from the decoder feedback (uniform before any).
fn build_priors(layout: &SchemeLayout, states: &[UserDecodeState]) -> Vec<Vec<DiscretePrior>> {
    (0..layout.n_layers)
        .map(|layer| {
            let alphabet = &layout.alphabets[layer];
            let bits = alphabet.bits;
            let n_blocks = layout.layer_blocks[layer].len();
            let feedback = &states[layer].feedback_llrs;
            (0..n_blocks)
                .map(|b| {
                    if feedback.is_empty() {
                        DiscretePrior::uniform(alphabet.clone())
                    } else {
                        llr_to_prior(alphabet.clone(), &feedback[b * bits..(b + 1) * bits])
                    }
                })
                .collect()
        })
        .collect()
}

/// Re-encodes a decoded payload and removes its contribution from the grid.
fn cancel_ue(
    work: &mut ReceivedGrid,
    layout: &SchemeLayout,
    code: &CodeConfig,
    ue: usize,
    payload: &[u8],
) -> Result<()> {
    let codeword = code.encode_transport(payload)?;
    let row = layout.map_bits(ue, &codeword)?;
    work.cancel_layer(ue, &row);
    Ok(())
}

fn sic_pass(
    work: &mut ReceivedGrid,
    layout: &SchemeLayout,
    cfg: &OuterLoopConfig,
    code: &CodeConfig,
    states: &mut [UserDecodeState],
    ol: usize,
    enhanced: bool,
) -> Result<(u64, Vec<usize>)> {
    let n_ue = layout.n_layers;
    let mut pending: Vec<usize> = (0..n_ue).filter(|&u| !states[u].crc_passed).collect();
    order_by_sinr(work, layout, &mut pending, states);

    let mut ops = 0u64;
    let mut attempt_order = Vec::with_capacity(pending.len());
    // The detector input only changes when a cancellation shrinks the grid,
    // so the output is reused across consecutive attempts (bit-identical to
    // re-detecting, since SIC always detects under uniform priors).
    let mut cached: Option<crate::detectors::DetectorOutput> = None;
    while !pending.is_empty() {
        let ue = pending.remove(0);
        attempt_order.push(ue);

        if cached.is_none() {
            let cancelled: Vec<bool> = states.iter().map(|s| s.hard_cancelled).collect();
            let priors = uniform_priors(layout);
            let input = DetectorInput {
                grid: work,
                layout,
                priors: &priors,
                cancelled: &cancelled,
                inner_iterations: cfg.inner_iterations,
            };
            let det = detect(cfg.detector, &input)?;
            ops += det.op_count;
            cached = Some(det);
        }
        let det = cached.as_ref().expect("detector output cached");

        let result = code.decode_transport(&det.extrinsic_llrs[ue])?;
        if result.crc_ok {
            let payload = code.payload_of(&result.hard_bits).to_vec();
            states[ue].crc_passed = true;
            states[ue].decode_ol = Some(ol);
            states[ue].decoded_payload = payload.clone();
            cancel_ue(work, layout, code, ue, &payload)?;
            states[ue].hard_cancelled = true;
            debug_assert!(states[ue].crc_passed);
            cached = None;
            if enhanced && !pending.is_empty() {
                // Ranking is revised after every successful cancellation;
                // already-attempted UEs are not retried within the pass.
                order_by_sinr(work, layout, &mut pending, states);
            }
        }
    }
    Ok((ops, attempt_order))
}

fn pic_pass(
    work: &mut ReceivedGrid,
    layout: &SchemeLayout,
    cfg: &OuterLoopConfig,
    code: &CodeConfig,
    states: &mut [UserDecodeState],
    ol: usize,
    hybrid: bool,
) -> Result<(u64, Vec<usize>)> {
    let n_ue = layout.n_layers;
    let cancelled: Vec<bool> = states.iter().map(|s| s.hard_cancelled).collect();
    let priors = build_priors(layout, states);
    let input = DetectorInput {
        grid: work,
        layout,
        priors: &priors,
        cancelled: &cancelled,
        inner_iterations: cfg.inner_iterations,
    };
    let det = detect(cfg.detector, &input)?;

    for ue in 0..n_ue {
        if states[ue].hard_cancelled {
            continue;
        }
        let result = code.decode_transport(&det.extrinsic_llrs[ue])?;
        states[ue].feedback_llrs = result.extrinsic_llrs;
        if result.crc_ok && !states[ue].crc_passed {
            states[ue].crc_passed = true;
            states[ue].decode_ol = Some(ol);
            states[ue].decoded_payload = code.payload_of(&result.hard_bits).to_vec();
        }
        if hybrid && states[ue].crc_passed {
            let payload = states[ue].decoded_payload.clone();
            cancel_ue(work, layout, code, ue, &payload)?;
            states[ue].hard_cancelled = true;
            debug_assert!(states[ue].crc_passed);
        }
    }
    Ok((det.op_count, Vec::new()))
}

/// Refreshes SINR estimates for `pending` and sorts it descending
/// (ties broken by ascending UE index via stable sort over sorted input).
fn order_by_sinr(
    work: &ReceivedGrid,
    layout: &SchemeLayout,
    pending: &mut Vec<usize>,
    states: &mut [UserDecodeState],
) {
    let active: Vec<bool> = states.iter().map(|s| !s.hard_cancelled).collect();
    pending.sort_unstable();
    let sinrs = estimate_sinr(work, layout, &active, pending);
    for (&ue, &sinr) in pending.iter().zip(sinrs.iter()) {
        states[ue].est_sinr = sinr;
    }
    pending.sort_by(|&a, &b| {
        states[b]
            .est_sinr
            .partial_cmp(&states[a].est_sinr)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

fn uniform_priors(layout: &SchemeLayout) -> Vec<Vec<DiscretePrior>> {
    (0..layout.n_layers)
        .map(|layer| {
            let alphabet = &layout.alphabets[layer];
            (0..layout.layer_blocks[layer].len())
                .map(|_| DiscretePrior::uniform(alphabet.clone()))
                .collect()
        })
        .collect()
}
