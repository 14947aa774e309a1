//! Fast self-checks runnable from the CLI, plus the cycle-free instance
//! generator shared with the integration suite.
//!
//! The checks here are the oracle-grade ones: exact CRC reference value,
//! encoder/decoder round trip, sum-product detection against exhaustive
//! enumeration on trees, closed-form scalar posteriors for EPA and MMSE,
//! and sweep determinism. Each prints one PASS/FAIL line.

use std::sync::Arc;

use num_complex::Complex64;

use crate::channel::{ChannelRealization, ReceivedGrid};
use crate::coding::{crc, CodeConfig};
use crate::detectors::{brute_force_oracle, detect, mpa_detect, DetectorInput, DetectorKind};
use crate::error::Result;
use crate::messages::{llr_to_prior, BlockAlphabet, DiscretePrior};
use crate::rng::SimRng;
use crate::transmitter::{gray_qam, LayerBlock, SchemeKind, SchemeLayout};

/// A randomly drawn detection problem whose factor graph is a tree.
pub struct TreeInstance {
    pub layout: SchemeLayout,
    pub grid: ReceivedGrid,
    pub priors: Vec<Vec<DiscretePrior>>,
}

/// Draws a cycle-free instance: up to 3 layers, M = 4, up to 4 REs, up to
/// 2 antennas, random channels, priors, and SNR.
///
/// Acyclicity is enforced with a union-find over REs: a block spanning two
/// REs merges their components and is only accepted when they were separate.
pub fn random_tree_instance(seed: u64) -> TreeInstance {
    let mut rng = SimRng::from_path(0x7265e5, &[seed]);
    let n_re = 1 + rng.next_index(4);
    let n_layers = 1 + rng.next_index(3);
    let n_rx = 1 + rng.next_index(2);

    // Union-find over REs (cycle detection for width-2 blocks).
    let mut parent: Vec<usize> = (0..n_re).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    let qpsk: Vec<Complex64> = gray_qam(4).unwrap().symbols.iter().map(|s| s[0]).collect();
    let mut layer_blocks = Vec::new();
    let mut alphabets = Vec::new();
    for _ in 0..n_layers {
        let mut blocks = Vec::new();
        let mut used = vec![false; n_re];
        let n_blocks = 1 + rng.next_index(2);
        for _ in 0..n_blocks {
            let width2 = rng.next_f64() < 0.5 && n_re >= 2;
            if width2 {
                // Try a few RE pairs in distinct components.
                let mut placed = false;
                for _ in 0..8 {
                    let a = rng.next_index(n_re);
                    let b = rng.next_index(n_re);
                    if a == b || used[a] || used[b] {
                        continue;
                    }
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra == rb {
                        continue;
                    }
                    parent[ra] = rb;
                    used[a] = true;
                    used[b] = true;
                    let mut res = vec![a, b];
                    res.sort_unstable();
                    blocks.push(LayerBlock { res });
                    placed = true;
                    break;
                }
                if placed {
                    continue;
                }
            }
            // Width-1 block: a leaf edge can never close a cycle.
            for _ in 0..8 {
                let a = rng.next_index(n_re);
                if !used[a] {
                    used[a] = true;
                    blocks.push(LayerBlock { res: vec![a] });
                    break;
                }
            }
        }
        if blocks.is_empty() {
            blocks.push(LayerBlock {
                res: vec![rng.next_index(n_re)],
            });
        }
        blocks.sort_by_key(|b| b.res[0]);
        let width = blocks[0].res.len();
        // Keep all blocks of this layer the same width (shared alphabet).
        blocks.retain(|b| b.res.len() == width);
        let alphabet = if width == 1 {
            Arc::new(gray_qam(4).unwrap())
        } else {
            // QPSK repeated over two REs through random unit-modulus chips.
            let chips: Vec<Complex64> = (0..width)
                .map(|_| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * rng.next_f64()))
                .collect();
            Arc::new(BlockAlphabet::new(
                qpsk.iter()
                    .map(|&q| chips.iter().map(|&c| q * c).collect())
                    .collect(),
            ))
        };
        layer_blocks.push(blocks);
        alphabets.push(alphabet);
    }

    let layout =
        SchemeLayout::custom(SchemeKind::Custom, n_re, 1, layer_blocks, alphabets).unwrap();

    // Random transmitted labels, random channel, random SNR in [3, 20] dB.
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n_layers * n_re * n_rx];
    for c in coeffs.iter_mut() {
        *c = rng.next_complex_gaussian(1.0);
    }
    let channel = ChannelRealization::from_coeffs(n_layers, n_re, n_rx, coeffs).unwrap();
    let snr_db = 3.0 + 17.0 * rng.next_f64();
    let noise_var = 10f64.powf(-snr_db / 10.0);
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n_rx]; n_re];
    for layer in 0..n_layers {
        for lb in &layout.layer_blocks[layer] {
            let m = rng.next_index(layout.alphabets[layer].size());
            let sym = &layout.alphabets[layer].symbols[m];
            for (slot, &re) in lb.res.iter().enumerate() {
                let h = channel.h(layer, re);
                for (rx, &hr) in h.iter().enumerate() {
                    y[re][rx] += hr * sym[slot];
                }
            }
        }
    }
    for samples in y.iter_mut() {
        for v in samples.iter_mut() {
            *v += rng.next_complex_gaussian(noise_var);
        }
    }
    let grid = ReceivedGrid {
        y,
        noise_var,
        channel,
        amplitudes: vec![1.0; n_layers],
    };

    // Mixed priors: uniform half the time, random decoder-style otherwise.
    let priors: Vec<Vec<DiscretePrior>> = (0..n_layers)
        .map(|layer| {
            let alphabet = &layout.alphabets[layer];
            layout.layer_blocks[layer]
                .iter()
                .map(|_| {
                    if rng.next_f64() < 0.5 {
                        DiscretePrior::uniform(alphabet.clone())
                    } else {
                        let llrs: Vec<f64> = (0..alphabet.bits)
                            .map(|_| 4.0 * rng.next_gaussian())
                            .collect();
                        llr_to_prior(alphabet.clone(), &llrs)
                    }
                })
                .collect()
        })
        .collect();

    TreeInstance {
        layout,
        grid,
        priors,
    }
}

/// Largest LLR difference between MPA and the exhaustive oracle on one tree.
pub fn tree_mpa_gap(instance: &TreeInstance, inner_iterations: usize) -> Result<f64> {
    let cancelled = vec![false; instance.layout.n_layers];
    let input = DetectorInput {
        grid: &instance.grid,
        layout: &instance.layout,
        priors: &instance.priors,
        cancelled: &cancelled,
        inner_iterations,
    };
    let mpa = mpa_detect(&input)?;
    let oracle = brute_force_oracle(&input)?;
    let mut gap = 0.0f64;
    for layer in 0..instance.layout.n_layers {
        for (a, b) in mpa.extrinsic_llrs[layer]
            .iter()
            .zip(oracle.extrinsic_llrs[layer].iter())
        {
            gap = gap.max((a - b).abs());
        }
    }
    Ok(gap)
}

/// Runs the quick oracle/property suite, printing one line per check.
/// Returns true when everything passed.
pub fn run_selftest() -> bool {
    let mut all_ok = true;
    let mut check = |name: &str, ok: bool| {
        println!("{} {}", if ok { "PASS" } else { "FAIL" }, name);
        all_ok &= ok;
    };

    // CRC reference value and flip detection.
    let crc_ref = crc::crc16(&crc::bytes_to_bits(b"123456789")) == 0x29B1;
    check("crc16 reference value 0x29B1", crc_ref);
    {
        let mut rng = SimRng::new(1);
        let payload: Vec<u8> = (0..64).map(|_| rng.next_bit()).collect();
        let word = crc::crc_attach(&payload);
        let ok = (0..word.len()).all(|i| {
            let mut flipped = word.clone();
            flipped[i] ^= 1;
            !crc::crc_check(&flipped)
        });
        check("crc16 detects all single-bit flips (64-bit payload)", ok);
    }

    // LDPC round trip.
    {
        let code = CodeConfig::regular(512, 224, 25).expect("code");
        let mut rng = SimRng::new(2);
        let ok = (0..20).all(|_| {
            let payload: Vec<u8> = (0..code.payload_bits).map(|_| rng.next_bit()).collect();
            let cw = code.encode_transport(&payload).unwrap();
            let llrs: Vec<f64> = cw
                .iter()
                .map(|&b| if b == 0 { 9.0 } else { -9.0 })
                .collect();
            let out = code.decode_transport(&llrs).unwrap();
            out.crc_ok && code.payload_of(&out.hard_bits) == &payload[..]
        });
        check("ldpc transport round trip", ok);
    }

    // MPA equals the exhaustive oracle on trees.
    {
        let ok = (0..10).all(|seed| {
            let instance = random_tree_instance(seed);
            tree_mpa_gap(&instance, 10)
                .map(|g| g < 1e-6)
                .unwrap_or(false)
        });
        check("mpa matches exhaustive enumeration on trees", ok);
    }

    // EPA single-RE posterior equals the exact discrete posterior mean.
    {
        check("epa scalar posterior is exact", epa_scalar_check());
    }

    // MMSE single-layer chip filter equals exact demodulation.
    {
        check("mmse single-layer filter is exact", mmse_scalar_check());
    }

    // Determinism of a miniature sweep.
    {
        let cfg = super::ExperimentConfig {
            n_ue: 2,
            code_n: 128,
            tbs_bits: 32,
            snr_db: vec![4.0],
            n_blocks: 6,
            outer_iterations: 1,
            detector: DetectorKind::MmseChip,
            coherence_re: 8,
            ..super::ExperimentConfig::default()
        };
        let ok = match (super::run_sweep(&cfg, 1), super::run_sweep(&cfg, 2)) {
            (Ok(a), Ok(b)) => super::to_csv_string(&a, &[]) == super::to_csv_string(&b, &[]),
            _ => false,
        };
        check("sweep determinism across thread counts", ok);
    }

    all_ok
}

/// Single layer, one RE, uniform prior: after one iteration EPA's discrete
/// posterior must equal the exact Bayes posterior over the four points.
fn epa_scalar_check() -> bool {
    let mut rng = SimRng::new(77);
    for _ in 0..50 {
        let layout = crate::transmitter::build_scheme(
            SchemeKind::CbOfdma,
            1,
            1,
            &crate::transmitter::SchemeParams::default(),
        )
        .unwrap();
        let h = Complex64::new(rng.next_gaussian(), rng.next_gaussian());
        let channel = ChannelRealization::from_coeffs(1, 1, 1, vec![h]).unwrap();
        let noise_var = 0.2 + rng.next_f64();
        let m = rng.next_index(4);
        let x = layout.alphabets[0].symbols[m][0];
        let y = h * x + rng.next_complex_gaussian(noise_var);
        let grid = ReceivedGrid {
            y: vec![vec![y]],
            noise_var,
            channel,
            amplitudes: vec![1.0],
        };
        let priors = vec![vec![DiscretePrior::uniform(layout.alphabets[0].clone())]];
        let input = DetectorInput {
            grid: &grid,
            layout: &layout,
            priors: &priors,
            cancelled: &[false],
            inner_iterations: 1,
        };
        let out = detect(DetectorKind::Epa, &input).unwrap();

        // Exact posterior bit LLRs from the four-point likelihood.
        let masses: Vec<f64> = layout.alphabets[0]
            .symbols
            .iter()
            .map(|sym| -(y - h * sym[0]).norm_sqr() / noise_var + 0.25f64.ln())
            .collect();
        let exact = crate::messages::bit_llrs_from_log_masses(&masses, 2);
        for (a, b) in out.posterior_llrs[0].iter().zip(exact.iter()) {
            if (a - b).abs() > 1e-9 {
                return false;
            }
        }
    }
    true
}

/// Single layer, one antenna: the chip-mode MMSE LLRs must equal exact
/// matched demodulation for a uniform prior.
fn mmse_scalar_check() -> bool {
    let mut rng = SimRng::new(78);
    for _ in 0..50 {
        let layout = crate::transmitter::build_scheme(
            SchemeKind::CbOfdma,
            1,
            1,
            &crate::transmitter::SchemeParams::default(),
        )
        .unwrap();
        let h = Complex64::new(rng.next_gaussian(), rng.next_gaussian());
        let channel = ChannelRealization::from_coeffs(1, 1, 1, vec![h]).unwrap();
        let noise_var = 0.2 + rng.next_f64();
        let m = rng.next_index(4);
        let x = layout.alphabets[0].symbols[m][0];
        let y = h * x + rng.next_complex_gaussian(noise_var);
        let grid = ReceivedGrid {
            y: vec![vec![y]],
            noise_var,
            channel,
            amplitudes: vec![1.0],
        };
        let priors = vec![vec![DiscretePrior::uniform(layout.alphabets[0].clone())]];
        let input = DetectorInput {
            grid: &grid,
            layout: &layout,
            priors: &priors,
            cancelled: &[false],
            inner_iterations: 1,
        };
        let out = detect(DetectorKind::MmseChip, &input).unwrap();
        let masses: Vec<f64> = layout.alphabets[0]
            .symbols
            .iter()
            .map(|sym| -(y - h * sym[0]).norm_sqr() / noise_var + 0.25f64.ln())
            .collect();
        let exact = crate::messages::bit_llrs_from_log_masses(&masses, 2);
        for (a, b) in out.posterior_llrs[0].iter().zip(exact.iter()) {
            if (a - b).abs() > 1e-9 {
                return false;
            }
        }
    }
    true
}
