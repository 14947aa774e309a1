//! Detector contract tests: closed-form oracles, cross-detector agreement,
//! counter definitions, and the shared output invariants.

use std::sync::Arc;

use num_complex::Complex64;

use nomalink::channel::{ChannelRealization, ReceivedGrid};
use nomalink::detectors::{
    brute_force_oracle, detect, mmse_detect, mpa_detect, prior_bit_llrs, DetectorInput,
    DetectorKind, MmseMode,
};
use nomalink::error::Error;
use nomalink::harness::selftest::{random_tree_instance, tree_mpa_gap};
use nomalink::messages::{llr_to_prior, DiscretePrior};
use nomalink::rng::SimRng;
use nomalink::transmitter::{build_scheme, LayerBlock, SchemeKind, SchemeLayout, SchemeParams};

/// Grid with hand-picked channels, signals, and noise.
fn make_grid(
    layout: &SchemeLayout,
    n_rx: usize,
    labels: &[Vec<usize>],
    snr_db: f64,
    seed: u64,
) -> ReceivedGrid {
    let mut rng = SimRng::new(seed);
    let n_layers = layout.n_layers;
    let n_re = layout.n_re;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n_layers * n_re * n_rx];
    for c in coeffs.iter_mut() {
        *c = rng.next_complex_gaussian(1.0);
    }
    let channel = ChannelRealization::from_coeffs(n_layers, n_re, n_rx, coeffs).unwrap();
    let noise_var = 10f64.powf(-snr_db / 10.0);
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n_rx]; n_re];
    for layer in 0..n_layers {
        for (b, lb) in layout.layer_blocks[layer].iter().enumerate() {
            let sym = &layout.alphabets[layer].symbols[labels[layer][b]];
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
    ReceivedGrid {
        y,
        noise_var,
        channel,
        amplitudes: vec![1.0; n_layers],
    }
}

fn uniform_priors(layout: &SchemeLayout) -> Vec<Vec<DiscretePrior>> {
    (0..layout.n_layers)
        .map(|l| {
            layout.layer_blocks[l]
                .iter()
                .map(|_| DiscretePrior::uniform(layout.alphabets[l].clone()))
                .collect()
        })
        .collect()
}

const ALL_DETECTORS: [DetectorKind; 5] = [
    DetectorKind::Mpa,
    DetectorKind::Epa,
    DetectorKind::Ese,
    DetectorKind::MmseChip,
    DetectorKind::MmseBlock,
];

// ---------------------------------------------------------------------------
// MPA
// ---------------------------------------------------------------------------

#[test]
fn mpa_single_layer_noiseless_recovers_bits_strongly() {
    let layout = build_scheme(SchemeKind::CbOfdma, 1, 1, &SchemeParams::default()).unwrap();
    let labels = vec![vec![2usize]]; // bits 10
    let grid = make_grid(&layout, 1, &labels, 40.0, 3);
    let priors = uniform_priors(&layout);
    let input = DetectorInput {
        grid: &grid,
        layout: &layout,
        priors: &priors,
        cancelled: &[false],
        inner_iterations: 1,
    };
    let out = mpa_detect(&input).unwrap();
    let llrs = &out.extrinsic_llrs[0];
    assert!(llrs[0] < -15.0, "bit 1 of label 10: llr = {}", llrs[0]);
    assert!(llrs[1] > 15.0, "bit 0 of label 10: llr = {}", llrs[1]);
}

#[test]
fn mpa_one_iteration_is_exact_on_a_star_graph() {
    // Two layers colliding on one RE, a second RE left unoccupied: the
    // factor graph is a star, so one flooding round is exact.
    let qpsk = Arc::new(
        build_scheme(SchemeKind::CbOfdma, 1, 1, &SchemeParams::default())
            .unwrap()
            .alphabets[0]
            .as_ref()
            .clone(),
    );
    let layer_blocks = vec![
        vec![LayerBlock { res: vec![0] }],
        vec![LayerBlock { res: vec![0] }],
    ];
    let layout = SchemeLayout::custom(
        SchemeKind::Custom,
        2,
        1,
        layer_blocks,
        vec![qpsk.clone(), qpsk],
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let labels = vec![vec![(seed % 4) as usize], vec![((seed / 4) % 4) as usize]];
        let grid = make_grid(&layout, 2, &labels, 8.0, 100 + seed);
        let priors = uniform_priors(&layout);
        let input = DetectorInput {
            grid: &grid,
            layout: &layout,
            priors: &priors,
            cancelled: &[false, false],
            inner_iterations: 1,
        };
        let mpa = mpa_detect(&input).unwrap();
        let oracle = brute_force_oracle(&input).unwrap();
        for layer in 0..2 {
            for (a, b) in mpa.extrinsic_llrs[layer]
                .iter()
                .zip(oracle.extrinsic_llrs[layer].iter())
            {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst < 1e-9, "worst gap {worst}");
}

#[test]
fn mpa_matches_oracle_on_deeper_trees() {
    let mut worst: f64 = 0.0;
    for seed in 0..30 {
        let instance = random_tree_instance(1000 + seed);
        worst = worst.max(tree_mpa_gap(&instance, 10).unwrap());
    }
    assert!(worst < 1e-6, "worst gap {worst}");
}

#[test]
fn mpa_op_count_is_projected_size_to_the_collision_degree() {
    // SCMA: every RE has collision degree 3 and projected size 4.
    let layout = build_scheme(SchemeKind::Scma, 6, 8, &SchemeParams::default()).unwrap();
    let labels: Vec<Vec<usize>> = (0..6).map(|l| vec![l % 4, (l + 1) % 4]).collect();
    let grid = make_grid(&layout, 2, &labels, 10.0, 9);
    let priors = uniform_priors(&layout);
    for inner in [1usize, 5] {
        let input = DetectorInput {
            grid: &grid,
            layout: &layout,
            priors: &priors,
            cancelled: &[false; 6],
            inner_iterations: inner,
        };
        let out = mpa_detect(&input).unwrap();
        let expected = (inner * 8 * 4usize.pow(3)) as u64;
        assert_eq!(out.op_count, expected, "inner = {inner}");
    }
}

#[test]
fn mpa_op_count_ratio_between_collision_degrees_is_projected_size() {
    // CB-OFDMA with 3 vs 2 layers on the same grid: cost ratio must be
    // exactly m_p = 4.
    let params = SchemeParams::default();
    let mut ops = Vec::new();
    for n_layers in [2usize, 3] {
        let layout = build_scheme(SchemeKind::CbOfdma, n_layers, 4, &params).unwrap();
        let labels: Vec<Vec<usize>> = (0..n_layers).map(|l| vec![l; 4]).collect();
        let grid = make_grid(&layout, 2, &labels, 10.0, 21);
        let priors = uniform_priors(&layout);
        let cancelled = vec![false; n_layers];
        let input = DetectorInput {
            grid: &grid,
            layout: &layout,
            priors: &priors,
            cancelled: &cancelled,
            inner_iterations: 4,
        };
        ops.push(mpa_detect(&input).unwrap().op_count);
    }
    assert_eq!(ops[1], ops[0] * 4);
}

#[test]
fn mpa_refuses_excessive_collision_degree() {
    let layout = build_scheme(SchemeKind::CbOfdma, 9, 2, &SchemeParams::default()).unwrap();
    let labels: Vec<Vec<usize>> = (0..9).map(|_| vec![0, 0]).collect();
    let grid = make_grid(&layout, 2, &labels, 10.0, 23);
    let priors = uniform_priors(&layout);
    let input = DetectorInput {
        grid: &grid,
        layout: &layout,
        priors: &priors,
        cancelled: &[false; 9],
        inner_iterations: 1,
    };
    match mpa_detect(&input) {
        Err(Error::ComplexityGuard(msg)) => {
            assert!(msg.contains("RE 0"), "message should name the RE: {msg}")
        }
        other => panic!("expected complexity guard, got {other:?}"),
    }
}

// ---------------------------------------------------------------------------
// EPA
// ---------------------------------------------------------------------------

#[test]
fn epa_all_cancelled_is_empty_with_zero_ops() {
    let layout = build_scheme(SchemeKind::Scma, 4, 8, &SchemeParams::default()).unwrap();
    let labels: Vec<Vec<usize>> = (0..4).map(|_| vec![0, 0]).collect();
    let grid = make_grid(&layout, 2, &labels, 10.0, 31);
    let priors = uniform_priors(&layout);
    let input = DetectorInput {
        grid: &grid,
        layout: &layout,
        priors: &priors,
        cancelled: &[true; 4],
        inner_iterations: 3,
    };
    let out = detect(DetectorKind::Epa, &input).unwrap();
    assert_eq!(out.op_count, 0);
    assert!(out.extrinsic_llrs.iter().all(|l| l.is_empty()));
}

#[test]
fn epa_agrees_with_mpa_signs_at_high_snr() {
    // Two-layer star instances at 20 dB: sign agreement on nearly all bits.
    let layout = {
        let qpsk = build_scheme(SchemeKind::CbOfdma, 2, 2, &SchemeParams::default()).unwrap();
        qpsk
    };
    let mut agree = 0usize;
    let mut total = 0usize;
    let mut rng = SimRng::new(5);
    for seed in 0..1000 {
        let labels: Vec<Vec<usize>> = (0..2)
            .map(|_| (0..2).map(|_| rng.next_index(4)).collect())
            .collect();
        let grid = make_grid(&layout, 2, &labels, 20.0, 40_000 + seed);
        let priors = uniform_priors(&layout);
        let input = DetectorInput {
            grid: &grid,
            layout: &layout,
            priors: &priors,
            cancelled: &[false, false],
            inner_iterations: 5,
        };
        let epa = detect(DetectorKind::Epa, &input).unwrap();
        let mpa = detect(DetectorKind::Mpa, &input).unwrap();
        for layer in 0..2 {
            for (a, b) in epa.extrinsic_llrs[layer]
                .iter()
                .zip(mpa.extrinsic_llrs[layer].iter())
            {
                total += 1;
                if a.signum() == b.signum() {
                    agree += 1;
                }
            }
        }
    }
    let rate = agree as f64 / total as f64;
    assert!(rate >= 0.99, "sign agreement {rate}");
}

#[test]
fn epa_op_count_is_affine_in_alphabet_size() {
    // Same topology (CB-OFDMA, fixed grid), alphabet sizes 2, 4, 16:
    // an affine counter satisfies f(16)-f(4) = 6 * (f(4)-f(2)).
    let mut ops = Vec::new();
    for mod_order in [2usize, 4, 16] {
        let params = SchemeParams {
            mod_order,
            spread_len: 4,
        };
        let layout = build_scheme(SchemeKind::CbOfdma, 2, 4, &params).unwrap();
        let labels: Vec<Vec<usize>> = (0..2).map(|_| vec![0; 4]).collect();
        let grid = make_grid(&layout, 2, &labels, 10.0, 51);
        let priors = uniform_priors(&layout);
        let input = DetectorInput {
            grid: &grid,
            layout: &layout,
            priors: &priors,
            cancelled: &[false, false],
            inner_iterations: 3,
        };
        ops.push(detect(DetectorKind::Epa, &input).unwrap().op_count as i64);
    }
    assert_eq!(ops[2] - ops[1], 6 * (ops[1] - ops[0]));
}

// ---------------------------------------------------------------------------
// ESE
// ---------------------------------------------------------------------------

#[test]
fn ese_single_layer_equals_exact_matched_filter() {
    let layout = build_scheme(SchemeKind::CbOfdma, 1, 1, &SchemeParams::default()).unwrap();
    for seed in 0..50 {
        let labels = vec![vec![(seed % 4) as usize]];
        let grid = make_grid(&layout, 2, &labels, 6.0, 200 + seed);
        let priors = uniform_priors(&layout);
        let input = DetectorInput {
            grid: &grid,
            layout: &layout,
            priors: &priors,
            cancelled: &[false],
            inner_iterations: 1,
        };
        let ese = detect(DetectorKind::Ese, &input).unwrap();
        let oracle = brute_force_oracle(&input).unwrap();
        for (a, b) in ese.extrinsic_llrs[0]
            .iter()
            .zip(oracle.extrinsic_llrs[0].iter())
        {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn ese_orthogonal_channels_decouple() {
    // g0 = [a, 0], g1 = [0, b]: each layer's LLRs equal its single-layer run.
    let layout = build_scheme(SchemeKind::CbOfdma, 2, 1, &SchemeParams::default()).unwrap();
    let single = build_scheme(SchemeKind::CbOfdma, 1, 1, &SchemeParams::default()).unwrap();
    let mut rng = SimRng::new(61);
    for _ in 0..25 {
        let a = Complex64::new(rng.next_gaussian(), rng.next_gaussian());
        let b = Complex64::new(rng.next_gaussian(), rng.next_gaussian());
        let zero = Complex64::new(0.0, 0.0);
        let channel = ChannelRealization::from_coeffs(2, 1, 2, vec![a, zero, zero, b]).unwrap();
        let noise_var = 0.5;
        let x0 = layout.alphabets[0].symbols[rng.next_index(4)][0];
        let x1 = layout.alphabets[1].symbols[rng.next_index(4)][0];
        let noise = [
            rng.next_complex_gaussian(noise_var),
            rng.next_complex_gaussian(noise_var),
        ];
        let y = vec![vec![a * x0 + noise[0], b * x1 + noise[1]]];
        let grid = ReceivedGrid {
            y: y.clone(),
            noise_var,
            channel,
            amplitudes: vec![1.0, 1.0],
        };
        let priors = uniform_priors(&layout);
        let input = DetectorInput {
            grid: &grid,
            layout: &layout,
            priors: &priors,
            cancelled: &[false, false],
            inner_iterations: 1,
        };
        let joint = detect(DetectorKind::Ese, &input).unwrap();

        for (layer, (g, x)) in [(a, x0), (b, x1)].iter().enumerate() {
            let rx_slot = layer;
            let channel1 = ChannelRealization::from_coeffs(1, 1, 1, vec![*g]).unwrap();
            let grid1 = ReceivedGrid {
                y: vec![vec![y[0][rx_slot]]],
                noise_var,
                channel: channel1,
                amplitudes: vec![1.0],
            };
            let priors1 = uniform_priors(&single);
            let input1 = DetectorInput {
                grid: &grid1,
                layout: &single,
                priors: &priors1,
                cancelled: &[false],
                inner_iterations: 1,
            };
            let alone = detect(DetectorKind::Ese, &input1).unwrap();
            for (p, q) in joint.extrinsic_llrs[layer]
                .iter()
                .zip(alone.extrinsic_llrs[0].iter())
            {
                assert!((p - q).abs() < 1e-9, "layer {layer}: {p} vs {q}");
            }
            let _ = x;
        }
    }
}

#[test]
fn ese_certain_priors_act_like_hard_cancellation() {
    let layout = build_scheme(SchemeKind::CbOfdma, 2, 4, &SchemeParams::default()).unwrap();
    let labels = vec![vec![1, 2, 3, 0], vec![2, 0, 1, 3]];
    let grid = make_grid(&layout, 2, &labels, 8.0, 77);

    // Layer 1's prior pinned on its true symbols.
    let mut priors = uniform_priors(&layout);
    for (b, &m) in labels[1].iter().enumerate() {
        let mut probs = vec![0.0; 4];
        probs[m] = 1.0;
        priors[1][b] = DiscretePrior {
            alphabet: layout.alphabets[1].clone(),
            probs,
        };
    }
    let input = DetectorInput {
        grid: &grid,
        layout: &layout,
        priors: &priors,
        cancelled: &[false, false],
        inner_iterations: 1,
    };
    let soft = detect(DetectorKind::Ese, &input).unwrap();

    // Same grid with layer 1's contribution subtracted and the layer cancelled.
    let mut cancelled_grid = grid.clone();
    let row = layout
        .map_bits(1, &{
            let mut bits = Vec::new();
            for &m in &labels[1] {
                bits.push((m >> 1) as u8);
                bits.push((m & 1) as u8);
            }
            bits
        })
        .unwrap();
    cancelled_grid.cancel_layer(1, &row);
    let priors2 = uniform_priors(&layout);
    let input2 = DetectorInput {
        grid: &cancelled_grid,
        layout: &layout,
        priors: &priors2,
        cancelled: &[false, true],
        inner_iterations: 1,
    };
    let hard = detect(DetectorKind::Ese, &input2).unwrap();
    for (a, b) in soft.extrinsic_llrs[0]
        .iter()
        .zip(hard.extrinsic_llrs[0].iter())
    {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }
}

// ---------------------------------------------------------------------------
// MMSE
// ---------------------------------------------------------------------------

#[test]
fn mmse_modes_coincide_on_unspread_layouts() {
    let layout = build_scheme(SchemeKind::CbOfdma, 3, 6, &SchemeParams::default()).unwrap();
    let labels: Vec<Vec<usize>> = (0..3).map(|l| vec![l % 4; 6]).collect();
    let grid = make_grid(&layout, 2, &labels, 8.0, 91);
    let priors = uniform_priors(&layout);
    let input = DetectorInput {
        grid: &grid,
        layout: &layout,
        priors: &priors,
        cancelled: &[false; 3],
        inner_iterations: 1,
    };
    let chip = mmse_detect(&input, MmseMode::Chip).unwrap();
    let block = mmse_detect(&input, MmseMode::Block).unwrap();
    for layer in 0..3 {
        for (a, b) in chip.extrinsic_llrs[layer]
            .iter()
            .zip(block.extrinsic_llrs[layer].iter())
        {
            assert!((a - b).abs() < 1e-9, "layer {layer}: {a} vs {b}");
        }
    }
}

#[test]
fn mmse_block_to_chip_inversion_cost_ratio_is_spread_squared() {
    let layout = build_scheme(SchemeKind::Nls, 4, 16, &SchemeParams::default()).unwrap();
    let labels: Vec<Vec<usize>> = (0..4).map(|l| vec![l % 4; 4]).collect();
    let grid = make_grid(&layout, 2, &labels, 8.0, 93);
    let priors = uniform_priors(&layout);
    let input = DetectorInput {
        grid: &grid,
        layout: &layout,
        priors: &priors,
        cancelled: &[false; 4],
        inner_iterations: 1,
    };
    let chip = mmse_detect(&input, MmseMode::Chip).unwrap();
    let block = mmse_detect(&input, MmseMode::Block).unwrap();
    // Chip: 16 REs at 2^3 each; block: 4 blocks at 8^3 each; ratio L^2 = 16.
    assert_eq!(chip.op_count, 16 * 8);
    assert_eq!(block.op_count, 4 * 512);
    assert_eq!(block.op_count, chip.op_count * 16);
}

#[test]
fn mmse_survives_zero_noise() {
    let layout = build_scheme(SchemeKind::CbOfdma, 2, 4, &SchemeParams::default()).unwrap();
    let labels = vec![vec![0, 1, 2, 3], vec![3, 2, 1, 0]];
    let mut grid = make_grid(&layout, 1, &labels, 10.0, 95);
    grid.noise_var = 0.0;
    let priors = uniform_priors(&layout);
    let input = DetectorInput {
        grid: &grid,
        layout: &layout,
        priors: &priors,
        cancelled: &[false, false],
        inner_iterations: 1,
    };
    let out = mmse_detect(&input, MmseMode::Chip).unwrap();
    for llrs in &out.extrinsic_llrs {
        assert!(llrs.iter().all(|l| l.is_finite()));
    }
}

// ---------------------------------------------------------------------------
// Oracle and shared invariants
// ---------------------------------------------------------------------------

#[test]
fn oracle_equals_mpa_for_single_layer() {
    let layout = build_scheme(SchemeKind::CbOfdma, 1, 3, &SchemeParams::default()).unwrap();
    let labels = vec![vec![1, 3, 0]];
    let grid = make_grid(&layout, 2, &labels, 5.0, 101);
    let priors = uniform_priors(&layout);
    let input = DetectorInput {
        grid: &grid,
        layout: &layout,
        priors: &priors,
        cancelled: &[false],
        inner_iterations: 1,
    };
    let mpa = mpa_detect(&input).unwrap();
    let oracle = brute_force_oracle(&input).unwrap();
    for (a, b) in mpa.extrinsic_llrs[0]
        .iter()
        .zip(oracle.extrinsic_llrs[0].iter())
    {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn oracle_refuses_oversized_joint_alphabets() {
    let layout = build_scheme(SchemeKind::CbOfdma, 8, 4, &SchemeParams::default()).unwrap();
    let labels: Vec<Vec<usize>> = (0..8).map(|_| vec![0; 4]).collect();
    let grid = make_grid(&layout, 1, &labels, 5.0, 103);
    let priors = uniform_priors(&layout);
    let input = DetectorInput {
        grid: &grid,
        layout: &layout,
        priors: &priors,
        cancelled: &[false; 8],
        inner_iterations: 1,
    };
    assert!(matches!(
        brute_force_oracle(&input),
        Err(Error::ComplexityGuard(_))
    ));
}

#[test]
fn extrinsic_plus_prior_reconstructs_posterior_exactly() {
    let layout = build_scheme(SchemeKind::Scma, 6, 8, &SchemeParams::default()).unwrap();
    let labels: Vec<Vec<usize>> = (0..6).map(|l| vec![l % 4, (l + 2) % 4]).collect();
    let grid = make_grid(&layout, 2, &labels, 6.0, 111);
    let mut rng = SimRng::new(112);
    let priors: Vec<Vec<DiscretePrior>> = (0..6)
        .map(|l| {
            layout.layer_blocks[l]
                .iter()
                .map(|_| {
                    let llrs: Vec<f64> = (0..2).map(|_| 3.0 * rng.next_gaussian()).collect();
                    llr_to_prior(layout.alphabets[l].clone(), &llrs)
                })
                .collect()
        })
        .collect();
    for kind in ALL_DETECTORS {
        let input = DetectorInput {
            grid: &grid,
            layout: &layout,
            priors: &priors,
            cancelled: &[false; 6],
            inner_iterations: 3,
        };
        let out = detect(kind, &input).unwrap();
        for layer in 0..6 {
            let bits = layout.alphabets[layer].bits;
            for (block, prior) in priors[layer].iter().enumerate() {
                let prior_llrs = prior_bit_llrs(prior);
                for b in 0..bits {
                    let i = block * bits + b;
                    let reconstructed = out.extrinsic_llrs[layer][i] + prior_llrs[b];
                    assert_eq!(
                        reconstructed, out.posterior_llrs[layer][i],
                        "{kind} layer {layer} bit {i}"
                    );
                }
            }
        }
    }
}

#[test]
fn detectors_are_permutation_equivariant() {
    let layout = build_scheme(SchemeKind::CbOfdma, 2, 4, &SchemeParams::default()).unwrap();
    let labels = vec![vec![0, 1, 2, 3], vec![3, 1, 0, 2]];
    let grid = make_grid(&layout, 2, &labels, 8.0, 121);

    // Swap the two layers: channels swap, labels swap.
    let n_re = 4;
    let mut swapped_coeffs = Vec::new();
    for layer in [1usize, 0] {
        for re in 0..n_re {
            swapped_coeffs.extend_from_slice(grid.channel.h(layer, re));
        }
    }
    let swapped_grid = ReceivedGrid {
        y: grid.y.clone(),
        noise_var: grid.noise_var,
        channel: ChannelRealization::from_coeffs(2, n_re, 2, swapped_coeffs).unwrap(),
        amplitudes: vec![1.0, 1.0],
    };

    let priors = uniform_priors(&layout);
    for kind in ALL_DETECTORS {
        let out = detect(
            kind,
            &DetectorInput {
                grid: &grid,
                layout: &layout,
                priors: &priors,
                cancelled: &[false, false],
                inner_iterations: 3,
            },
        )
        .unwrap();
        let out_swapped = detect(
            kind,
            &DetectorInput {
                grid: &swapped_grid,
                layout: &layout,
                priors: &priors,
                cancelled: &[false, false],
                inner_iterations: 3,
            },
        )
        .unwrap();
        for layer in 0..2 {
            for (a, b) in out.extrinsic_llrs[layer]
                .iter()
                .zip(out_swapped.extrinsic_llrs[1 - layer].iter())
            {
                assert!((a - b).abs() < 1e-9, "{kind} layer {layer}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn cancelled_layer_equals_zero_channel_layer() {
    let layout = build_scheme(SchemeKind::CbOfdma, 3, 4, &SchemeParams::default()).unwrap();
    let labels = vec![vec![0, 1, 2, 3], vec![3, 1, 0, 2], vec![2, 2, 1, 1]];
    let grid = make_grid(&layout, 2, &labels, 8.0, 131);

    // Variant A: layer 2 cancelled. Variant B: layer 2 present with an
    // all-zero channel.
    let mut zeroed_coeffs = Vec::new();
    for layer in 0..3 {
        for re in 0..4 {
            if layer == 2 {
                zeroed_coeffs.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(2));
            } else {
                zeroed_coeffs.extend_from_slice(grid.channel.h(layer, re));
            }
        }
    }
    let zeroed_grid = ReceivedGrid {
        y: grid.y.clone(),
        noise_var: grid.noise_var,
        channel: ChannelRealization::from_coeffs(3, 4, 2, zeroed_coeffs).unwrap(),
        amplitudes: vec![1.0; 3],
    };
    let priors = uniform_priors(&layout);
    for kind in [
        DetectorKind::Mpa,
        DetectorKind::Epa,
        DetectorKind::Ese,
        DetectorKind::MmseChip,
    ] {
        let cancelled = detect(
            kind,
            &DetectorInput {
                grid: &grid,
                layout: &layout,
                priors: &priors,
                cancelled: &[false, false, true],
                inner_iterations: 2,
            },
        )
        .unwrap();
        let zeroed = detect(
            kind,
            &DetectorInput {
                grid: &zeroed_grid,
                layout: &layout,
                priors: &priors,
                cancelled: &[false, false, false],
                inner_iterations: 2,
            },
        )
        .unwrap();
        for layer in 0..2 {
            for (a, b) in cancelled.extrinsic_llrs[layer]
                .iter()
                .zip(zeroed.extrinsic_llrs[layer].iter())
            {
                assert!((a - b).abs() < 1e-9, "{kind} layer {layer}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn oracle_swaps_with_symmetric_relabeling() {
    // Swapping the labels of a symmetric two-layer instance swaps outputs.
    let layout = build_scheme(SchemeKind::CbOfdma, 2, 2, &SchemeParams::default()).unwrap();
    let grid_a = make_grid(&layout, 1, &[vec![1, 2], vec![3, 0]], 9.0, 141);
    let priors = uniform_priors(&layout);

    let mut swapped_coeffs = Vec::new();
    for layer in [1usize, 0] {
        for re in 0..2 {
            swapped_coeffs.extend_from_slice(grid_a.channel.h(layer, re));
        }
    }
    let grid_b = ReceivedGrid {
        y: grid_a.y.clone(),
        noise_var: grid_a.noise_var,
        channel: ChannelRealization::from_coeffs(2, 2, 1, swapped_coeffs).unwrap(),
        amplitudes: vec![1.0, 1.0],
    };
    let out_a = brute_force_oracle(&DetectorInput {
        grid: &grid_a,
        layout: &layout,
        priors: &priors,
        cancelled: &[false, false],
        inner_iterations: 1,
    })
    .unwrap();
    let out_b = brute_force_oracle(&DetectorInput {
        grid: &grid_b,
        layout: &layout,
        priors: &priors,
        cancelled: &[false, false],
        inner_iterations: 1,
    })
    .unwrap();
    for layer in 0..2 {
        for (a, b) in out_a.extrinsic_llrs[layer]
            .iter()
            .zip(out_b.extrinsic_llrs[1 - layer].iter())
        {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
