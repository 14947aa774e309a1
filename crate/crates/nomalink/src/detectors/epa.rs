//! Expectation propagation detection.
//!
//! EPA keeps one Gaussian message per (layer-block, RE) edge and alternates
//! two moment-matching steps per inner iteration:
//!
//! 1. Per RE, a joint linear-MMSE posterior across antennas for every
//!    colliding layer, given the incoming Gaussian symbol beliefs. The
//!    extrinsic part (posterior divided by the incoming message) becomes the
//!    RE-to-block message.
//! 2. Per layer block, the discrete symbol posterior (prior times the
//!    per-RE Gaussian evidence) is projected back onto Gaussians by matching
//!    mean and variance per occupied RE; dividing out the RE evidence gives
//!    the new block-to-RE message.
//!
//! Damping mixes each new block-to-RE message with its predecessor in
//! natural parameters. Division results with non-positive precision keep
//! the previous message (the standard stabilization). Cost per iteration is
//! linear in the alphabet size, against MPA's exponential function-node
//! enumeration.

use num_complex::Complex64;

use crate::error::Result;
use crate::linalg::{dot_h, CMat};
use crate::messages::{moment_match, DiscretePrior, GaussianMessage, V_MIN};

use super::{assemble_output, noise_floor, DetectorInput, DetectorOutput, EffChannels};

/// Damping factor on block-to-RE message updates (natural-parameter mix).
pub const DAMPING: f64 = 0.5;

pub fn epa_detect(input: &DetectorInput) -> Result<DetectorOutput> {
    let layout = input.layout;
    let grid = input.grid;
    let n_layers = layout.n_layers;
    let active = input.active_layers();
    if active.is_empty() {
        return Ok(DetectorOutput {
            extrinsic_llrs: vec![Vec::new(); n_layers],
            posterior_llrs: vec![Vec::new(); n_layers],
            op_count: 0,
        });
    }

    let eff = EffChannels::new(grid, n_layers);
    let sigma2 = noise_floor(grid.noise_var);
    let n_rx = grid.n_rx();
    let inner = input.inner_iterations.max(1);

    // Edge bookkeeping. Edges are grouped per (layer, block); each RE knows
    // which edges touch it.
    let mut edge_count = 0usize;
    let mut vn_edges: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n_layers];
    let mut re_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); layout.n_re]; // (layer, edge)
    for &layer in &active {
        let blocks = &layout.layer_blocks[layer];
        let mut per_block = Vec::with_capacity(blocks.len());
        for lb in blocks {
            let mut ids = Vec::with_capacity(lb.res.len());
            for &re in &lb.res {
                let id = edge_count;
                edge_count += 1;
                re_edges[re].push((layer, id));
                ids.push(id);
            }
            per_block.push(ids);
        }
        vn_edges[layer] = per_block;
    }

    // Block-to-RE messages start as the moment-matched priors; RE-to-block
    // messages start uninformative until the first RE pass fills them.
    let mut v2f: Vec<GaussianMessage> = vec![GaussianMessage::uninformative(); edge_count];
    let mut f2v: Vec<GaussianMessage> = vec![GaussianMessage::uninformative(); edge_count];
    for &layer in &active {
        for (block, ids) in vn_edges[layer].iter().enumerate() {
            let prior = &input.priors[layer][block];
            for (slot, &id) in ids.iter().enumerate() {
                v2f[id] = moment_match(prior, slot);
            }
        }
    }

    // Final per-block log-masses, refreshed each block pass.
    let mut block_masses: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_layers];
    for &layer in &active {
        let m = layout.alphabets[layer].size();
        block_masses[layer] = vec![vec![0.0; m]; vn_edges[layer].len()];
    }

    let mut op_count = 0u64;
    let mut g_cols: Vec<&[Complex64]> = Vec::new();

    for _round in 0..inner {
        // --- Per-RE linear-MMSE pass ---
        for re in 0..layout.n_re {
            let members = &re_edges[re];
            if members.is_empty() {
                continue;
            }
            op_count += (n_rx * n_rx * n_rx + members.len() * n_rx * n_rx) as u64;

            let mut cov = CMat::zeros(n_rx);
            cov.add_diagonal(sigma2);
            let mut mean_sum = vec![Complex64::new(0.0, 0.0); n_rx];
            g_cols.clear();
            for &(layer, id) in members {
                let g = eff.g(layer, re);
                g_cols.push(g);
                let msg = &v2f[id];
                cov.add_scaled_outer(g, msg.var);
                for (s, &h) in mean_sum.iter_mut().zip(g.iter()) {
                    *s += msg.mean * h;
                }
            }
            let msgs: Vec<GaussianMessage> = members.iter().map(|&(_, id)| v2f[id]).collect();
            let posteriors = re_posteriors(&cov, &mean_sum, &g_cols, &msgs, &grid.y[re]);
            for ((_, id), posterior) in members.iter().zip(posteriors.into_iter()) {
                if let Some(ext) = posterior.divide(&v2f[*id]) {
                    f2v[*id] = ext;
                }
                // Non-positive precision: keep the previous message.
            }
        }

        // --- Per-block moment-matching pass ---
        for &layer in &active {
            let alphabet = &layout.alphabets[layer];
            let m_size = alphabet.size();
            op_count += (2 * m_size * alphabet.width() * vn_edges[layer].len()) as u64;
            for (block, ids) in vn_edges[layer].iter().enumerate() {
                let prior = &input.priors[layer][block];
                let masses = &mut block_masses[layer][block];
                for (m, mass) in masses.iter_mut().enumerate() {
                    let mut lm = prior.probs[m].ln();
                    for (slot, &id) in ids.iter().enumerate() {
                        let msg = &f2v[id];
                        if msg.is_uninformative() {
                            continue;
                        }
                        let x = alphabet.symbols[m][slot];
                        lm -= (x - msg.mean).norm_sqr() / msg.var;
                    }
                    *mass = lm;
                }
                // Normalized discrete posterior for the moment matching.
                let max = masses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut probs: Vec<f64> = masses.iter().map(|&lm| (lm - max).exp()).collect();
                let sum: f64 = probs.iter().sum();
                probs.iter_mut().for_each(|p| *p /= sum);
                let posterior = DiscretePrior {
                    alphabet: alphabet.clone(),
                    probs,
                };

                for (slot, &id) in ids.iter().enumerate() {
                    let matched = moment_match(&posterior, slot);
                    let Some(new_msg) = matched.divide(&f2v[id]) else {
                        continue;
                    };
                    let old = v2f[id];
                    let precision =
                        DAMPING * new_msg.precision() + (1.0 - DAMPING) * old.precision();
                    let weighted =
                        DAMPING * new_msg.weighted_mean() + (1.0 - DAMPING) * old.weighted_mean();
                    v2f[id] = GaussianMessage::from_natural(precision, weighted);
                }
            }
        }
    }

    let output = assemble_output(
        input,
        |layer, block| block_masses[layer][block].clone(),
        op_count,
    );
    Ok(output)
}

/// Joint per-RE linear-MMSE posterior moments for every colliding layer.
///
/// `cov` is the prior covariance `sigma^2 I + sum v_j g_j g_j^H`, `mean_sum`
/// the prior mean of the observation; returns N(mean, var) posteriors in
/// member order, variances floored at [`V_MIN`].
pub(crate) fn re_posteriors(
    cov: &CMat,
    mean_sum: &[Complex64],
    g_cols: &[&[Complex64]],
    msgs: &[GaussianMessage],
    y: &[Complex64],
) -> Vec<GaussianMessage> {
    let inv = cov.inverse_regularized();
    let residual: Vec<Complex64> = y
        .iter()
        .zip(mean_sum.iter())
        .map(|(obs, s)| obs - s)
        .collect();
    let inv_res = inv.mul_vec(&residual);
    g_cols
        .iter()
        .zip(msgs.iter())
        .map(|(g, msg)| {
            let a = dot_h(g, &inv.mul_vec(g)).re;
            let b = dot_h(g, &inv_res);
            let mean = msg.mean + msg.var * b;
            let var = (msg.var - msg.var * msg.var * a).max(V_MIN);
            GaussianMessage::new(mean, var)
        })
        .collect()
}
