//! Exact posterior by exhaustive enumeration.
//!
//! Enumerates every joint assignment of all active layer blocks against the
//! Gaussian likelihood of the whole grid and marginalizes exact bit LLRs.
//! This is the near-ML reference the message-passing detectors are checked
//! against; the enumeration bound keeps it a test-sized tool.

use num_complex::Complex64;

use crate::error::{Error, Result};

use super::{assemble_output, noise_floor, DetectorInput, DetectorOutput, EffChannels};

/// Joint assignments beyond this bound are refused.
pub const ENUMERATION_BOUND: u64 = 1 << 20;

pub fn brute_force_oracle(input: &DetectorInput) -> Result<DetectorOutput> {
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

    // Flatten all (layer, block) variables.
    let mut vars: Vec<(usize, usize)> = Vec::new();
    let mut total: u64 = 1;
    for &layer in &active {
        let m = layout.alphabets[layer].size() as u64;
        for block in 0..layout.layer_blocks[layer].len() {
            total = total.saturating_mul(m);
            if total > ENUMERATION_BOUND {
                return Err(Error::ComplexityGuard(format!(
                    "joint alphabet exceeds enumeration bound 2^20"
                )));
            }
            vars.push((layer, block));
        }
    }

    let eff = EffChannels::new(grid, n_layers);
    let sigma2 = noise_floor(grid.noise_var);
    let n_rx = grid.n_rx();

    // One pass computing every joint log-mass, then exact per-variable
    // marginals in a second pass over the stored values.
    let mut joint = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; vars.len()];
    let mut field = vec![Complex64::new(0.0, 0.0); layout.n_re * n_rx];
    loop {
        // Reconstruct the superposed noiseless field for this assignment.
        field.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let mut log_prior = 0.0;
        for (t, &(layer, block)) in vars.iter().enumerate() {
            let m = idx[t];
            log_prior += input.priors[layer][block].probs[m].ln();
            let lb = &layout.layer_blocks[layer][block];
            let sym = &layout.alphabets[layer].symbols[m];
            for (slot, &re) in lb.res.iter().enumerate() {
                let g = eff.g(layer, re);
                for (rx, &h) in g.iter().enumerate() {
                    field[re * n_rx + rx] += h * sym[slot];
                }
            }
        }
        let mut loglik = 0.0;
        for re in 0..layout.n_re {
            for rx in 0..n_rx {
                loglik -= (grid.y[re][rx] - field[re * n_rx + rx]).norm_sqr() / sigma2;
            }
        }
        joint.push(log_prior + loglik);

        let mut t = vars.len();
        loop {
            if t == 0 {
                break;
            }
            t -= 1;
            idx[t] += 1;
            if idx[t] < layout.alphabets[vars[t].0].size() {
                break;
            }
            idx[t] = 0;
        }
        if idx.iter().all(|&i| i == 0) {
            break;
        }
    }

    // Marginal log-masses per (layer, block, symbol).
    let max = joint.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut marginals: Vec<Vec<f64>> = vars
        .iter()
        .map(|&(layer, _)| vec![0.0f64; layout.alphabets[layer].size()])
        .collect();
    idx.iter_mut().for_each(|i| *i = 0);
    for &lm in &joint {
        let w = (lm - max).exp();
        for (t, &i) in idx.iter().enumerate() {
            marginals[t][i] += w;
        }
        let mut t = vars.len();
        loop {
            if t == 0 {
                break;
            }
            t -= 1;
            idx[t] += 1;
            if idx[t] < layout.alphabets[vars[t].0].size() {
                break;
            }
            idx[t] = 0;
        }
    }

    let var_of = |layer: usize, block: usize| -> usize {
        vars.iter()
            .position(|&(l, b)| l == layer && b == block)
            .expect("active variable")
    };
    let op_count = total * vars.len() as u64;
    let output = assemble_output(
        input,
        |layer, block| {
            marginals[var_of(layer, block)]
                .iter()
                .map(|&w| w.ln())
                .collect()
        },
        op_count,
    );
    Ok(output)
}
