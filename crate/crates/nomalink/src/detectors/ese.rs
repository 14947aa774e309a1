//! Elementary signal estimator.
//!
//! Per layer and RE, ESE matched-filters across antennas and treats the
//! residual inter-user interference plus noise as one scalar Gaussian: the
//! other layers' soft symbols (moment-matched from their current priors) are
//! subtracted in the mean and folded into the variance. There is no inner
//! iteration; refinement only comes from the outer loop's prior updates.

use num_complex::Complex64;

use crate::error::Result;
use crate::linalg::{dot_h, norm_sqr};
use crate::messages::moment_match;

use super::{assemble_output, noise_floor, DetectorInput, DetectorOutput, EffChannels};

pub fn ese_detect(input: &DetectorInput) -> Result<DetectorOutput> {
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

    // Soft symbol statistics per occupied (layer, RE), from the priors.
    let mut soft: Vec<Option<(Complex64, f64)>> = vec![None; n_layers * layout.n_re];
    for &layer in &active {
        for (block, lb) in layout.layer_blocks[layer].iter().enumerate() {
            let prior = &input.priors[layer][block];
            for (slot, &re) in lb.res.iter().enumerate() {
                let msg = moment_match(prior, slot);
                soft[layer * layout.n_re + re] = Some((msg.mean, msg.var));
            }
        }
    }

    let mut op_count = 0u64;

    // Per-block log-masses accumulated over the block's REs.
    let mut block_masses: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_layers];
    for &layer in &active {
        let m = layout.alphabets[layer].size();
        block_masses[layer] = vec![vec![0.0; m]; layout.layer_blocks[layer].len()];
        op_count += (m * layout.alphabets[layer].width() * layout.layer_blocks[layer].len()) as u64;
    }

    for re in 0..layout.n_re {
        let members: Vec<_> = layout
            .users_of_re(re)
            .iter()
            .filter(|u| !input.cancelled[u.layer])
            .collect();
        if members.is_empty() {
            continue;
        }
        let d = members.len();
        op_count += (d * n_rx * (d + 1)) as u64;

        // Total soft-interference mean across antennas.
        let mut total_mean = vec![Complex64::new(0.0, 0.0); n_rx];
        for u in &members {
            let (mean, _) = soft[u.layer * layout.n_re + re].expect("occupied");
            let g = eff.g(u.layer, re);
            for (t, &h) in total_mean.iter_mut().zip(g.iter()) {
                *t += mean * h;
            }
        }

        for u in &members {
            let g = eff.g(u.layer, re);
            let g_norm = norm_sqr(g);
            if g_norm == 0.0 {
                continue;
            }
            let (own_mean, _) = soft[u.layer * layout.n_re + re].expect("occupied");
            // Matched-filter output with the other layers' means removed.
            let mut z = Complex64::new(0.0, 0.0);
            for (rx, &h) in g.iter().enumerate() {
                z += h.conj() * (grid.y[re][rx] - total_mean[rx] + own_mean * g[rx]);
            }
            // Scalar interference-plus-noise variance after the filter.
            let mut var = sigma2 * g_norm;
            for v in &members {
                if v.layer == u.layer {
                    continue;
                }
                let (_, other_var) = soft[v.layer * layout.n_re + re].expect("occupied");
                let cross = dot_h(g, eff.g(v.layer, re));
                var += other_var * cross.norm_sqr();
            }
            let var = var.max(1e-300);

            let alphabet = &layout.alphabets[u.layer];
            let masses = &mut block_masses[u.layer][u.block];
            for (m, mass) in masses.iter_mut().enumerate() {
                let x = alphabet.symbols[m][u.slot];
                *mass -= (z - g_norm * x).norm_sqr() / var;
            }
        }
    }

    let output = assemble_output(
        input,
        |layer, block| {
            let prior = &input.priors[layer][block];
            block_masses[layer][block]
                .iter()
                .zip(prior.probs.iter())
                .map(|(&ll, &p)| ll + p.ln())
                .collect()
        },
        op_count,
    );
    Ok(output)
}
