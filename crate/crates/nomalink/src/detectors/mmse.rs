//! Soft parallel interference cancellation followed by linear MMSE
//! filtering, per RE (chip mode) or jointly over a spreading block
//! (block mode).
//!
//! Chip mode inverts one `n_rx` covariance per RE and demodulates each
//! layer's per-RE symbol values; block mode stacks a block's REs, requires
//! the layer alphabets to factor as scalar times a fixed spreading vector,
//! and inverts an `n_rx * L` covariance per block. The filter output for
//! layer j is modeled as `z = mu * x + eta` with `mu = w^H g` and noise
//! variance `v * mu * (1 - mu)`, from which per-bit LLRs follow.
//!
//! The op counter tallies only the inversion cost (`dim^3` per inverted
//! covariance), matrix inversion being the dominant term separating the two
//! modes.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{dot_h, CMat};
use crate::messages::{moment_match, DiscretePrior, V_MIN};

use super::{assemble_output, noise_floor, DetectorInput, DetectorOutput, EffChannels};

/// MMSE granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmseMode {
    /// Independent filtering per RE.
    Chip,
    /// Joint filtering over each spreading block.
    Block,
}

pub fn mmse_detect(input: &DetectorInput, mode: MmseMode) -> Result<DetectorOutput> {
    match mode {
        MmseMode::Chip => chip_mode(input),
        MmseMode::Block => block_mode(input),
    }
}

fn empty_output(n_layers: usize) -> DetectorOutput {
    DetectorOutput {
        extrinsic_llrs: vec![Vec::new(); n_layers],
        posterior_llrs: vec![Vec::new(); n_layers],
        op_count: 0,
    }
}

// ---------------------------------------------------------------------------
// Chip mode
// ---------------------------------------------------------------------------

fn chip_mode(input: &DetectorInput) -> Result<DetectorOutput> {
    let layout = input.layout;
    let grid = input.grid;
    let n_layers = layout.n_layers;
    let active = input.active_layers();
    if active.is_empty() {
        return Ok(empty_output(n_layers));
    }

    let eff = EffChannels::new(grid, n_layers);
    let sigma2 = noise_floor(grid.noise_var);
    let n_rx = grid.n_rx();

    // Soft symbol statistics per occupied (layer, RE).
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
    let mut block_masses: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_layers];
    for &layer in &active {
        let m = layout.alphabets[layer].size();
        block_masses[layer] = vec![vec![0.0; m]; layout.layer_blocks[layer].len()];
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

        let mut cov = CMat::zeros(n_rx);
        cov.add_diagonal(sigma2);
        let mut total_mean = vec![Complex64::new(0.0, 0.0); n_rx];
        for u in &members {
            let (mean, var) = soft[u.layer * layout.n_re + re].expect("occupied");
            let g = eff.g(u.layer, re);
            cov.add_scaled_outer(g, var);
            for (t, &h) in total_mean.iter_mut().zip(g.iter()) {
                *t += mean * h;
            }
        }
        let inv = cov.inverse_regularized();
        op_count += (n_rx * n_rx * n_rx) as u64;

        for u in &members {
            let g = eff.g(u.layer, re);
            let (own_mean, own_var) = soft[u.layer * layout.n_re + re].expect("occupied");
            // w = v * C^-1 g; filter gain mu = w^H g; output noise v*mu*(1-mu).
            let inv_g = inv.mul_vec(g);
            let mu = own_var * dot_h(g, &inv_g).re;
            if mu <= 0.0 || mu >= 1.0 {
                continue;
            }
            let eta = (own_var * mu * (1.0 - mu)).max(1e-300);
            let mut z = Complex64::new(0.0, 0.0);
            for (rx, ig) in inv_g.iter().enumerate() {
                let residual = grid.y[re][rx] - total_mean[rx] + own_mean * g[rx];
                z += own_var * ig.conj() * residual;
            }

            let alphabet = &layout.alphabets[u.layer];
            let masses = &mut block_masses[u.layer][u.block];
            for (m, mass) in masses.iter_mut().enumerate() {
                let x = alphabet.symbols[m][u.slot];
                *mass -= (z - mu * x).norm_sqr() / eta;
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

// ---------------------------------------------------------------------------
// Block mode
// ---------------------------------------------------------------------------

/// A layer alphabet factored as `symbols[m] = scalar[m] * base`.
struct Factored {
    scalars: Vec<Complex64>,
    base: Vec<Complex64>,
}

/// Factors a block alphabet into scalar times spreading vector, if possible.
fn factor_alphabet(symbols: &[Vec<Complex64>]) -> Option<Factored> {
    let base = symbols[0].clone();
    let pivot = base
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())?
        .0;
    if base[pivot].norm() == 0.0 {
        return None;
    }
    let mut scalars = Vec::with_capacity(symbols.len());
    for sym in symbols {
        let q = sym[pivot] / base[pivot];
        for (s, b) in sym.iter().zip(base.iter()) {
            if (s - q * b).norm() > 1e-9 {
                return None;
            }
        }
        scalars.push(q);
    }
    Some(Factored { scalars, base })
}

fn block_mode(input: &DetectorInput) -> Result<DetectorOutput> {
    let layout = input.layout;
    let grid = input.grid;
    let n_layers = layout.n_layers;
    let active = input.active_layers();
    if active.is_empty() {
        return Ok(empty_output(n_layers));
    }

    let spread = layout.block_size;
    let n_blocks = layout.n_re / spread;
    // Block mode needs aligned spreading blocks: every layer has one block
    // per grid block, contained in it.
    for &layer in &active {
        let blocks = &layout.layer_blocks[layer];
        if blocks.len() != n_blocks {
            return Err(Error::Config(format!(
                "block MMSE requires {n_blocks} aligned blocks per layer, layer {layer} has {}",
                blocks.len()
            )));
        }
        for (b, lb) in blocks.iter().enumerate() {
            if lb.res.iter().any(|&re| re / spread != b) {
                return Err(Error::Config(format!(
                    "block MMSE requires layer blocks aligned to the spreading grid (layer {layer}, block {b})"
                )));
            }
        }
    }
    let factored: Vec<Option<Factored>> = (0..n_layers)
        .map(|l| {
            if input.cancelled[l] {
                None
            } else {
                factor_alphabet(&layout.alphabets[l].symbols)
            }
        })
        .collect();
    for &layer in &active {
        if factored[layer].is_none() {
            return Err(Error::Config(format!(
                "block MMSE requires a linear-spreading alphabet; layer {layer} does not factor"
            )));
        }
    }

    let eff = EffChannels::new(grid, n_layers);
    let sigma2 = noise_floor(grid.noise_var);
    let n_rx = grid.n_rx();
    let dim = n_rx * spread;

    let mut op_count = 0u64;
    let mut block_masses: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_layers];
    for &layer in &active {
        let m = layout.alphabets[layer].size();
        block_masses[layer] = vec![vec![0.0; m]; n_blocks];
    }

    let mut stacked = vec![Complex64::new(0.0, 0.0); dim];
    for b in 0..n_blocks {
        // Stack the observations of this block.
        for (slot, re) in (b * spread..(b + 1) * spread).enumerate() {
            for rx in 0..n_rx {
                stacked[slot * n_rx + rx] = grid.y[re][rx];
            }
        }

        // Per active layer: stacked effective spreading column and scalar
        // prior moments.
        let mut columns: Vec<(usize, Vec<Complex64>, Complex64, f64)> = Vec::new();
        for &layer in &active {
            let fac = factored[layer].as_ref().expect("validated");
            let lb = &layout.layer_blocks[layer][b];
            let mut u = vec![Complex64::new(0.0, 0.0); dim];
            for (slot, &re) in lb.res.iter().enumerate() {
                let g = eff.g(layer, re);
                for (rx, &h) in g.iter().enumerate() {
                    u[(re - b * spread) * n_rx + rx] = h * fac.base[slot];
                }
            }
            let prior = &input.priors[layer][b];
            let (mean, var) = scalar_moments(prior, &fac.scalars);
            columns.push((layer, u, mean, var));
        }

        let mut cov = CMat::zeros(dim);
        cov.add_diagonal(sigma2);
        let mut total_mean = vec![Complex64::new(0.0, 0.0); dim];
        for (_, u, mean, var) in &columns {
            cov.add_scaled_outer(u, *var);
            for (t, &h) in total_mean.iter_mut().zip(u.iter()) {
                *t += mean * h;
            }
        }
        let inv = cov.inverse_regularized();
        op_count += (dim * dim * dim) as u64;

        for (layer, u, own_mean, own_var) in &columns {
            let inv_u = inv.mul_vec(u);
            let mu = own_var * dot_h(u, &inv_u).re;
            if mu <= 0.0 || mu >= 1.0 {
                continue;
            }
            let eta = (own_var * mu * (1.0 - mu)).max(1e-300);
            let mut z = Complex64::new(0.0, 0.0);
            for (i, iu) in inv_u.iter().enumerate() {
                let residual = stacked[i] - total_mean[i] + own_mean * u[i];
                z += own_var * iu.conj() * residual;
            }
            let fac = factored[*layer].as_ref().expect("validated");
            let masses = &mut block_masses[*layer][b];
            for (m, mass) in masses.iter_mut().enumerate() {
                *mass -= (z - mu * fac.scalars[m]).norm_sqr() / eta;
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

/// Mean and variance of the scalar symbol under the block prior, floored
/// like the per-RE moments.
fn scalar_moments(prior: &DiscretePrior, scalars: &[Complex64]) -> (Complex64, f64) {
    let mut mean = Complex64::new(0.0, 0.0);
    let mut energy = 0.0;
    for (&q, &p) in scalars.iter().zip(prior.probs.iter()) {
        mean += p * q;
        energy += p * q.norm_sqr();
    }
    let var = (energy - mean.norm_sqr()).max(V_MIN);
    (mean, var)
}
