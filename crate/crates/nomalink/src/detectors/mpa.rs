//! Message passing algorithm: sum-product detection on the collision factor
//! graph.
//!
//! Function nodes are resource elements, variable nodes are layer blocks.
//! Messages live on the per-RE *projected* alphabets (distinct per-RE points
//! of each layer's block alphabet), which keeps the function-node cost at
//! the product of projected sizes rather than full alphabet sizes. Updates
//! are flooding rounds: every function node reads the previous round's
//! variable messages, then every variable node refreshes from the new
//! function messages.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::norm_sqr;
use crate::messages::DiscretePrior;

use super::{assemble_output, noise_floor, DetectorInput, DetectorOutput, EffChannels};

/// Collision-degree cap: REs where more layers collide are refused.
pub const MAX_COLLISION_DEGREE: usize = 8;

struct FnMember {
    edge: usize,
    /// Projected points of this layer at this RE, premultiplied by the
    /// effective channel: `sig[p]` is `g * point_p` over antennas.
    sig: Vec<Vec<Complex64>>,
}

struct VnEdge {
    edge: usize,
    /// Symbol index -> projected point index at this edge's RE.
    map: Vec<usize>,
}

pub fn mpa_detect(input: &DetectorInput) -> Result<DetectorOutput> {
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

    // Per (layer, slot) projections, shared by all blocks of a layer.
    let projections: Vec<Vec<(Vec<Complex64>, Vec<usize>)>> = (0..n_layers)
        .map(|l| {
            let a = &layout.alphabets[l];
            (0..a.width()).map(|slot| a.projection(slot)).collect()
        })
        .collect();

    // Build the bipartite graph over active layers.
    let mut edge_count = 0usize;
    let mut fn_nodes: Vec<(usize, Vec<FnMember>)> = Vec::new(); // (re, members)
    let mut vn_edges: Vec<Vec<Vec<VnEdge>>> = (0..n_layers).map(|_| Vec::new()).collect(); // [layer][block]
    let mut edge_points: Vec<usize> = Vec::new(); // projected size per edge
    for &layer in &active {
        vn_edges[layer] = (0..layout.layer_blocks[layer].len())
            .map(|_| Vec::new())
            .collect();
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
        if members.len() > MAX_COLLISION_DEGREE {
            return Err(Error::ComplexityGuard(format!(
                "RE {re} has collision degree {} (cap {MAX_COLLISION_DEGREE})",
                members.len()
            )));
        }
        let mut fn_members = Vec::with_capacity(members.len());
        for u in members {
            let (points, map) = &projections[u.layer][u.slot];
            let g = eff.g(u.layer, re);
            let sig: Vec<Vec<Complex64>> = points
                .iter()
                .map(|&p| g.iter().map(|&h| h * p).collect())
                .collect();
            let edge = edge_count;
            edge_count += 1;
            edge_points.push(points.len());
            fn_members.push(FnMember { edge, sig });
            vn_edges[u.layer][u.block].push(VnEdge {
                edge,
                map: map.clone(),
            });
        }
        fn_nodes.push((re, fn_members));
    }

    // Variable-to-function messages start as the projected priors.
    let mut v2f: Vec<Vec<f64>> = edge_points.iter().map(|&p| vec![0.0; p]).collect();
    let mut f2v: Vec<Vec<f64>> = edge_points.iter().map(|&p| vec![0.0; p]).collect();
    for &layer in &active {
        for (block, edges) in vn_edges[layer].iter().enumerate() {
            let prior = &input.priors[layer][block];
            for e in edges {
                let msg = &mut v2f[e.edge];
                msg.iter_mut().for_each(|v| *v = 0.0);
                for (m, &p) in e.map.iter().enumerate() {
                    msg[p] += prior.probs[m];
                }
            }
        }
    }

    let mut op_count = 0u64;
    let mut logliks: Vec<f64> = Vec::new();
    let mut idx: Vec<usize> = Vec::new();
    let mut residual: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n_rx];

    for _round in 0..inner {
        // --- Function-node update (flooding: reads v2f, writes f2v) ---
        for (re, members) in &fn_nodes {
            let d = members.len();
            let total: usize = members.iter().map(|m| m.sig.len()).product();
            op_count += total as u64;

            // Pass 1: joint log-likelihoods over the member point grid,
            // enumerated in mixed-radix order (last member fastest).
            logliks.clear();
            logliks.reserve(total);
            idx.clear();
            idx.resize(d, 0);
            let y = &grid.y[*re];
            let mut max_ll = f64::NEG_INFINITY;
            loop {
                residual.copy_from_slice(y);
                for (t, member) in members.iter().enumerate() {
                    let sig = &member.sig[idx[t]];
                    for (r, s) in residual.iter_mut().zip(sig.iter()) {
                        *r -= s;
                    }
                }
                let ll = -norm_sqr(&residual) / sigma2;
                if ll > max_ll {
                    max_ll = ll;
                }
                logliks.push(ll);
                // Odometer increment.
                let mut t = d;
                loop {
                    if t == 0 {
                        break;
                    }
                    t -= 1;
                    idx[t] += 1;
                    if idx[t] < members[t].sig.len() {
                        break;
                    }
                    idx[t] = 0;
                }
                if idx.iter().all(|&i| i == 0) {
                    break;
                }
            }

            // Pass 2: marginalize onto each member with leave-one-out
            // products of the incoming messages.
            for member in members.iter() {
                f2v[member.edge].iter_mut().for_each(|v| *v = 0.0);
            }
            idx.iter_mut().for_each(|i| *i = 0);
            let mut fwd = [0.0f64; MAX_COLLISION_DEGREE + 1];
            let mut bwd = [0.0f64; MAX_COLLISION_DEGREE + 1];
            for &ll in &logliks {
                let w = (ll - max_ll).exp();
                fwd[0] = 1.0;
                for t in 0..d {
                    fwd[t + 1] = fwd[t] * v2f[members[t].edge][idx[t]];
                }
                bwd[d] = 1.0;
                for t in (0..d).rev() {
                    bwd[t] = bwd[t + 1] * v2f[members[t].edge][idx[t]];
                }
                for t in 0..d {
                    f2v[members[t].edge][idx[t]] += w * fwd[t] * bwd[t + 1];
                }
                let mut t = d;
                loop {
                    if t == 0 {
                        break;
                    }
                    t -= 1;
                    idx[t] += 1;
                    if idx[t] < members[t].sig.len() {
                        break;
                    }
                    idx[t] = 0;
                }
            }
            for member in members.iter() {
                normalize(&mut f2v[member.edge]);
            }
        }

        // --- Variable-node update (reads f2v, writes v2f) ---
        for &layer in &active {
            let m_size = layout.alphabets[layer].size();
            for (block, edges) in vn_edges[layer].iter().enumerate() {
                let prior = &input.priors[layer][block];
                for (t, e) in edges.iter().enumerate() {
                    let msg = &mut v2f[e.edge];
                    msg.iter_mut().for_each(|v| *v = 0.0);
                    for m in 0..m_size {
                        let mut w = prior.probs[m];
                        for (u, other) in edges.iter().enumerate() {
                            if u != t {
                                w *= f2v[other.edge][other.map[m]];
                            }
                        }
                        msg[e.map[m]] += w;
                    }
                    normalize(msg);
                }
            }
        }
    }

    // Final beliefs: prior times all incoming function messages, in logs.
    let output = assemble_output(
        input,
        |layer, block| {
            let prior: &DiscretePrior = &input.priors[layer][block];
            let edges = &vn_edges[layer][block];
            (0..prior.alphabet.size())
                .map(|m| {
                    let mut lm = prior.probs[m].ln();
                    for e in edges {
                        lm += f2v[e.edge][e.map[m]].ln();
                    }
                    lm
                })
                .collect()
        },
        op_count,
    );
    Ok(output)
}

fn normalize(values: &mut [f64]) {
    let sum: f64 = values.iter().sum();
    if sum > 0.0 {
        values.iter_mut().for_each(|v| *v /= sum);
    } else {
        let u = 1.0 / values.len() as f64;
        values.iter_mut().for_each(|v| *v = u);
    }
}
