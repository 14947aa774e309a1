//! Browser bindings for the NoMA link-level simulator.
//!
//! Three interactive surfaces, kept deliberately small so a single static
//! page can drive them:
//!
//! - [`BlerExplorer`] — an incremental Monte Carlo BLER sweep. The page
//!   calls [`BlerExplorer::step`] in an animation loop; results are
//!   byte-identical to a native run with the same seed.
//! - [`constellation_json`] — per-RE projected constellation points and
//!   footprints of a scheme, for drawing.
//! - [`scheme_summary_json`] — collision structure of a layout (degrees,
//!   projected sizes, grid dimensions).
//!
//! Build with `wasm-pack build --target web crates/nomalink-web` (or
//! cargo + wasm-bindgen-cli); serve `web/index.html` next to the generated
//! `pkg/` directory.

use wasm_bindgen::prelude::*;

use nomalink::detectors::DetectorKind;
use nomalink::harness::{
    aggregate, build_context, run_trial, ExperimentConfig, SweepContext, TrialOutcome,
};
use nomalink::receiver::IcStrategy;
use nomalink::transmitter::{build_scheme, SchemeKind, SchemeParams};

fn err_js(e: nomalink::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Incremental Monte Carlo BLER sweep with per-outer-iteration curves.
#[wasm_bindgen]
pub struct BlerExplorer {
    ctx: SweepContext,
    outcomes: Vec<Vec<TrialOutcome>>,
    cursor_snr: usize,
    cursor_trial: usize,
}

impl BlerExplorer {
    /// Host-side constructor; the wasm constructor wraps this.
    #[allow(clippy::too_many_arguments)]
    pub fn try_new(
        scheme: &str,
        detector: &str,
        ic: &str,
        n_ue: usize,
        outer_iterations: usize,
        snr_start: f64,
        snr_step: f64,
        snr_count: usize,
        n_blocks: usize,
        power_spread_db: f64,
        seed: u64,
    ) -> Result<BlerExplorer, nomalink::Error> {
        let scheme: SchemeKind = scheme.parse()?;
        let detector: DetectorKind = detector.parse()?;
        let ic: IcStrategy = ic.parse()?;
        if snr_count == 0 || n_blocks == 0 {
            return Err(nomalink::Error::Config(
                "need at least one SNR point and one block".into(),
            ));
        }
        let snr_db: Vec<f64> = (0..snr_count)
            .map(|i| snr_start + i as f64 * snr_step)
            .collect();
        let power_offsets_db: Vec<f64> = if power_spread_db == 0.0 || n_ue < 2 {
            Vec::new()
        } else {
            (0..n_ue)
                .map(|u| power_spread_db * (u as f64 / (n_ue - 1) as f64) - power_spread_db / 2.0)
                .collect()
        };
        let cfg = ExperimentConfig {
            scheme,
            detector,
            ic,
            n_ue,
            outer_iterations,
            snr_db,
            power_offsets_db,
            n_blocks,
            // Short code keeps per-trial work at browser frame scale.
            code_n: 256,
            tbs_bits: 96,
            coherence_re: 16,
            master_seed: seed,
            ..ExperimentConfig::default()
        };
        let ctx = build_context(&cfg)?;
        let n_points = ctx.cfg.snr_db.len();
        Ok(BlerExplorer {
            ctx,
            outcomes: (0..n_points).map(|_| Vec::new()).collect(),
            cursor_snr: 0,
            cursor_trial: 0,
        })
    }

    /// Host-side stepping; the wasm method wraps this.
    pub fn try_step(&mut self, trials: usize) -> Result<bool, nomalink::Error> {
        let n_blocks = self.ctx.cfg.n_blocks;
        let n_points = self.ctx.cfg.snr_db.len();
        for _ in 0..trials {
            if self.cursor_snr >= n_points {
                return Ok(true);
            }
            let outcome = run_trial(&self.ctx, self.cursor_snr, self.cursor_trial)?;
            self.outcomes[self.cursor_snr].push(outcome);
            self.cursor_trial += 1;
            if self.cursor_trial >= n_blocks {
                self.cursor_trial = 0;
                self.cursor_snr += 1;
            }
        }
        Ok(self.cursor_snr >= n_points)
    }
}

#[wasm_bindgen]
impl BlerExplorer {
    /// Builds a sweep. `power_spread_db` spaces the UE powers evenly across
    /// the given span (0 = equal power). The demo uses a short code so each
    /// step stays responsive.
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        scheme: &str,
        detector: &str,
        ic: &str,
        n_ue: usize,
        outer_iterations: usize,
        snr_start: f64,
        snr_step: f64,
        snr_count: usize,
        n_blocks: usize,
        power_spread_db: f64,
        seed: u64,
    ) -> Result<BlerExplorer, JsValue> {
        Self::try_new(
            scheme,
            detector,
            ic,
            n_ue,
            outer_iterations,
            snr_start,
            snr_step,
            snr_count,
            n_blocks,
            power_spread_db,
            seed,
        )
        .map_err(err_js)
    }

    /// Runs up to `trials` more trials; returns true when the sweep is done.
    pub fn step(&mut self, trials: usize) -> Result<bool, JsValue> {
        self.try_step(trials).map_err(err_js)
    }

    /// Fraction of the sweep completed, in [0, 1].
    pub fn progress(&self) -> f64 {
        let total = (self.ctx.cfg.n_blocks * self.ctx.cfg.snr_db.len()) as f64;
        let done: usize = self.outcomes.iter().map(|o| o.len()).sum();
        done as f64 / total
    }

    /// Current BLER curves as JSON:
    /// `{"snr_db":[...],"ol_curves":[{"ol":0,"bler":[...]}, ...]}`.
    /// SNR points with no finished trials yet carry null.
    pub fn results_json(&self) -> String {
        let n_ol = self.ctx.cfg.outer_iterations + 1;
        let mut out = String::from("{\"snr_db\":[");
        push_list(&mut out, self.ctx.cfg.snr_db.iter().map(|s| format!("{s}")));
        out.push_str("],\"ol_curves\":[");
        for ol in 0..n_ol {
            if ol > 0 {
                out.push(',');
            }
            out.push_str(&format!("{{\"ol\":{ol},\"bler\":["));
            let values = self.outcomes.iter().enumerate().map(|(snr_idx, outcomes)| {
                if outcomes.is_empty() {
                    "null".to_string()
                } else {
                    let records = aggregate(&self.ctx, snr_idx, outcomes);
                    format!("{}", records[ol].bler)
                }
            });
            push_list(&mut out, values);
            out.push_str("]}");
        }
        out.push_str("]}");
        out
    }
}

fn push_list(out: &mut String, values: impl Iterator<Item = String>) {
    for (i, v) in values.enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&v);
    }
}

/// Footprints and per-RE projected constellations of a built-in scheme, as
/// JSON: one entry per layer with its occupied block offsets and, per
/// occupied slot, the projected complex points.
#[wasm_bindgen]
pub fn constellation_json(scheme: &str, n_ue: usize) -> Result<String, JsValue> {
    constellation_impl(scheme, n_ue).map_err(err_js)
}

fn constellation_impl(scheme: &str, n_ue: usize) -> Result<String, nomalink::Error> {
    let scheme: SchemeKind = scheme.parse()?;
    let params = SchemeParams::default();
    let block = match scheme {
        SchemeKind::Nls => params.spread_len,
        _ => 4,
    };
    let layout = build_scheme(scheme, n_ue, block, &params)?;
    let mut out = String::from("{\"block_size\":");
    out.push_str(&layout.block_size.to_string());
    out.push_str(",\"layers\":[");
    for layer in 0..layout.n_layers {
        if layer > 0 {
            out.push(',');
        }
        let lb = &layout.layer_blocks[layer][0];
        let base = lb.res[0] - lb.res[0] % layout.block_size;
        let offsets: Vec<String> = lb.res.iter().map(|&r| (r - base).to_string()).collect();
        out.push_str(&format!(
            "{{\"layer\":{layer},\"offsets\":[{}],\"slots\":[",
            offsets.join(",")
        ));
        let alphabet = &layout.alphabets[layer];
        for slot in 0..alphabet.width() {
            if slot > 0 {
                out.push(',');
            }
            let (points, _) = alphabet.projection(slot);
            out.push('[');
            let values = points.iter().map(|p| format!("[{},{}]", p.re, p.im));
            push_list(&mut out, values);
            out.push(']');
        }
        out.push_str("]}");
    }
    out.push_str("]}");
    Ok(out)
}

/// Collision structure of a scheme at demo scale, as JSON.
#[wasm_bindgen]
pub fn scheme_summary_json(scheme: &str, n_ue: usize) -> Result<String, JsValue> {
    scheme_summary_impl(scheme, n_ue).map_err(err_js)
}

fn scheme_summary_impl(scheme: &str, n_ue: usize) -> Result<String, nomalink::Error> {
    let scheme: SchemeKind = scheme.parse()?;
    let params = SchemeParams::default();
    let block = match scheme {
        SchemeKind::Nls => params.spread_len,
        _ => 4,
    };
    let layout = build_scheme(scheme, n_ue, block, &params)?;
    let degrees: Vec<String> = (0..layout.n_re)
        .map(|re| layout.collision_degree(re).to_string())
        .collect();
    Ok(format!(
        "{{\"scheme\":\"{}\",\"n_ue\":{},\"block_size\":{},\"collision_degree\":[{}],\"max_projected_size\":{},\"bits_per_block\":{}}}",
        scheme,
        layout.n_layers,
        layout.block_size,
        degrees.join(","),
        layout.max_projected_size(),
        layout.alphabets[0].bits
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explorer_runs_and_reports() {
        let mut explorer =
            BlerExplorer::try_new("scma", "epa", "hybrid_pic", 4, 1, -3.0, 1.0, 2, 5, 0.0, 3)
                .unwrap();
        assert_eq!(explorer.progress(), 0.0);
        let mut done = false;
        for _ in 0..20 {
            done = explorer.try_step(1).unwrap();
            if done {
                break;
            }
        }
        assert!(done);
        assert!((explorer.progress() - 1.0).abs() < 1e-12);
        let json = explorer.results_json();
        assert!(json.contains("\"snr_db\":[-3,-2]"));
        assert!(json.contains("\"ol\":1"));
        assert!(!json.contains("null"));
    }

    #[test]
    fn explorer_matches_native_seeding() {
        // Two explorers with the same seed agree trial for trial.
        let mut a = BlerExplorer::try_new(
            "scma",
            "mmse_chip",
            "soft_pic",
            3,
            1,
            -2.0,
            1.0,
            1,
            4,
            0.0,
            11,
        )
        .unwrap();
        let mut b = BlerExplorer::try_new(
            "scma",
            "mmse_chip",
            "soft_pic",
            3,
            1,
            -2.0,
            1.0,
            1,
            4,
            0.0,
            11,
        )
        .unwrap();
        while !a.try_step(1).unwrap() {}
        while !b.try_step(2).unwrap() {}
        assert_eq!(a.results_json(), b.results_json());
    }

    #[test]
    fn constellation_json_is_well_formed() {
        let json = constellation_impl("scma", 6).unwrap();
        assert!(json.contains("\"layers\""));
        assert!(json.contains("\"offsets\":[0,1]"));
        let json = constellation_impl("cb_ofdma", 2).unwrap();
        assert!(json.contains("\"block_size\":1"));
    }

    #[test]
    fn summary_reports_collision_degrees() {
        let json = scheme_summary_impl("scma", 6).unwrap();
        assert!(json.contains("\"collision_degree\":[3,3,3,3]"));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(
            BlerExplorer::try_new("bogus", "epa", "hybrid_pic", 4, 1, 0.0, 1.0, 1, 1, 0.0, 1)
                .is_err()
        );
        assert!(constellation_impl("cb_ofdma", 0).is_err());
    }
}
