//! Monte Carlo experiment harness: configuration, seeding, sweeps, CSV
//! output, and the self-test suite.
//!
//! An [`ExperimentConfig`] names one (scheme, detector, IC) combination and
//! its sweep axes. Config files are flat `key = value` text; the keys
//! `scheme`, `detector`, and `ic` accept comma-separated lists that expand
//! into the cartesian product of combinations.
//!
//! Every trial derives its RNG from `(master_seed, snr_index, trial_index)`,
//! so records are independent of execution order and thread count, and a
//! fixed seed reproduces a sweep byte for byte. One receiver run at the
//! configured maximum outer-iteration count scores every smaller OL value
//! as well (the trajectory up to pass `t` never depends on the maximum).

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::channel::{apply_channel, generate_channel, ReceivedGrid};
use crate::coding::CodeConfig;
use crate::detectors::DetectorKind;
use crate::error::{Error, Result};
use crate::receiver::{run_receiver, IcStrategy, OuterLoopConfig};
use crate::rng::SimRng;
use crate::transmitter::{build_scheme, load_codebook, SchemeKind, SchemeLayout, SchemeParams};

pub mod selftest;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// One experiment: a single (scheme, detector, IC) combination with its
/// sweep axes and component parameters.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scheme: SchemeKind,
    pub mod_order: usize,
    pub spread_len: usize,
    /// Optional codebook/signature file replacing the built-in construction.
    pub codebook: Option<String>,
    pub n_ue: usize,
    pub n_rx: usize,
    /// Transport block size (payload bits before CRC).
    pub tbs_bits: usize,
    /// LDPC code length in coded bits.
    pub code_n: usize,
    pub bp_iterations: usize,
    pub detector: DetectorKind,
    pub ic: IcStrategy,
    /// 0 selects the detector's default.
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub snr_db: Vec<f64>,
    /// Per-UE dB offsets on top of each sweep point (empty = equal power).
    pub power_offsets_db: Vec<f64>,
    pub n_blocks: usize,
    pub coherence_re: usize,
    /// 0 derives the grid size from the code length and scheme.
    pub n_re: usize,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeKind::CbOfdma,
            mod_order: 4,
            spread_len: 4,
            codebook: None,
            n_ue: 6,
            n_rx: 2,
            tbs_bits: 224,
            code_n: 512,
            bp_iterations: 25,
            detector: DetectorKind::Epa,
            ic: IcStrategy::HybridPic,
            inner_iterations: 0,
            outer_iterations: 3,
            snr_db: vec![0.0, 2.0, 4.0, 6.0, 8.0],
            power_offsets_db: Vec::new(),
            n_blocks: 200,
            coherence_re: 16,
            n_re: 0,
            master_seed: 1,
        }
    }
}

impl ExperimentConfig {
    /// Inner iterations after default substitution.
    pub fn effective_inner(&self) -> usize {
        if self.inner_iterations == 0 {
            self.detector.default_inner_iterations()
        } else {
            self.inner_iterations
        }
    }

    /// Renders the flat key = value form of this config.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scheme = {}\n", self.scheme));
        out.push_str(&format!("mod_order = {}\n", self.mod_order));
        out.push_str(&format!("spread_len = {}\n", self.spread_len));
        if let Some(path) = &self.codebook {
            out.push_str(&format!("codebook = {path}\n"));
        }
        out.push_str(&format!("n_ue = {}\n", self.n_ue));
        out.push_str(&format!("n_rx = {}\n", self.n_rx));
        out.push_str(&format!("tbs_bits = {}\n", self.tbs_bits));
        out.push_str(&format!("code_n = {}\n", self.code_n));
        out.push_str(&format!("bp_iterations = {}\n", self.bp_iterations));
        out.push_str(&format!("detector = {}\n", self.detector));
        out.push_str(&format!("ic = {}\n", self.ic));
        out.push_str(&format!("inner_iterations = {}\n", self.inner_iterations));
        out.push_str(&format!("outer_iterations = {}\n", self.outer_iterations));
        let snrs: Vec<String> = self.snr_db.iter().map(|s| format_sig6(*s)).collect();
        out.push_str(&format!("snr_db = {}\n", snrs.join(",")));
        if !self.power_offsets_db.is_empty() {
            let offs: Vec<String> = self
                .power_offsets_db
                .iter()
                .map(|s| format_sig6(*s))
                .collect();
            out.push_str(&format!("power_offsets_db = {}\n", offs.join(",")));
        }
        out.push_str(&format!("n_blocks = {}\n", self.n_blocks));
        out.push_str(&format!("coherence_re = {}\n", self.coherence_re));
        out.push_str(&format!("seed = {}\n", self.master_seed));
        out
    }
}

/// Parses flat `key = value` config text into the expanded combination list
/// (cartesian product over the `scheme`, `detector`, and `ic` lists).
pub fn parse_config_text(text: &str) -> Result<Vec<ExperimentConfig>> {
    let mut keys: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse(format!(
                "line {}: expected `key = value`, got {raw:?}",
                lineno + 1
            )));
        };
        keys.insert(key.trim().to_string(), value.trim().to_string());
    }

    let base = ExperimentConfig::default();
    let get_usize = |keys: &BTreeMap<String, String>, k: &str, d: usize| -> Result<usize> {
        match keys.get(k) {
            None => Ok(d),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Parse(format!("bad integer for {k}: {v:?}"))),
        }
    };
    let get_u64 = |k: &str, d: u64| -> Result<u64> {
        match keys.get(k) {
            None => Ok(d),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Parse(format!("bad integer for {k}: {v:?}"))),
        }
    };
    let get_f64_list = |k: &str, d: &[f64]| -> Result<Vec<f64>> {
        match keys.get(k) {
            None => Ok(d.to_vec()),
            Some(v) => v
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number in {k}: {t:?}")))
                })
                .collect(),
        }
    };

    let schemes: Vec<SchemeKind> = match keys.get("scheme") {
        None => vec![base.scheme],
        Some(v) => v
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<Result<_>>()?,
    };
    let detectors: Vec<DetectorKind> = match keys.get("detector") {
        None => vec![base.detector],
        Some(v) => v
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<Result<_>>()?,
    };
    let ics: Vec<IcStrategy> = match keys.get("ic") {
        None => vec![base.ic],
        Some(v) => v
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<Result<_>>()?,
    };

    let known = [
        "scheme",
        "mod_order",
        "spread_len",
        "codebook",
        "n_ue",
        "n_rx",
        "tbs_bits",
        "code_n",
        "bp_iterations",
        "detector",
        "ic",
        "inner_iterations",
        "outer_iterations",
        "snr_db",
        "power_offsets_db",
        "n_blocks",
        "coherence_re",
        "n_re",
        "seed",
    ];
    for key in keys.keys() {
        if !known.contains(&key.as_str()) {
            return Err(Error::Parse(format!("unknown config key {key:?}")));
        }
    }

    let template = ExperimentConfig {
        scheme: base.scheme,
        mod_order: get_usize(&keys, "mod_order", base.mod_order)?,
        spread_len: get_usize(&keys, "spread_len", base.spread_len)?,
        codebook: keys.get("codebook").cloned(),
        n_ue: get_usize(&keys, "n_ue", base.n_ue)?,
        n_rx: get_usize(&keys, "n_rx", base.n_rx)?,
        tbs_bits: get_usize(&keys, "tbs_bits", base.tbs_bits)?,
        code_n: get_usize(&keys, "code_n", base.code_n)?,
        bp_iterations: get_usize(&keys, "bp_iterations", base.bp_iterations)?,
        detector: base.detector,
        ic: base.ic,
        inner_iterations: get_usize(&keys, "inner_iterations", base.inner_iterations)?,
        outer_iterations: get_usize(&keys, "outer_iterations", base.outer_iterations)?,
        snr_db: get_f64_list("snr_db", &base.snr_db)?,
        power_offsets_db: get_f64_list("power_offsets_db", &[])?,
        n_blocks: get_usize(&keys, "n_blocks", base.n_blocks)?,
        coherence_re: get_usize(&keys, "coherence_re", base.coherence_re)?,
        n_re: get_usize(&keys, "n_re", 0)?,
        master_seed: get_u64("seed", base.master_seed)?,
    };

    let mut out = Vec::new();
    for &scheme in &schemes {
        for &detector in &detectors {
            for &ic in &ics {
                let mut cfg = template.clone();
                cfg.scheme = scheme;
                cfg.detector = detector;
                cfg.ic = ic;
                out.push(cfg);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Sweep execution
// ---------------------------------------------------------------------------

/// Prebuilt components for one experiment.
pub struct SweepContext {
    pub cfg: ExperimentConfig,
    pub layout: SchemeLayout,
    pub code: CodeConfig,
    pub loop_cfg: OuterLoopConfig,
}

/// Builds the layout and code for a config, deriving the grid size so each
/// UE's codeword exactly fills its resource blocks.
pub fn build_context(cfg: &ExperimentConfig) -> Result<SweepContext> {
    if cfg.n_blocks < 1 {
        return Err(Error::Config("n_blocks must be at least 1".into()));
    }
    if cfg.snr_db.is_empty() {
        return Err(Error::Config("snr_db list must be nonempty".into()));
    }
    if !cfg.power_offsets_db.is_empty() && cfg.power_offsets_db.len() != cfg.n_ue {
        return Err(Error::Config(format!(
            "power_offsets_db needs {} entries, got {}",
            cfg.n_ue,
            cfg.power_offsets_db.len()
        )));
    }

    let code = CodeConfig::regular(cfg.code_n, cfg.tbs_bits, cfg.bp_iterations)?;

    let layout = if let Some(path) = &cfg.codebook {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.clone(), e))?;
        let (bits, block_size) = peek_codebook_shape(&text)?;
        let n_re = derived_n_re(cfg.code_n, bits, block_size)?;
        let loaded = load_codebook(&text, n_re)?;
        if loaded.n_layers < cfg.n_ue {
            return Err(Error::Config(format!(
                "codebook provides {} layers, config asks for {}",
                loaded.n_layers, cfg.n_ue
            )));
        }
        if loaded.n_layers > cfg.n_ue {
            return Err(Error::Config(format!(
                "codebook provides {} layers; set n_ue to match",
                loaded.n_layers
            )));
        }
        loaded
    } else {
        let params = SchemeParams {
            mod_order: cfg.mod_order,
            spread_len: cfg.spread_len,
        };
        // Probe with a minimal grid to learn bits per block, then derive.
        let bits = (cfg.mod_order as f64).log2() as usize;
        let block_size = match cfg.scheme {
            SchemeKind::CbOfdma => 1,
            SchemeKind::Nls => cfg.spread_len,
            SchemeKind::Scma => 4,
            SchemeKind::Custom => {
                return Err(Error::Config(
                    "custom scheme requires a codebook file".into(),
                ))
            }
        };
        let n_re = derived_n_re(cfg.code_n, bits, block_size)?;
        if cfg.n_re != 0 && cfg.n_re != n_re {
            return Err(Error::Config(format!(
                "n_re {} is inconsistent; {} coded bits on this scheme require n_re = {n_re}",
                cfg.n_re, cfg.code_n
            )));
        }
        build_scheme(cfg.scheme, cfg.n_ue, n_re, &params)?
    };

    for layer in 0..layout.n_layers {
        if layout.bits_per_layer(layer) != cfg.code_n {
            return Err(Error::Config(format!(
                "layer {layer} carries {} bits per grid, code has {}",
                layout.bits_per_layer(layer),
                cfg.code_n
            )));
        }
    }
    if layout.n_re % cfg.coherence_re != 0 {
        return Err(Error::Config(format!(
            "coherence_re {} does not divide the derived grid size {}",
            cfg.coherence_re, layout.n_re
        )));
    }

    let loop_cfg = OuterLoopConfig {
        strategy: cfg.ic,
        max_outer_iterations: cfg.outer_iterations,
        detector: cfg.detector,
        inner_iterations: cfg.effective_inner(),
    };
    let mut cfg = cfg.clone();
    if cfg.codebook.is_some() {
        // Records report what actually ran.
        cfg.scheme = SchemeKind::Custom;
    }
    Ok(SweepContext {
        cfg,
        layout,
        code,
        loop_cfg,
    })
}

fn derived_n_re(code_n: usize, bits_per_block: usize, block_size: usize) -> Result<usize> {
    if bits_per_block == 0 || code_n % bits_per_block != 0 {
        return Err(Error::Config(format!(
            "code length {code_n} is not a multiple of {bits_per_block} bits per block"
        )));
    }
    Ok(code_n / bits_per_block * block_size)
}

fn peek_codebook_shape(text: &str) -> Result<(usize, usize)> {
    let header = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.trim().starts_with('#'))
        .ok_or_else(|| Error::Parse("empty codebook file".into()))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .take(2)
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Parse(format!("bad codebook header token {t:?}")))
        })
        .collect::<Result<_>>()?;
    if head.len() != 2 || !head[0].is_power_of_two() || head[0] < 2 {
        return Err(Error::Parse("codebook header must start with `M L`".into()));
    }
    Ok((head[0].trailing_zeros() as usize, head[1]))
}

/// Result of one transmission trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    /// Per UE: outer iteration of the CRC pass and whether the payload was
    /// actually correct (a false CRC pass scores as a block error).
    pub decode: Vec<Option<(usize, bool)>>,
    /// Cumulative detector op count after each executed pass.
    pub op_per_ol: Vec<u64>,
    pub passes_run: usize,
}

/// Runs one trial; the RNG stream is fully determined by
/// `(master_seed, snr_index, trial_index)`.
pub fn run_trial(ctx: &SweepContext, snr_idx: usize, trial: usize) -> Result<TrialOutcome> {
    let cfg = &ctx.cfg;
    let mut rng = SimRng::from_path(cfg.master_seed, &[snr_idx as u64, trial as u64]);

    let mut payloads = Vec::with_capacity(cfg.n_ue);
    let mut rows = Vec::with_capacity(cfg.n_ue);
    for ue in 0..cfg.n_ue {
        let payload: Vec<u8> = (0..ctx.code.payload_bits).map(|_| rng.next_bit()).collect();
        let codeword = ctx.code.encode_transport(&payload)?;
        rows.push(ctx.layout.map_bits(ue, &codeword)?);
        payloads.push(payload);
    }
    let channel = generate_channel(
        cfg.n_ue,
        ctx.layout.n_re,
        cfg.n_rx,
        cfg.coherence_re,
        &mut rng,
    )?;
    let base_snr = cfg.snr_db[snr_idx];
    let snrs: Vec<f64> = (0..cfg.n_ue)
        .map(|u| base_snr + cfg.power_offsets_db.get(u).copied().unwrap_or(0.0))
        .collect();
    let grid: ReceivedGrid = apply_channel(&rows, channel, &snrs, 1.0, &mut rng)?;

    let report = run_receiver(&grid, &ctx.layout, &ctx.loop_cfg, &ctx.code)?;
    let decode = report
        .users
        .iter()
        .zip(payloads.iter())
        .map(|(state, tx)| state.decode_ol.map(|ol| (ol, state.decoded_payload == *tx)))
        .collect();
    Ok(TrialOutcome {
        decode,
        op_per_ol: report.op_count_per_ol,
        passes_run: report.passes_run,
    })
}

/// One CSV row: BLER of one (scheme, detector, ic, ol, snr) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BlerRecord {
    pub scheme: SchemeKind,
    pub detector: DetectorKind,
    pub ic: IcStrategy,
    pub ol: usize,
    pub snr_db: f64,
    pub n_blocks: usize,
    pub block_errors: usize,
    pub bler: f64,
    pub mean_ol_used: f64,
    pub op_count_mean: f64,
    pub wall_seed: u64,
}

/// Aggregates one SNR point's trials into one record per OL value.
pub fn aggregate(ctx: &SweepContext, snr_idx: usize, outcomes: &[TrialOutcome]) -> Vec<BlerRecord> {
    let cfg = &ctx.cfg;
    let n_ue = cfg.n_ue;
    let n_blocks = outcomes.len();
    (0..=cfg.outer_iterations)
        .map(|ol| {
            let mut errors = 0usize;
            let mut ol_used_sum = 0.0;
            let mut op_sum = 0.0;
            for outcome in outcomes {
                for ue in 0..n_ue {
                    let ok = matches!(outcome.decode[ue], Some((t, true)) if t <= ol);
                    if !ok {
                        errors += 1;
                    }
                }
                ol_used_sum += (outcome.passes_run - 1).min(ol) as f64;
                let idx = ol.min(outcome.op_per_ol.len() - 1);
                op_sum += outcome.op_per_ol[idx] as f64;
            }
            let denom = (n_blocks * n_ue) as f64;
            BlerRecord {
                scheme: cfg.scheme,
                detector: cfg.detector,
                ic: cfg.ic,
                ol,
                snr_db: cfg.snr_db[snr_idx],
                n_blocks,
                block_errors: errors,
                bler: errors as f64 / denom,
                mean_ol_used: ol_used_sum / n_blocks as f64,
                op_count_mean: op_sum / n_blocks as f64,
                wall_seed: cfg.master_seed,
            }
        })
        .collect()
}

/// Runs a full sweep over the config's SNR list, `threads` workers.
pub fn run_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<BlerRecord>> {
    let ctx = build_context(cfg)?;
    let mut records = Vec::new();
    for snr_idx in 0..cfg.snr_db.len() {
        let outcomes = run_point(&ctx, snr_idx, threads)?;
        records.extend(aggregate(&ctx, snr_idx, &outcomes));
    }
    Ok(records)
}

/// Runs all trials of one SNR point, in parallel when `threads > 1`.
/// Per-trial seeding makes the result identical for any thread count.
pub fn run_point(ctx: &SweepContext, snr_idx: usize, threads: usize) -> Result<Vec<TrialOutcome>> {
    let n = ctx.cfg.n_blocks;
    let threads = threads.max(1).min(n);
    if threads == 1 {
        return (0..n).map(|t| run_trial(ctx, snr_idx, t)).collect();
    }
    let slots: Mutex<Vec<Option<Result<TrialOutcome>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let counter = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let t = counter.fetch_add(1, Ordering::Relaxed);
                if t >= n {
                    break;
                }
                let outcome = run_trial(ctx, snr_idx, t);
                slots.lock().unwrap()[t] = Some(outcome);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("every trial filled"))
        .collect()
}

/// Runs several configs and concatenates their records.
pub fn run_configs(cfgs: &[ExperimentConfig], threads: usize) -> Result<Vec<BlerRecord>> {
    let mut records = Vec::new();
    for cfg in cfgs {
        records.extend(run_sweep(cfg, threads)?);
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// Standard header comment describing the SNR axis.
pub const CSV_SNR_NOTE: &str = "# snr_db is per-UE per-antenna received Es/N0 on occupied REs";

/// Renders records as CSV text with deterministic row order
/// (scheme, detector, ic, ol, snr).
pub fn to_csv_string(records: &[BlerRecord], extra_comments: &[String]) -> String {
    let mut sorted: Vec<&BlerRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (
            a.scheme.to_string(),
            a.detector.to_string(),
            a.ic.to_string(),
            a.ol,
        )
            .cmp(&(
                b.scheme.to_string(),
                b.detector.to_string(),
                b.ic.to_string(),
                b.ol,
            ))
            .then(a.snr_db.partial_cmp(&b.snr_db).unwrap())
    });
    let mut out = String::new();
    out.push_str(CSV_SNR_NOTE);
    out.push('\n');
    for comment in extra_comments {
        out.push_str("# ");
        out.push_str(comment);
        out.push('\n');
    }
    out.push_str(
        "scheme,detector,ic,ol,snr_db,n_blocks,block_errors,bler,mean_ol_used,op_count_mean,wall_seed\n",
    );
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.scheme,
            r.detector,
            r.ic,
            r.ol,
            format_sig6(r.snr_db),
            r.n_blocks,
            r.block_errors,
            format_sig6(r.bler),
            format_sig6(r.mean_ol_used),
            format_sig6(r.op_count_mean),
            r.wall_seed
        ));
    }
    out
}

/// Writes records to a file, carrying the path in any I/O error.
pub fn emit_csv(records: &[BlerRecord], path: &str, extra_comments: &[String]) -> Result<()> {
    let text = to_csv_string(records, extra_comments);
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses CSV text written by [`to_csv_string`].
pub fn parse_csv(text: &str) -> Result<Vec<BlerRecord>> {
    let mut records = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("scheme,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::Parse(format!(
                "expected 11 CSV fields, got {}: {line:?}",
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad float {s:?}")))
        };
        let parse_u = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad integer {s:?}")))
        };
        records.push(BlerRecord {
            scheme: fields[0].parse()?,
            detector: fields[1].parse()?,
            ic: fields[2].parse()?,
            ol: parse_u(fields[3])?,
            snr_db: parse_f(fields[4])?,
            n_blocks: parse_u(fields[5])?,
            block_errors: parse_u(fields[6])?,
            bler: parse_f(fields[7])?,
            mean_ol_used: parse_f(fields[8])?,
            op_count_mean: parse_f(fields[9])?,
            wall_seed: fields[10]
                .parse()
                .map_err(|_| Error::Parse(format!("bad seed {:?}", fields[10])))?,
        });
    }
    Ok(records)
}

/// Formats a float with 6 significant digits (printf `%.6g` style).
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let text = if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        let s = format!("{x:.5e}");
        // Trim trailing mantissa zeros: 1.50000e-7 -> 1.5e-7.
        if let Some((mantissa, exponent)) = s.split_once('e') {
            let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
            return format!("{mantissa}e{exponent}");
        }
        s
    };
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    }
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(errors: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Checks that a (snr, errors, trials) curve is non-increasing in SNR up to
/// 95% Wilson-interval overlap: a rise only counts as a violation when the
/// intervals of the two points do not overlap.
pub fn bler_monotone_within_ci(points: &[(f64, usize, usize)]) -> bool {
    let mut sorted: Vec<_> = points.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for pair in sorted.windows(2) {
        let (_, e0, n0) = pair[0];
        let (_, e1, n1) = pair[1];
        let p0 = e0 as f64 / n0 as f64;
        let p1 = e1 as f64 / n1 as f64;
        if p1 > p0 {
            let (lo1, _) = wilson_interval(e1, n1, 1.96);
            let (_, hi0) = wilson_interval(e0, n0, 1.96);
            if lo1 > hi0 {
                return false;
            }
        }
    }
    true
}

/// Linearly interpolates the SNR at which a BLER curve crosses `target`.
///
/// `points` are (snr_db, bler) pairs sorted by SNR; interpolation runs in
/// log-BLER. Returns `None` when the curve never crosses the target.
pub fn snr_at_bler(points: &[(f64, f64)], target: f64) -> Option<f64> {
    for window in points.windows(2) {
        let (s0, b0) = window[0];
        let (s1, b1) = window[1];
        if (b0 >= target && b1 <= target) || (b0 <= target && b1 >= target) {
            if b0 == b1 {
                return Some(s0);
            }
            let (l0, l1, lt) = (b0.max(1e-12).ln(), b1.max(1e-12).ln(), target.ln());
            let f = (lt - l0) / (l1 - l0);
            return Some(s0 + f * (s1 - s0));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// A named desk-scale experiment family.
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Flat config text, parseable by [`parse_config_text`].
    pub config_text: String,
}

/// Desk-scale presets following the standard evaluation axes: outer-loop
/// convergence, IC comparison, detector comparison, and scheme comparison.
///
/// The CB-OFDMA presets use a documented near-far power ladder: at rate 1/2
/// with two receive antennas, six fully overlapping equal-power UEs are
/// interference-limited at any SNR, while a 10 dB power spread lets the
/// cancellation cascade ignite (the effect SINR-ordered SIC exploits).
pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            name: "fig3_cbofdma_6ue",
            description: "outer-loop convergence, CB-OFDMA 6 UEs (power ladder), MMSE + hybrid PIC",
            config_text: "\
scheme = cb_ofdma
n_ue = 6
detector = mmse_chip
ic = hybrid_pic
outer_iterations = 3
power_offsets_db = -5,-3,-1,1,3,5
snr_db = 6,8,10,12,14
n_blocks = 2000
seed = 1
"
            .to_string(),
        },
        Preset {
            name: "fig4_ic_comparison",
            description:
                "IC strategies compared, CB-OFDMA 6 UEs (power ladder), MMSE detector, OL 3",
            config_text: "\
scheme = cb_ofdma
n_ue = 6
detector = mmse_chip
ic = hard_sic,enhanced_sic,soft_pic,hybrid_pic
outer_iterations = 3
power_offsets_db = -5,-3,-1,1,3,5
snr_db = 6,8,10,12,14
n_blocks = 2000
seed = 1
"
            .to_string(),
        },
        Preset {
            name: "fig5_detector_comparison",
            description:
                "detectors compared under hybrid PIC, SCMA 6 UEs, MPA as near-ML reference",
            config_text: "\
scheme = scma
n_ue = 6
detector = ese,mmse_chip,epa,mpa
ic = hybrid_pic
outer_iterations = 3
snr_db = -4.5,-4,-3.5,-3,-2.5,-2,-1.5
n_blocks = 2000
seed = 1
"
            .to_string(),
        },
        Preset {
            name: "fig5_mpa_reference",
            description: "near-ML MPA on full-overlap CB-OFDMA at reduced load (4 UEs)",
            config_text: "\
scheme = cb_ofdma
n_ue = 4
detector = epa,mpa
ic = hybrid_pic
outer_iterations = 3
snr_db = 2,3,4,5,6
n_blocks = 500
seed = 1
"
            .to_string(),
        },
        Preset {
            name: "fig6_scheme_comparison",
            description: "schemes compared at equal power, 6 UEs, EPA + hybrid PIC, OL 3",
            config_text: "\
scheme = cb_ofdma,nls,scma
n_ue = 6
detector = epa
ic = hybrid_pic
outer_iterations = 3
snr_db = -4.5,-4,-3.5,-3,-2.5,-2,-1,0,1,2
n_blocks = 2000
seed = 1
"
            .to_string(),
        },
    ]
}

/// Caveat lines attached to preset CSV output.
pub fn preset_csv_comments(name: &str) -> Vec<String> {
    let mut comments = vec![format!("preset: {name}")];
    if name == "fig6_scheme_comparison" {
        comments.push(
            "scheme comparison uses the built-in M=4 SCMA codebook and seeded NLS signatures; \
             absolute gaps depend on the codebook choice"
                .to_string(),
        );
        comments.push("scma runs at its 6-layer capacity".to_string());
    }
    comments
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let cfg = ExperimentConfig::default();
        let parsed = parse_config_text(&cfg.to_config_text()).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].n_ue, cfg.n_ue);
        assert_eq!(parsed[0].snr_db, cfg.snr_db);
        assert_eq!(parsed[0].master_seed, cfg.master_seed);
    }

    #[test]
    fn multi_value_keys_expand() {
        let text = "detector = epa,mpa\nic = soft_pic,hybrid_pic\nscheme = scma\n";
        let parsed = parse_config_text(text).unwrap();
        assert_eq!(parsed.len(), 4);
        assert!(parsed.iter().all(|c| c.scheme == SchemeKind::Scma));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config_text("bogus = 1\n").is_err());
    }

    #[test]
    fn derived_grid_sizes() {
        // 512 coded bits: QPSK per RE needs 256 REs; 2 bits per 4-RE block
        // needs 1024.
        assert_eq!(derived_n_re(512, 2, 1).unwrap(), 256);
        assert_eq!(derived_n_re(512, 2, 4).unwrap(), 1024);
        assert!(derived_n_re(511, 2, 1).is_err());
    }

    #[test]
    fn format_sig6_cases() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(0.25), "0.25");
        assert_eq!(format_sig6(1.0 / 3.0), "0.333333");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(1234567.0), "1.23457e6");
        assert_eq!(format_sig6(0.00015), "0.00015");
        assert_eq!(format_sig6(1.5e-7), "1.5e-7");
        assert_eq!(format_sig6(-2.5), "-2.5");
    }

    #[test]
    fn csv_round_trip_reproduces_records() {
        let record = BlerRecord {
            scheme: SchemeKind::Scma,
            detector: DetectorKind::Epa,
            ic: IcStrategy::HybridPic,
            ol: 2,
            snr_db: 4.5,
            n_blocks: 100,
            block_errors: 37,
            bler: 37.0 / 600.0,
            mean_ol_used: 1.25,
            op_count_mean: 123456.0,
            wall_seed: 42,
        };
        let text = to_csv_string(&[record.clone()], &["note".into()]);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.len(), 1);
        let p = &parsed[0];
        assert_eq!(p.scheme, record.scheme);
        assert_eq!(p.detector, record.detector);
        assert_eq!(p.ic, record.ic);
        assert_eq!(p.ol, record.ol);
        assert_eq!(p.n_blocks, record.n_blocks);
        assert_eq!(p.block_errors, record.block_errors);
        assert!((p.bler - record.bler).abs() / record.bler < 1e-5);
        assert_eq!(p.wall_seed, record.wall_seed);
    }

    #[test]
    fn empty_record_list_is_header_only() {
        let text = to_csv_string(&[], &[]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with('#'));
        assert!(lines[1].starts_with("scheme,"));
    }

    #[test]
    fn monotonicity_check_tolerates_noise_but_not_trends() {
        // A small wiggle inside the confidence band passes.
        assert!(bler_monotone_within_ci(&[
            (0.0, 500, 1000),
            (2.0, 320, 1000),
            (4.0, 335, 1000),
            (6.0, 150, 1000),
        ]));
        // A clear rise fails.
        assert!(!bler_monotone_within_ci(&[
            (0.0, 100, 1000),
            (2.0, 400, 1000),
        ]));
    }

    #[test]
    fn wilson_interval_basics() {
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi < 0.05);
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(hi - lo < 0.2);
    }

    #[test]
    fn snr_interpolation_in_log_domain() {
        let points = [(0.0, 0.5), (2.0, 0.05)];
        let snr = snr_at_bler(&points, 0.1).unwrap();
        // log-linear: crossing at ln(0.5)->ln(0.05) spans 2 dB.
        let expect = 2.0 * (0.5f64.ln() - 0.1f64.ln()) / (0.5f64.ln() - 0.05f64.ln());
        assert!((snr - expect).abs() < 1e-9);
        assert!(snr_at_bler(&[(0.0, 0.5), (2.0, 0.3)], 0.1).is_none());
    }

    #[test]
    fn presets_include_the_standard_names() {
        let names: Vec<&str> = presets().iter().map(|p| p.name).collect();
        for required in [
            "fig3_cbofdma_6ue",
            "fig4_ic_comparison",
            "fig5_detector_comparison",
            "fig6_scheme_comparison",
        ] {
            assert!(names.contains(&required), "missing preset {required}");
        }
        for preset in presets() {
            assert!(
                parse_config_text(&preset.config_text).is_ok(),
                "{}",
                preset.name
            );
        }
    }

    #[test]
    fn tiny_sweep_is_deterministic_and_thread_invariant() {
        let cfg = ExperimentConfig {
            n_ue: 2,
            code_n: 128,
            tbs_bits: 32,
            snr_db: vec![2.0, 8.0],
            n_blocks: 8,
            outer_iterations: 1,
            detector: DetectorKind::MmseChip,
            coherence_re: 8,
            ..ExperimentConfig::default()
        };
        let a = run_sweep(&cfg, 1).unwrap();
        let b = run_sweep(&cfg, 1).unwrap();
        let c = run_sweep(&cfg, 4).unwrap();
        let text_a = to_csv_string(&a, &[]);
        assert_eq!(text_a, to_csv_string(&b, &[]));
        assert_eq!(text_a, to_csv_string(&c, &[]));
    }

    #[test]
    fn high_snr_single_ue_has_zero_bler() {
        let cfg = ExperimentConfig {
            n_ue: 1,
            code_n: 128,
            tbs_bits: 32,
            snr_db: vec![60.0],
            n_blocks: 100,
            outer_iterations: 0,
            detector: DetectorKind::MmseChip,
            coherence_re: 8,
            ..ExperimentConfig::default()
        };
        let records = run_sweep(&cfg, 2).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].block_errors, 0);
    }

    #[test]
    fn deep_noise_has_full_bler() {
        let cfg = ExperimentConfig {
            n_ue: 2,
            code_n: 128,
            tbs_bits: 32,
            snr_db: vec![-20.0],
            n_blocks: 50,
            outer_iterations: 1,
            detector: DetectorKind::MmseChip,
            coherence_re: 8,
            ..ExperimentConfig::default()
        };
        let records = run_sweep(&cfg, 2).unwrap();
        for r in &records {
            assert!((r.bler - 1.0).abs() < 1e-12, "bler = {}", r.bler);
        }
    }
}
