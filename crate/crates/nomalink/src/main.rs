//! Command-line front end: sweep runner, presets, self-test, and codebook
//! file tooling.

use std::process::ExitCode;

use nomalink::error::Error;
use nomalink::harness::{emit_csv, parse_config_text, preset_csv_comments, presets, run_configs};
use nomalink::transmitter::{build_scheme, dump_codebook, load_codebook, SchemeParams};

const USAGE: &str = "\
nomalink - link-level simulator for uplink non-orthogonal multiple access

USAGE:
    nomalink run (--config <file> | --preset <name>) --out <csv>
                 [--seed N] [--blocks N] [--threads N]
    nomalink presets [--show <name>]
    nomalink selftest
    nomalink codebook --dump <file> --scheme <scma|nls> [--layers N]
    nomalink codebook --load <file>
    nomalink alist --dump <file> [--code-n N]
    nomalink alist --load <file>

Exit codes: 0 success, 1 configuration error, 2 I/O error.
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => ExitCode::from(0),
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Io { .. } => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn dispatch(args: &[String]) -> Result<(), Error> {
    match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("presets") => cmd_presets(&args[1..]),
        Some("selftest") => cmd_selftest(),
        Some("codebook") => cmd_codebook(&args[1..]),
        Some("alist") => cmd_alist(&args[1..]),
        Some("--help") | Some("-h") | Some("help") => {
            print!("{USAGE}");
            Ok(())
        }
        Some(other) => {
            eprint!("{USAGE}");
            Err(Error::Config(format!("unknown subcommand {other:?}")))
        }
        None => {
            eprint!("{USAGE}");
            Err(Error::Config("missing subcommand".into()))
        }
    }
}

struct Flags {
    values: Vec<(String, String)>,
}

impl Flags {
    /// Parses `--key value` pairs, rejecting anything not in `allowed`.
    fn parse(args: &[String], allowed: &[&str]) -> Result<Self, Error> {
        let mut values = Vec::new();
        let mut it = args.iter();
        while let Some(flag) = it.next() {
            let Some(key) = flag.strip_prefix("--") else {
                eprint!("{USAGE}");
                return Err(Error::Config(format!("unexpected argument {flag:?}")));
            };
            if !allowed.contains(&key) {
                eprint!("{USAGE}");
                return Err(Error::Config(format!("unknown flag --{key}")));
            }
            let Some(value) = it.next() else {
                eprint!("{USAGE}");
                return Err(Error::Config(format!("flag --{key} needs a value")));
            };
            values.push((key.to_string(), value.clone()));
        }
        Ok(Self { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, Error> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad value for --{key}: {v:?}"))),
        }
    }
}

fn cmd_run(args: &[String]) -> Result<(), Error> {
    let flags = Flags::parse(
        args,
        &["config", "preset", "out", "seed", "blocks", "threads"],
    )?;
    let out_path = flags
        .get("out")
        .ok_or_else(|| Error::Config("run requires --out <csv>".into()))?
        .to_string();

    let (mut configs, comments) = match (flags.get("config"), flags.get("preset")) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.to_string(), e))?;
            (parse_config_text(&text)?, Vec::new())
        }
        (None, Some(name)) => {
            let preset = presets()
                .into_iter()
                .find(|p| p.name == name)
                .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
            (
                parse_config_text(&preset.config_text)?,
                preset_csv_comments(name),
            )
        }
        _ => {
            return Err(Error::Config(
                "run requires exactly one of --config or --preset".into(),
            ))
        }
    };

    if let Some(seed) = flags.get_parsed::<u64>("seed")? {
        for cfg in configs.iter_mut() {
            cfg.master_seed = seed;
        }
    }
    if let Some(blocks) = flags.get_parsed::<usize>("blocks")? {
        for cfg in configs.iter_mut() {
            cfg.n_blocks = blocks;
        }
    }
    let threads = flags
        .get_parsed::<usize>("threads")?
        .unwrap_or_else(default_threads);

    for cfg in &configs {
        eprintln!(
            "running scheme={} detector={} ic={} ol={} ({} SNR points x {} blocks)",
            cfg.scheme,
            cfg.detector,
            cfg.ic,
            cfg.outer_iterations,
            cfg.snr_db.len(),
            cfg.n_blocks
        );
    }
    let records = run_configs(&configs, threads)?;
    emit_csv(&records, &out_path, &comments)?;
    eprintln!("wrote {} records to {out_path}", records.len());
    Ok(())
}

fn cmd_presets(args: &[String]) -> Result<(), Error> {
    let flags = Flags::parse(args, &["show"])?;
    if let Some(name) = flags.get("show") {
        let preset = presets()
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
        print!("{}", preset.config_text);
        return Ok(());
    }
    for preset in presets() {
        println!("{:26} {}", preset.name, preset.description);
    }
    Ok(())
}

fn cmd_selftest() -> Result<(), Error> {
    if nomalink::harness::selftest::run_selftest() {
        Ok(())
    } else {
        Err(Error::Config("selftest failed".into()))
    }
}

fn cmd_codebook(args: &[String]) -> Result<(), Error> {
    let flags = Flags::parse(args, &["dump", "load", "scheme", "layers"])?;
    match (flags.get("dump"), flags.get("load")) {
        (Some(path), None) => {
            let scheme = flags
                .get("scheme")
                .ok_or_else(|| Error::Config("codebook --dump needs --scheme".into()))?
                .parse()?;
            let layers = flags.get_parsed::<usize>("layers")?.unwrap_or(6);
            let params = SchemeParams::default();
            // One block is enough to carry the alphabets.
            let block = match scheme {
                nomalink::transmitter::SchemeKind::Nls => params.spread_len,
                _ => 4,
            };
            let layout = build_scheme(scheme, layers, block, &params)?;
            let text = dump_codebook(&layout);
            std::fs::write(path, text).map_err(|e| Error::io(path.to_string(), e))?;
            eprintln!("wrote {scheme} codebook ({layers} layers) to {path}");
            Ok(())
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.to_string(), e))?;
            // Validate by loading onto one block's worth of REs.
            let header: Vec<usize> = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("")
                .split_whitespace()
                .filter_map(|t| t.parse().ok())
                .collect();
            if header.len() != 3 {
                return Err(Error::Parse(
                    "codebook header must be `M L n_layers`".into(),
                ));
            }
            let layout = load_codebook(&text, header[1])?;
            println!(
                "ok: {} layers, block size {}, M = {}, max projected size {}",
                layout.n_layers,
                layout.block_size,
                layout.alphabets[0].size(),
                layout.max_projected_size()
            );
            Ok(())
        }
        _ => Err(Error::Config(
            "codebook requires exactly one of --dump or --load".into(),
        )),
    }
}

fn cmd_alist(args: &[String]) -> Result<(), Error> {
    let flags = Flags::parse(args, &["dump", "load", "code-n"])?;
    match (flags.get("dump"), flags.get("load")) {
        (Some(path), None) => {
            let code_n = flags.get_parsed::<usize>("code-n")?.unwrap_or(512);
            let code = nomalink::coding::CodeConfig::regular(code_n, 32, 25)?;
            let text = nomalink::coding::alist::to_alist(code.parity());
            std::fs::write(path, text).map_err(|e| Error::io(path.to_string(), e))?;
            eprintln!("wrote the n={code_n} parity-check matrix to {path}");
            Ok(())
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.to_string(), e))?;
            let h = nomalink::coding::alist::from_alist(&text)?;
            println!(
                "ok: {} x {} parity-check matrix, {} edges",
                h.m,
                h.n,
                h.num_edges()
            );
            Ok(())
        }
        _ => Err(Error::Config(
            "alist requires exactly one of --dump or --load".into(),
        )),
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
