//! End-to-end checks of the command-line surface: subcommands, exit codes,
//! file outputs, and run reproducibility.

use std::path::PathBuf;
use std::process::{Command, Output};

fn nomalink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nomalink"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp_path(name: &str) -> PathBuf {
    let mut path = std::env::temp_dir();
    path.push(format!("nomalink_test_{}_{name}", std::process::id()));
    path
}

#[test]
fn presets_lists_the_required_names() {
    let out = nomalink(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in [
        "fig3_cbofdma_6ue",
        "fig4_ic_comparison",
        "fig5_detector_comparison",
        "fig6_scheme_comparison",
    ] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn preset_show_prints_parseable_config() {
    let out = nomalink(&["presets", "--show", "fig3_cbofdma_6ue"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(nomalink::harness::parse_config_text(&text).is_ok());
}

#[test]
fn missing_config_file_exits_2_and_names_the_path() {
    let out = nomalink(&[
        "run",
        "--config",
        "/definitely/missing.cfg",
        "--out",
        "/tmp/x.csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/definitely/missing.cfg"), "stderr: {err}");
}

#[test]
fn unknown_flag_exits_1_with_usage() {
    let out = nomalink(&["run", "--bogus", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("USAGE"), "stderr: {err}");
}

#[test]
fn unknown_subcommand_exits_1() {
    let out = nomalink(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_content_exits_1() {
    let cfg = tmp_path("bad.cfg");
    std::fs::write(&cfg, "nonsense_key = 5\n").unwrap();
    let out = nomalink(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        "/tmp/x.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_file(&cfg).ok();
}

#[test]
fn run_twice_with_fixed_seed_is_byte_identical() {
    let cfg = tmp_path("tiny.cfg");
    std::fs::write(
        &cfg,
        "scheme = scma\nn_ue = 3\ndetector = epa\nic = hybrid_pic\nouter_iterations = 1\n\
         code_n = 128\ntbs_bits = 32\ncoherence_re = 8\nsnr_db = -2,0\nn_blocks = 20\nseed = 5\n",
    )
    .unwrap();
    let out_a = tmp_path("a.csv");
    let out_b = tmp_path("b.csv");
    for (out_path, threads) in [(&out_a, "1"), (&out_b, "3")] {
        let out = nomalink(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b, "CSV outputs differ between runs/thread counts");
    assert!(!a.is_empty());
    for path in [&cfg, &out_a, &out_b] {
        std::fs::remove_file(path).ok();
    }
}

#[test]
fn codebook_dump_load_round_trip() {
    let file = tmp_path("codebook.txt");
    let out = nomalink(&[
        "codebook",
        "--dump",
        file.to_str().unwrap(),
        "--scheme",
        "scma",
        "--layers",
        "6",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = nomalink(&["codebook", "--load", file.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("6 layers"), "stdout: {text}");
    std::fs::remove_file(&file).ok();
}

#[test]
fn codebook_file_feeds_an_end_to_end_run() {
    let file = tmp_path("nls_codebook.txt");
    let out = nomalink(&[
        "codebook",
        "--dump",
        file.to_str().unwrap(),
        "--scheme",
        "nls",
        "--layers",
        "3",
    ]);
    assert!(out.status.success());

    let cfg = tmp_path("cb.cfg");
    std::fs::write(
        &cfg,
        format!(
            "codebook = {}\nn_ue = 3\ndetector = mmse_chip\nic = soft_pic\nouter_iterations = 1\n\
             code_n = 128\ntbs_bits = 32\ncoherence_re = 8\nsnr_db = 6\nn_blocks = 10\nseed = 2\n",
            file.display()
        ),
    )
    .unwrap();
    let out_csv = tmp_path("cb.csv");
    let out = nomalink(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&out_csv).unwrap();
    assert!(text.contains("custom,mmse_chip,soft_pic"));
    for path in [&file, &cfg, &out_csv] {
        std::fs::remove_file(path).ok();
    }
}

#[test]
fn alist_dump_load_round_trip() {
    let file = tmp_path("parity.alist");
    let out = nomalink(&["alist", "--dump", file.to_str().unwrap(), "--code-n", "256"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = nomalink(&["alist", "--load", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("128 x 256"));
    std::fs::remove_file(&file).ok();
}

#[test]
fn unwritable_output_exits_2_with_path() {
    let cfg = tmp_path("ok.cfg");
    std::fs::write(
        &cfg,
        "n_ue = 1\ncode_n = 128\ntbs_bits = 32\ncoherence_re = 8\nsnr_db = 20\nn_blocks = 2\n",
    )
    .unwrap();
    let out = nomalink(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        "/no/such/dir/out.csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/dir/out.csv"));
    std::fs::remove_file(&cfg).ok();
}
