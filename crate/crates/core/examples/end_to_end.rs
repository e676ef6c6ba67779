//! The full benchmark loop through the library form of the CLI verbs:
//! scan, build (multi-condition train, clean and per-SNR tests), score with
//! the LFCC baseline, and evaluate clean plus all nine SNRs in one report.
//!
//!     cargo run --release --example end_to_end [-- out_dir]

use std::path::PathBuf;

use snrbench::cli_report::{
    cmd_build, cmd_eval, cmd_scan, cmd_score_baseline, fixed_snr_name, BuildKind, RunConfig, ScoreArgs, CLEAN_SPLIT,
};
use snrbench::fixture::{write_fixture, FixtureSpec};
use snrbench::metrics::EvalOptions;
use snrbench::snr_mixer::SnrDb;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp;
    let out = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path().to_path_buf()
        }
    };
    let fx = write_fixture(
        out.join("corpus"),
        &FixtureSpec {
            n_test: 60,
            ..FixtureSpec::default()
        },
    )?;

    let mut cfg = RunConfig {
        seed: Some(2024),
        ..RunConfig::default()
    };
    cfg.paths.speech_root = Some(fx.speech_dir.clone());
    cfg.paths.noise_root = Some(fx.noise_dir.clone());
    cfg.paths.protocols = fx.protocols.iter().cloned().collect();
    cfg.paths.output_dir = Some(out.join("run"));
    println!("config digest {}", cfg.digest());

    cmd_scan(&cfg)?;
    cmd_build(&cfg, &BuildKind::Multicondition { splits: vec![] })?;
    cmd_build(&cfg, &BuildKind::Clean { splits: vec![] })?;
    let mut score_files = vec![cmd_score_baseline(
        &cfg,
        &ScoreArgs {
            split: CLEAN_SPLIT.into(),
            train_split: Some("multicondition".into()),
            ..ScoreArgs::default()
        },
    )?];
    let model = cfg.output_dir()?.join("models").join("multicondition.json");
    for snr in SnrDb::grid() {
        cmd_build(
            &cfg,
            &BuildKind::FixedSnr {
                snr_db: Some(snr.value()),
                splits: vec![],
            },
        )?;
        score_files.push(cmd_score_baseline(
            &cfg,
            &ScoreArgs {
                split: fixed_snr_name(snr),
                model: Some(model.clone()),
                ..ScoreArgs::default()
            },
        )?);
    }
    let report = cmd_eval(&cfg, &score_files, Some("per-snr"), EvalOptions::default())?;
    print!("{}", report.to_table());
    println!("outputs under {}", cfg.output_dir()?.display());
    Ok(())
}
