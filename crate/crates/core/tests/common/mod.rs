#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use snrbench::cli_report::{
    cmd_build, cmd_eval, cmd_scan, cmd_score_baseline, BuildKind, RunConfig, ScoreArgs, CLEAN_SPLIT,
};
use snrbench::fixture::{write_fixture, FixtureLayout, FixtureSpec};
use snrbench::metrics::EvalOptions;

pub fn small_spec(seed: u64) -> FixtureSpec {
    FixtureSpec {
        seed,
        n_train: 40,
        n_dev: 16,
        n_test: 40,
        clips_per_category: 2,
        noise_duration_s: 4.0,
        ..FixtureSpec::default()
    }
}

pub fn fixture(root: &Path, spec: &FixtureSpec) -> FixtureLayout {
    write_fixture(root, spec).expect("fixture")
}

pub fn config_for(fx: &FixtureLayout, out: &Path, seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        seed: Some(seed),
        ..RunConfig::default()
    };
    cfg.paths.speech_root = Some(fx.speech_dir.clone());
    cfg.paths.noise_root = Some(fx.noise_dir.clone());
    cfg.paths.protocols = fx.protocols.iter().cloned().collect();
    cfg.paths.output_dir = Some(out.to_path_buf());
    cfg
}

/// Everything after `scan`: three builds, two score files, two reports.
pub fn run_after_scan(cfg: &RunConfig) {
    cmd_build(cfg, &BuildKind::Multicondition { splits: vec![] }).unwrap();
    cmd_build(cfg, &BuildKind::Clean { splits: vec![] }).unwrap();
    cmd_build(
        cfg,
        &BuildKind::FixedSnr {
            snr_db: Some(0.0),
            splits: vec![],
        },
    )
    .unwrap();
    cmd_build(cfg, &BuildKind::MixedTest).unwrap();
    let train = |split: &str| ScoreArgs {
        split: split.into(),
        train_split: Some("multicondition".into()),
        ..ScoreArgs::default()
    };
    let clean = cmd_score_baseline(cfg, &train(CLEAN_SPLIT)).unwrap();
    let snr0 = cmd_score_baseline(cfg, &train("fixed-snr_0")).unwrap();
    let mixed = cmd_score_baseline(cfg, &train("mixed-test")).unwrap();
    cmd_eval(cfg, &[clean, snr0], Some("per-snr"), EvalOptions::default()).unwrap();
    cmd_eval(cfg, &[mixed], None, EvalOptions::default()).unwrap();
}

pub fn run_pipeline(cfg: &RunConfig) {
    cmd_scan(cfg).unwrap();
    run_after_scan(cfg);
}

/// Relative path -> file bytes for every file under `root`.
pub fn tree_bytes(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_path_buf();
            (rel, fs::read(e.path()).unwrap())
        })
        .collect()
}

/// First differing path between two trees, if any.
pub fn tree_diff(a: &BTreeMap<PathBuf, Vec<u8>>, b: &BTreeMap<PathBuf, Vec<u8>>) -> Option<String> {
    let ka: Vec<_> = a.keys().collect();
    let kb: Vec<_> = b.keys().collect();
    if ka != kb {
        return Some(format!("file sets differ: {} vs {} files", ka.len(), kb.len()));
    }
    a.iter()
        .find(|(k, v)| b[*k] != **v)
        .map(|(k, _)| format!("{} differs", k.display()))
}

pub fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

pub fn snr_db(speech: &[f64], noise: &[f64]) -> f64 {
    10.0 * (mean_square(speech) / mean_square(noise)).log10()
}
