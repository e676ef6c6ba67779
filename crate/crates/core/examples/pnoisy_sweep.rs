//! Sweeps the noisy-trial proportion of the training split, trains the
//! baseline on each member and reports EER on a fixed-SNR test split.
//!
//!     cargo run --release --example pnoisy_sweep [-- 0,0.25,0.5,0.75,1 [snr_db]]

use snrbench::cli_report::{
    cmd_build, cmd_scan, cmd_sweep_report, fixed_snr_name, parse_fractions, run_sweep_baseline, BuildKind, RunConfig,
};
use snrbench::fixture::{write_fixture, FixtureSpec};
use snrbench::snr_mixer::SnrDb;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let fractions = parse_fractions(&args.next().unwrap_or_else(|| "0,0.25,0.5,0.75,1".into()))?;
    let snr = SnrDb::new(args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.0))?;

    let tmp = tempfile::tempdir()?;
    let fx = write_fixture(tmp.path().join("corpus"), &FixtureSpec::default())?;
    let mut cfg = RunConfig {
        seed: Some(1),
        ..RunConfig::default()
    };
    cfg.paths.speech_root = Some(fx.speech_dir.clone());
    cfg.paths.noise_root = Some(fx.noise_dir.clone());
    cfg.paths.protocols = fx.protocols.iter().cloned().collect();
    cfg.paths.output_dir = Some(tmp.path().join("run"));

    cmd_scan(&cfg)?;
    cmd_build(
        &cfg,
        &BuildKind::PnoisySweep {
            fractions,
            splits: vec![],
        },
    )?;
    cmd_build(
        &cfg,
        &BuildKind::FixedSnr {
            snr_db: Some(snr.value()),
            splits: vec![],
        },
    )?;
    run_sweep_baseline(&cfg, &fixed_snr_name(snr))?;
    println!("{:<10} {:>7} {:>8} {:>8}", "member", "p_noisy", "EER", "AUC");
    for r in cmd_sweep_report(&cfg, None)? {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        println!("{:<10} {:>7} {:>8} {:>8}", r.member, r.p_noisy, f(r.eer), f(r.roc_auc));
    }
    Ok(())
}
