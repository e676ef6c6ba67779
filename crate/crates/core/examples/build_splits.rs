//! Scans a synthetic corpus and renders the three evaluation-side splits:
//! a multi-condition training split, a fixed-SNR test split and the mixed
//! test/dev composition.
//!
//!     cargo run --release --example build_splits [-- out_dir]

use std::path::{Path, PathBuf};

use snrbench::condition_sampler::{
    materialize, plan_fixed_snr, plan_mixed_test, plan_multicondition, read_labels, Condition, ConditionPlan,
    SamplingPolicy, LABELS_FILE,
};
use snrbench::corpus_manifest::{CategoryAliases, Manifest, ProtocolLayout, Split};
use snrbench::fixture::{write_fixture, FixtureSpec};
use snrbench::pipeline::scan_corpus;
use snrbench::snr_mixer::SnrDb;

const SEED: u64 = 11;

fn render(name: &str, plan: &ConditionPlan, manifest: &Manifest, out: &Path) -> Result<(), Box<dyn std::error::Error>> {
    let dir = out.join(name);
    let summary = materialize(plan, manifest, &dir)?;
    let labels = read_labels(dir.join(LABELS_FILE))?;
    let worst = labels
        .iter()
        .filter_map(|l| match l.snr_db {
            Condition::Snr(t) => Some((l.achieved_snr_db? - t.value()).abs()),
            Condition::Clean => None,
        })
        .fold(0.0f64, f64::max);
    println!(
        "{name:<16} rendered {:>4}  skipped {}  noisy {:>5.1}%  class counts {:?}  max |achieved - target| {worst:.2e} dB",
        summary.rendered,
        summary.skipped.len(),
        100.0 * plan.noisy_fraction(),
        plan.class_counts
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp;
    let out = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path().to_path_buf()
        }
    };
    let spec = FixtureSpec {
        n_train: 60,
        n_dev: 40,
        n_test: 60,
        ..FixtureSpec::default()
    };
    let fx = write_fixture(out.join("corpus"), &spec)?;
    let manifest = scan_corpus(
        &fx.speech_dir,
        &fx.noise_dir,
        &fx.protocols,
        &ProtocolLayout::default(),
        &CategoryAliases::default(),
    )?;
    println!(
        "{} trials, {} noise clips",
        manifest.trials.len(),
        manifest.noises.len()
    );

    let splits = out.join("splits");
    let train = manifest.with_splits(&[Split::Train]);
    render(
        "multicondition",
        &plan_multicondition(&train, &SamplingPolicy::training(SEED))?,
        &manifest,
        &splits,
    )?;
    let test = manifest.with_splits(&[Split::Test]);
    render(
        "fixed-snr_0",
        &plan_fixed_snr(&test, SnrDb::new(0.0)?, SEED)?,
        &manifest,
        &splits,
    )?;
    render("mixed-test", &plan_mixed_test(&manifest, SEED)?, &manifest, &splits)?;
    println!("output under {}", out.display());
    Ok(())
}
