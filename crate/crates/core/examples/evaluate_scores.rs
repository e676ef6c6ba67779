//! Per-condition metrics over a score file. With no argument, evaluates a
//! built-in file: the six-trial worked example as the clean condition plus
//! two overlapping Gaussian populations at 0 dB.
//!
//!     cargo run --example evaluate_scores [-- scores.tsv [threshold]]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use snrbench::condition_sampler::Condition;
use snrbench::metrics::{per_condition_curves, EvalOptions, ScoreFile, ScoreRow, Task, Truth};
use snrbench::snr_mixer::SnrDb;

fn builtin() -> Result<ScoreFile, Box<dyn std::error::Error>> {
    let row = |id: String, condition, bonafide, score| ScoreRow {
        utt_id: id,
        task: Task::BinarySpoof,
        condition,
        truth: Truth::Binary(bonafide),
        scores: vec![score],
    };
    let mut rows = Vec::new();
    for (i, (b, s)) in [
        (true, 0.8),
        (true, 0.6),
        (true, 0.4),
        (false, 0.7),
        (false, 0.3),
        (false, 0.2),
    ]
    .into_iter()
    .enumerate()
    {
        rows.push(row(format!("clean_{i}"), Condition::Clean, b, s));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (pos, neg) = (Normal::new(1.0, 1.0)?, Normal::new(-1.0, 1.0)?);
    let zero = Condition::Snr(SnrDb::new(0.0)?);
    for i in 0..5000 {
        rows.push(row(format!("snr0_b{i}"), zero, true, pos.sample(&mut rng)));
        rows.push(row(format!("snr0_s{i}"), zero, false, neg.sample(&mut rng)));
    }
    Ok(ScoreFile::new(rows)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let scores = match args.next() {
        Some(p) => ScoreFile::read(p)?,
        None => builtin()?,
    };
    let threshold = args.next().map(|t| t.parse()).transpose()?;
    let report = per_condition_curves(&scores, EvalOptions { threshold })?;
    print!("{}", report.to_table());
    println!();
    for line in report.to_csv().lines().filter(|l| l.contains("eer")).take(6) {
        println!("{line}");
    }
    Ok(())
}
