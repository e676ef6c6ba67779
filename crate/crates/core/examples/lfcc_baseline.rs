//! LFCC extraction and the linear baseline scorer on synthetic bonafide and
//! spoof utterances, scored with ROC-AUC and EER on a held-out half.
//!
//!     cargo run --release --example lfcc_baseline

use snrbench::audio_io::{AudioBuffer, CANONICAL_RATE_HZ};
use snrbench::baseline_features::{extract_lfcc, train_scorer_traced, LfccConfig, LfccExtractor, TrainConfig};
use snrbench::fixture::{synth_bonafide, synth_spoof};
use snrbench::keyed_rng::{stream, KeyPart};
use snrbench::metrics::{eer, roc_auc};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rate = CANONICAL_RATE_HZ;
    let cfg = LfccConfig::default();

    let tone: Vec<f64> = (0..rate as usize)
        .map(|n| 0.5 * (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / rate as f64).sin())
        .collect();
    let ex = LfccExtractor::new(&cfg, rate)?;
    let energies = ex.log_energies(&tone)?;
    let peak = energies[0]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    println!(
        "1 kHz tone: {} frames, loudest filter {peak} centred at {:.1} Hz",
        energies.len(),
        ex.filterbank().centers_hz[peak]
    );

    let n = 2 * rate as usize;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..160u64 {
        let bonafide = i % 2 == 0;
        let mut rng = stream(5, &[KeyPart::Str("utt"), KeyPart::U64(i)]);
        let x = if bonafide {
            synth_bonafide(&mut rng, n, rate)
        } else {
            synth_spoof(&mut rng, n, rate)
        };
        features.push(extract_lfcc(&AudioBuffer::new(x, rate)?, &cfg)?.summary());
        labels.push(bonafide);
    }
    let (train_x, test_x) = features.split_at(80);
    let (train_y, test_y) = labels.split_at(80);
    let (scorer, losses) = train_scorer_traced(train_x, train_y, &TrainConfig::default())?;
    println!(
        "trained on {} utterances x {} features: loss {:.4} -> {:.4}",
        train_x.len(),
        scorer.dims,
        losses[0],
        losses[losses.len() - 1]
    );

    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (f, &y) in test_x.iter().zip(test_y) {
        let s = scorer.score(f)?;
        if y {
            pos.push(s)
        } else {
            neg.push(s)
        }
    }
    let e = eer(&pos, &neg)?;
    println!(
        "held-out: AUC {:.4}, EER {:.4} at threshold {:.4}",
        roc_auc(&pos, &neg)?,
        e.eer,
        e.threshold
    );
    Ok(())
}
