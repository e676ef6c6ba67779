//! Mixes synthetic noise into synthetic speech at every grid SNR and prints
//! the gain, the achieved SNR and whether the clipping guard fired.
//!
//!     cargo run --example mix_at_snr [-- speech.wav noise.wav]

use snrbench::audio_io::{decode_wav, resample, AudioBuffer, CANONICAL_RATE_HZ};
use snrbench::fixture::{synth_bonafide, synth_noise};
use snrbench::keyed_rng::{stream, KeyPart};
use snrbench::snr_mixer::{mean_power, mix_at_snr, SnrDb};

fn load_or_synth(
    path: Option<String>,
    synth: impl FnOnce() -> Vec<f64>,
) -> Result<AudioBuffer, Box<dyn std::error::Error>> {
    Ok(match path {
        Some(p) => resample(&decode_wav(p)?, CANONICAL_RATE_HZ)?,
        None => AudioBuffer::new(synth(), CANONICAL_RATE_HZ)?,
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let rate = CANONICAL_RATE_HZ;
    let speech = load_or_synth(args.next(), || {
        synth_bonafide(&mut stream(1, &[KeyPart::Str("speech")]), 2 * rate as usize, rate)
    })?;
    let noise = load_or_synth(args.next(), || {
        synth_noise(
            "transport",
            &mut stream(1, &[KeyPart::Str("noise")]),
            3 * rate as usize,
            rate,
        )
    })?;
    let second = AudioBuffer::new(synth_noise("office", &mut stream(2, &[]), rate as usize, rate), rate)?;

    println!(
        "speech power {:.6e}, noise power {:.6e}",
        mean_power(&speech),
        mean_power(&noise)
    );
    println!(
        "{:>7} {:>6} {:>12} {:>14} {:>8}",
        "target", "clips", "gain", "achieved", "rescale"
    );
    for target in SnrDb::grid() {
        for noises in [vec![noise.clone()], vec![noise.clone(), second.clone()]] {
            let mix = mix_at_snr(&speech, &noises, target, 7)?;
            println!(
                "{:>7} {:>6} {:>12.6} {:>14.9} {:>8.4}",
                target.value(),
                noises.len(),
                mix.noise_gain,
                mix.achieved_snr_db,
                mix.peak_rescale
            );
        }
    }
    Ok(())
}
